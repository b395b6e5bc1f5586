import dataclasses
import math

import numpy as np
import pytest

from cv2xsim.config import default_config
from cv2xsim.mobility import (VehiclePose, distance, lane_direction, lane_speed,
                              lane_y, make_fleet, pair_distances,
                              pair_distances_sq, receivers_within,
                              step_position, wrapped_dx)

CFG = default_config()


@pytest.mark.parametrize("lane,direction,expected", [
    (2, +1, 80.0),
    (1, +1, 60.0),
    (3, -1, 80.0),
    (4, -1, 60.0),
])
def test_lane_speed(lane, direction, expected):
    assert lane_speed(lane, direction, CFG) == pytest.approx(expected)


def test_lane_y():
    assert lane_y(1, CFG) == pytest.approx(2.0)
    assert lane_y(2, CFG) == pytest.approx(6.0)
    flat = dataclasses.replace(CFG, lane_width=0.0)
    assert lane_y(1, flat) == 0.0


def test_step_position_forward():
    pose = VehiclePose(x=100.0, y=2.0, lane=2, direction=+1, speed=80.0)
    nxt = step_position(pose, 1, CFG)
    assert nxt.x == pytest.approx(100.0 + 80.0 / 3600.0, abs=1e-12)
    assert (nxt.y, nxt.lane, nxt.direction, nxt.speed) == (2.0, 2, +1, 80.0)


def test_step_position_zero_speed():
    pose = VehiclePose(x=0.0, y=2.0, lane=1, direction=+1, speed=0.0)
    assert step_position(pose, 1, CFG).x == 0.0


def test_step_position_wraps():
    pose = VehiclePose(x=499.99, y=2.0, lane=2, direction=+1, speed=80.0)
    nxt = step_position(pose, 1, CFG)
    assert nxt.x == pytest.approx((499.99 + 80.0 / 3600.0) - 500.0, abs=1e-9)


def test_receivers_at_exact_radius_inclusive():
    a = VehiclePose(0.0, 2.0, 1, +1, 60.0)
    b = VehiclePose(150.0, 2.0, 1, +1, 60.0)
    poses = [a, b]
    assert receivers_within(0, poses, 150.0, 500.0) == {1}
    assert receivers_within(1, poses, 150.0, 500.0) == {0}


def test_receivers_singleton_empty():
    a = VehiclePose(10.0, 2.0, 1, +1, 60.0)
    assert receivers_within(0, [a], 150.0, 500.0) == set()


def test_receivers_wrapped_distance():
    a = VehiclePose(10.0, 2.0, 1, +1, 60.0)
    b = VehiclePose(495.0, 2.0, 1, +1, 60.0)
    assert distance(a, b, 500.0) == pytest.approx(15.0)
    assert receivers_within(0, [a, b], 150.0, 500.0) == {1}


def test_wrapped_distance_symmetric_and_bounded():
    rng = np.random.default_rng(7)
    for _ in range(200):
        xi, xj = rng.uniform(0, 500, size=2)
        assert wrapped_dx(xi, xj, 500.0) == pytest.approx(wrapped_dx(xj, xi, 500.0))
        assert wrapped_dx(xi, xj, 500.0) <= 250.0 + 1e-12


def test_many_steps_stay_on_highway():
    rng = np.random.default_rng(11)
    fleet = make_fleet(CFG, rng)
    for pose in fleet:
        p = pose
        for _ in range(5000):
            p = step_position(p, 1, CFG)
        assert 0.0 <= p.x < CFG.highway_length
        assert p.lane == pose.lane and p.speed == pose.speed
        assert p.y == pytest.approx(pose.lane * CFG.lane_width - CFG.lane_width / 2)


def test_fleet_round_robin_lanes_and_invariants():
    rng = np.random.default_rng(3)
    fleet = make_fleet(CFG, rng)
    assert len(fleet) == CFG.n_vehicles
    for v, pose in enumerate(fleet):
        assert pose.lane == (v % CFG.lanes) + 1
        assert pose.direction == lane_direction(pose.lane, CFG)
        assert pose.speed == pytest.approx(lane_speed(pose.lane, pose.direction, CFG))
        assert 0.0 <= pose.x < CFG.highway_length


def test_pair_distance_matrices_agree():
    rng = np.random.default_rng(5)
    fleet = make_fleet(CFG, rng)
    x = np.array([p.x for p in fleet])
    y = np.array([p.y for p in fleet])
    full = pair_distances(x, y, CFG.highway_length)
    sq = pair_distances_sq(x, (y[:, None] - y[None, :]) ** 2, CFG.highway_length)
    assert np.allclose(full ** 2, sq)
    for i in (0, 3, 7):
        for j in (1, 5):
            assert full[i, j] == pytest.approx(distance(fleet[i], fleet[j],
                                                        CFG.highway_length))
