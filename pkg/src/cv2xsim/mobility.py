"""Per-slot vehicle kinematics on a bidirectional multi-lane ring highway.

x wraps on a torus of length D so vehicle density stays constant; lanes
f <= F/2 drive in +x, the rest in -x, each at the constant per-lane speed
v_max - 20*|f - F/2 + (delta-1)/2| km/h.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import SimulationConfig

KMH_TO_M_PER_MS = 1.0 / 3600.0  # 80 km/h = 0.0222.. m/ms


@dataclass(frozen=True)
class VehiclePose:
    x: float          # meters in [0, D)
    y: float          # meters, f*d_y - d_y/2
    lane: int         # 1..F
    direction: int    # +1 or -1
    speed: float      # km/h


def lane_direction(f: int, cfg: SimulationConfig) -> int:
    return 1 if f <= cfg.lanes // 2 else -1


def lane_speed(f: int, direction: int, cfg: SimulationConfig) -> float:
    """Constant speed on lane f in km/h; inner lanes are faster."""
    return cfg.v_max - 20.0 * abs(f - cfg.lanes / 2 + (direction - 1) / 2)


def lane_y(f: int, cfg: SimulationConfig) -> float:
    return f * cfg.lane_width - cfg.lane_width / 2


def step_position(pose: VehiclePose, slot_ms: float, cfg: SimulationConfig) -> VehiclePose:
    """Advance one slot; x' = x + delta*v*tau wrapped into [0, D)."""
    dx = pose.direction * pose.speed * KMH_TO_M_PER_MS * slot_ms
    return replace(pose, x=(pose.x + dx) % cfg.highway_length)


def wrapped_dx(xi: float, xj: float, highway_length: float) -> float:
    dx = abs(xi - xj)
    return min(dx, highway_length - dx)


def distance(a: VehiclePose, b: VehiclePose, highway_length: float) -> float:
    dx = wrapped_dx(a.x, b.x, highway_length)
    return float(np.hypot(dx, a.y - b.y))


def receivers_within(i: int, poses: list[VehiclePose], w: float, highway_length: float) -> set[int]:
    """All j != i within Euclidean (torus-x) distance <= w of vehicle i."""
    me = poses[i]
    return {j for j, p in enumerate(poses) if j != i and distance(me, p, highway_length) <= w}


def make_fleet(cfg: SimulationConfig, rng: np.random.Generator) -> list[VehiclePose]:
    """Initial placement: lanes round-robin, uniform random x per vehicle."""
    fleet = []
    for v in range(cfg.n_vehicles):
        f = (v % cfg.lanes) + 1
        d = lane_direction(f, cfg)
        fleet.append(VehiclePose(
            x=float(rng.uniform(0.0, cfg.highway_length)),
            y=lane_y(f, cfg),
            lane=f,
            direction=d,
            speed=lane_speed(f, d, cfg),
        ))
    return fleet


def pair_distances(x: np.ndarray, y: np.ndarray, highway_length: float) -> np.ndarray:
    """(N, N) matrix of torus-x Euclidean distances."""
    dx = np.abs(x[:, None] - x[None, :])
    np.minimum(dx, highway_length - dx, out=dx)
    dy = y[:, None] - y[None, :]
    return np.hypot(dx, dy)


def pair_distances_sq(x: np.ndarray, dy_sq: np.ndarray, highway_length: float) -> np.ndarray:
    """Squared torus distances given the precomputed (N, N) squared dy matrix."""
    dx = np.abs(x[:, None] - x[None, :])
    np.minimum(dx, highway_length - dx, out=dx)
    dx *= dx
    dx += dy_sq
    return dx
