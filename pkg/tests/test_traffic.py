import dataclasses
import math

import numpy as np
import pytest

from cv2xsim.config import default_config
from cv2xsim.traffic import (CAM, DENM, HPD, KINDS, MHD, Message,
                             PriorityQueues, arrival_probability, cam_arrival,
                             poisson_arrival, schedule_retransmissions,
                             select_transmit, transmit_opportunity)

CFG = default_config()


def test_cam_arrival():
    assert cam_arrival(200, 100) == 1
    assert cam_arrival(50, 100) == 0
    assert cam_arrival(0, 100) == 1


def test_arrival_probability_value():
    # independent evaluation of lambda * e^-lambda
    lam = 1e-4
    assert arrival_probability(lam) == pytest.approx(lam * math.exp(-lam), rel=1e-15)
    assert arrival_probability(lam) == pytest.approx(9.999000049998333e-05, rel=1e-12)
    assert arrival_probability(0.0) == 0.0


def test_poisson_arrival_zero_rate():
    rng = np.random.default_rng(0)
    assert all(poisson_arrival(0.0, rng) == 0 for _ in range(1000))


def test_poisson_arrival_frequency_matches_oracle():
    # Monte Carlo frequency within 3 sigma of lambda*e^-lambda
    lam = 0.01
    p = arrival_probability(lam)
    n = 10 ** 7
    rng = np.random.default_rng(42)
    hits = int((rng.random(n) < p).sum())
    sigma = math.sqrt(n * p * (1 - p))
    assert abs(hits - n * p) < 3 * sigma


def test_schedule_retransmissions_hpd():
    assert schedule_retransmissions(HPD, 0, CFG) == [100 * k for k in range(1, 9)]


def test_schedule_retransmissions_denm():
    assert schedule_retransmissions(DENM, 10, CFG) == [510, 1010, 1510, 2010, 2510]


def test_schedule_retransmissions_zero_count():
    cfg = dataclasses.replace(CFG, k_h=0)
    assert schedule_retransmissions(HPD, 0, cfg) == []


def test_schedule_retransmissions_rejects_cam():
    with pytest.raises(ValueError):
        schedule_retransmissions(CAM, 0, CFG)


def test_enqueue_grows_queue():
    q = PriorityQueues(capacity=10)
    for i in range(5):
        assert q.enqueue(Message(CAM, i))
    assert q.length(CAM) == 5
    assert q.enqueue(Message(CAM, 6))
    assert q.length(CAM) == 6


def test_enqueue_overflow_drops_new_message():
    q = PriorityQueues(capacity=10)
    for i in range(10):
        q.enqueue(Message(CAM, i))
    assert not q.enqueue(Message(CAM, 10))
    assert q.length(CAM) == 10
    assert q.drops[CAM] == 1
    # FIFO head is untouched by the drop
    _, msg = q.pop_transmit([0, 0, 1, 0], now=11)
    assert msg.generated_at == 0


def test_enqueue_then_transmit_same_slot_keeps_length():
    q = PriorityQueues(capacity=10)
    for i in range(3):
        q.enqueue(Message(CAM, i))
    q.enqueue(Message(CAM, 3))               # alpha=1
    beta, msg = q.pop_transmit([0, 0, 1, 0], now=3)  # beta=1
    assert beta[CAM] == 1 and msg is not None
    assert q.length(CAM) == 3


def test_transmit_opportunity_requires_reserved_slot_and_backlog():
    q = PriorityQueues(capacity=10)
    q.enqueue(Message(CAM, 0))
    q.enqueue(Message(CAM, 0))
    assert transmit_opportunity(320, 320, q) == [0, 0, 1, 0]
    assert transmit_opportunity(320, 319, q) == [0, 0, 0, 0]
    empty = PriorityQueues(capacity=10)
    assert transmit_opportunity(320, 320, empty) == [0, 0, 0, 0]


def test_select_transmit_priority_scan():
    q = PriorityQueues(capacity=10)
    q.enqueue(Message(HPD, 1))
    q.enqueue(Message(CAM, 2))
    beta, msg = select_transmit(q, [1, 0, 1, 0], now=5)
    assert beta == [1, 0, 0, 0] and msg.kind == HPD
    beta, msg = select_transmit(q, [0, 0, 1, 0], now=5)
    assert beta == [0, 0, 1, 0] and msg.kind == CAM
    beta, msg = select_transmit(q, [0, 0, 0, 0], now=5)
    assert beta == [0, 0, 0, 0] and msg is None


def test_fifo_order_within_kind():
    q = PriorityQueues(capacity=10)
    stamps = [3, 5, 9, 11]
    for s in stamps:
        q.enqueue(Message(DENM, s))
    seen = []
    for _ in stamps:
        _, msg = q.pop_transmit([0, 1, 0, 0], now=20)
        seen.append(msg.generated_at)
    assert seen == stamps


def test_age_shift_rule():
    # queue holding ages (7, 3) at `now`
    now = 20
    q = PriorityQueues(capacity=10)
    q.enqueue(Message(CAM, now - 7))
    q.enqueue(Message(CAM, now - 3))
    assert q.ages(CAM, now) == [7, 3]
    # no transmit: both age by one slot
    assert q.ages(CAM, now + 1) == [8, 4]
    # transmit: the head (age 7) leaves, the survivor advances to (4)
    _, msg = q.pop_transmit([0, 0, 1, 0], now=now)
    assert msg.aoi(now) == 7
    assert q.ages(CAM, now + 1) == [4]


def test_age_mass_accounting():
    q = PriorityQueues(capacity=10)
    q.enqueue(Message(CAM, 0))
    _, msg = q.pop_transmit([0, 0, 1, 0], now=5)
    # ages 0,1,2,3,4 accumulated over slots 0..4
    assert q.aoi_mass[CAM] == 10
    assert q.aoi_slots[CAM] == 5


def test_flush_ages_closes_out_queued_messages():
    q = PriorityQueues(capacity=10)
    q.enqueue(Message(MHD, 2))
    q.flush_ages(now=6)
    assert q.aoi_slots[MHD] == 4
    assert q.aoi_mass[MHD] == 0 + 1 + 2 + 3
    assert q.total_len() == 0


def test_conservation_under_random_ops():
    rng = np.random.default_rng(17)
    q = PriorityQueues(capacity=4)
    attempts = [0, 0, 0, 0]
    for t in range(3000):
        kind = int(rng.integers(4))
        if rng.random() < 0.6:
            attempts[kind] += 1
            q.enqueue(Message(kind, t))
        if rng.random() < 0.3:
            rho = [1 if q.length(k) else 0 for k in KINDS]
            q.pop_transmit(rho, now=t)
    for k in KINDS:
        assert q.enqueued[k] + q.drops[k] == attempts[k]
        assert q.enqueued[k] == q.dequeued[k] + q.length(k)


def test_single_queue_pools_kinds_fifo():
    q = PriorityQueues(capacity=2, single_queue=True)
    assert q.capacity == 8  # matched total buffering: 4 kinds x L
    q.enqueue(Message(MHD, 0))
    q.enqueue(Message(HPD, 1))
    _, first = q.pop_transmit([1, 1, 1, 1], now=2)
    assert first.kind == MHD  # arrival order wins, not priority
    assert q.length(HPD) == 1
    _, second = q.pop_transmit([1, 1, 1, 1], now=2)
    assert second.kind == HPD


def test_single_queue_per_slot_beta_at_most_one():
    q = PriorityQueues(capacity=2, single_queue=True)
    q.enqueue(Message(CAM, 0))
    q.enqueue(Message(CAM, 0))
    beta, _ = q.pop_transmit([1, 1, 1, 1], now=1)
    assert sum(beta) == 1
