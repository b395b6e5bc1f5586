"""Message generation, four-priority FIFO queues, and in-queue age tracking.

Message kinds, in strict priority order: HPD > DENM > CAM > MHD. CAM is
periodic (one per cam_period); the other three arrive as per-slot Bernoulli
draws with probability lambda*exp(-lambda), and HPD/DENM additionally schedule
k_h/k_d retransmission copies at t_h/t_d intervals. A message's age is
now - generated_at, so ages advance implicitly with the slot clock; per-kind
age mass is closed out in O(1) when a message leaves its queue.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .config import SimulationConfig

HPD, DENM, CAM, MHD = 0, 1, 2, 3
KINDS = (HPD, DENM, CAM, MHD)
KIND_NAMES = ("hpd", "denm", "cam", "mhd")


@dataclass(frozen=True)
class Message:
    kind: int
    generated_at: int  # slot

    def aoi(self, now: int) -> int:
        return now - self.generated_at


def cam_arrival(t: int, t_c: int) -> int:
    """1 iff a CAM is generated this slot: alpha = 1 - ceil((t mod T_c)/T_c)."""
    return 1 if t % t_c == 0 else 0


def arrival_probability(lam: float) -> float:
    """Per-slot probability of one trigger-based arrival, lambda*e^-lambda."""
    return lam * math.exp(-lam)


def poisson_arrival(lam: float, rng) -> int:
    return 1 if rng.random() < arrival_probability(lam) else 0


def schedule_retransmissions(kind: int, t: int, cfg: SimulationConfig) -> list[int]:
    """Due slots of the retransmission copies for a fresh HPD or DENM arrival."""
    if kind == HPD:
        return [t + (k + 1) * cfg.t_h for k in range(cfg.k_h)]
    if kind == DENM:
        return [t + (k + 1) * cfg.t_d for k in range(cfg.k_d)]
    raise ValueError(f"kind {kind} has no retransmissions")


class PriorityQueues:
    """One FIFO per kind, capacity L each, or one pooled FIFO in single-queue
    (priority-less) comparison mode. The pooled queue holds 4*L messages so
    both disciplines are compared at the same total buffering.

    Tracks enqueue/dequeue/drop conservation counters and per-kind in-queue
    age mass: a message enqueued at slot e that leaves at slot u contributed
    age (tau - generated_at) for every slot tau in [e, u).
    """

    def __init__(self, capacity: int, single_queue: bool = False):
        self.single_queue = single_queue
        self.capacity = capacity * len(KINDS) if single_queue else capacity
        self._queues = [deque() for _ in range(1 if single_queue else 4)]
        self.enqueued = [0, 0, 0, 0]
        self.dequeued = [0, 0, 0, 0]
        self.drops = [0, 0, 0, 0]
        self.aoi_mass = [0, 0, 0, 0]   # closed-out sum of per-slot ages
        self.aoi_slots = [0, 0, 0, 0]  # closed-out message-slot count

    # ------------------------------------------------------------- structure
    def _queue_for(self, kind: int) -> deque:
        return self._queues[0] if self.single_queue else self._queues[kind]

    def length(self, kind: int) -> int:
        if self.single_queue:
            return sum(1 for m in self._queues[0] if m.kind == kind)
        return len(self._queues[kind])

    def lengths(self) -> list[int]:
        return [self.length(k) for k in KINDS]

    def total_len(self) -> int:
        return sum(len(q) for q in self._queues)

    def ages(self, kind: int, now: int) -> list[int]:
        if self.single_queue:
            return [m.aoi(now) for m in self._queues[0] if m.kind == kind]
        return [m.aoi(now) for m in self._queues[kind]]

    # ------------------------------------------------------------- mutation
    def enqueue(self, msg: Message) -> bool:
        """Append to the kind's FIFO; overflow drops the new message."""
        q = self._queue_for(msg.kind)
        if len(q) >= self.capacity:
            self.drops[msg.kind] += 1
            return False
        q.append(msg)
        self.enqueued[msg.kind] += 1
        return True

    def _close_ages(self, msg: Message, leave: int) -> None:
        # sum_{tau=gen..leave-1} (tau - gen); messages enter at their gen slot
        span = leave - msg.generated_at
        self.aoi_mass[msg.kind] += span * (span - 1) // 2
        self.aoi_slots[msg.kind] += span

    def pop_transmit(self, rho: list[int], now: int) -> tuple[list[int], Message | None]:
        """Dequeue the head of the highest-priority kind with rho=1.

        Returns (beta flags, message). In single-queue mode the pooled head is
        popped whenever any rho flag is set.
        """
        beta = [0, 0, 0, 0]
        if self.single_queue:
            if any(rho) and self._queues[0]:
                msg = self._queues[0].popleft()
                beta[msg.kind] = 1
                self.dequeued[msg.kind] += 1
                self._close_ages(msg, now)
                return beta, msg
            return beta, None
        for kind in KINDS:  # strict priority scan, HPD first
            if rho[kind] and self._queues[kind]:
                msg = self._queues[kind].popleft()
                beta[kind] = 1
                self.dequeued[kind] += 1
                self._close_ages(msg, now)
                return beta, msg
        return beta, None

    def flush_ages(self, now: int) -> None:
        """Close out still-queued messages at episode end."""
        for q in self._queues:
            for msg in q:
                self._close_ages(msg, now)
            q.clear()


def transmit_opportunity(rb_next: int, t: int, queues: PriorityQueues) -> list[int]:
    """rho_n = 1 iff this slot is the reserved slot and queue n is nonempty."""
    if t != rb_next:
        return [0, 0, 0, 0]
    if queues.single_queue:
        flag = 1 if queues.total_len() > 0 else 0
        return [flag] * 4
    return [1 if queues.length(k) > 0 else 0 for k in KINDS]


def select_transmit(queues: PriorityQueues, rho: list[int], now: int) -> tuple[list[int], Message | None]:
    """beta for the highest-priority ready kind; dequeues its head."""
    return queues.pop_transmit(rho, now)
