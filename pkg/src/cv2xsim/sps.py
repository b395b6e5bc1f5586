"""Semi-persistent scheduling: candidate lists, reservation lifecycle, collision model.

A resource is one (subframe, subchannel) cell of the selection-window grid;
the pool for an RRI of G slots holds CSR = G * n_subchannels cells. Once a
cell is reserved its absolute slots recur with exact period G until the
reselection counter runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimulationConfig

CANDIDATE_FRACTION = 0.2  # best 20% of the pool by lowest sensed energy
RELAX_STEP_DB = 3.0       # threshold relaxation when too few candidates survive


@dataclass(frozen=True)
class Resource:
    subframe: int    # offset within the selection window, [0, rri)
    subchannel: int  # [0, n_subchannels)


@dataclass
class Reservation:
    rri: int          # ms
    resource: Resource
    rb_next: int      # absolute slot of the next use
    rc: int           # remaining uses
    rc0: int          # initial counter value
    m: int = 0        # uses elapsed since reselection
    t_rk: int = 0     # slot when reselection was prepared (RC hit zero)
    t_w: int = 0      # buffer slots drawn at selection
    t_s: int = 0      # offset from SW start to the selected subframe

    @property
    def phase(self) -> int:
        return self.rb_next % self.rri

    def advance(self, beta: int) -> None:
        """Account one reserved-slot use: RC drops only if a packet was sent."""
        self.rc -= beta
        self.m += 1
        self.rb_next += self.rri


def draw_rc(rri: int, rng: np.random.Generator, cfg: SimulationConfig) -> int:
    """RC0 ~ Uniform[lo, hi] scaled by 100/RRI (3GPP Mode 4 rule)."""
    scale = 100 // rri
    return int(rng.integers(cfg.rc_base_lo * scale, cfg.rc_base_hi * scale + 1))


def rb_keep(t_rk: int, rri: int, m: int = 0) -> int:
    """Next reserved slot when the current resource is kept."""
    return t_rk + rri + m * rri


def rb_reselect(t_rk: int, t_w: int, t_s: int, rri: int, m: int = 0) -> int:
    """Next reserved slot after a fresh pick (also the empty-queue t_a form)."""
    return t_rk + t_w + t_s + rri + m * rri


def reservations_overlap(phase_a: int, rri_a: int, phase_b: int, rri_b: int) -> bool:
    """Do two periodic reservations ever land on the same absolute slot?"""
    return (phase_a - phase_b) % math.gcd(rri_a, rri_b) == 0


def candidate_count(csr: int) -> int:
    return math.ceil(CANDIDATE_FRACTION * csr)


def build_candidate_list(
    recurring_rsrp_mw: np.ndarray,
    sensed_rssi: np.ndarray,
    rsrp_threshold_mw: float,
) -> list[Resource]:
    """The 20%-lowest-RSSI candidate list L_C over a (rri, n_subchannels) pool.

    A cell is excluded from L_A when another vehicle's reservation is known to
    recur there and arrives above the RSRP threshold; if fewer than 20% of the
    pool survives, the threshold is relaxed by +3 dB and the exclusion retried.
    Ties in sensed energy break by (subframe, subchannel) order.
    """
    rri, n_sub = recurring_rsrp_mw.shape
    need = candidate_count(rri * n_sub)
    threshold = rsrp_threshold_mw
    while True:
        allowed = recurring_rsrp_mw <= threshold
        if int(allowed.sum()) >= need:
            break
        threshold *= 10.0 ** (RELAX_STEP_DB / 10.0)
    subframes, subchannels = np.nonzero(allowed)
    energy = sensed_rssi[subframes, subchannels]
    order = np.lexsort((subchannels, subframes, energy))[:need]
    return [Resource(int(subframes[i]), int(subchannels[i])) for i in order]


class CollisionDomainError(ValueError):
    pass


def collision_probability(pi: float, rri: int, csr: int, n_v: int, p_rk: float) -> float:
    """Analytic probability that a fresh selection collides with another vehicle.

    P_col ~= 1 - [1 - [1 - prod_{i=0}^{G-1}(1 - pi/(1 - pi*i))] *
                         (1 - P_rk)/(CSR - N_v + 1)]^(N_v - 1)
    """
    if csr < n_v:
        raise CollisionDomainError(f"csr={csr} must be >= n_v={n_v}")
    if pi < 0 or pi * (rri - 1) >= 1:
        raise CollisionDomainError(f"pi={pi} leaves the product terms undefined for rri={rri}")
    prod = 1.0
    for i in range(rri):
        prod *= 1.0 - pi / (1.0 - pi * i)
    inner = (1.0 - prod) * (1.0 - p_rk) / (csr - n_v + 1)
    return 1.0 - (1.0 - inner) ** (n_v - 1)


def monte_carlo_collision(
    pi: float,
    rri: int,
    csr: int,
    n_v: int,
    p_rk: float,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Draw-based estimate of the same collision event, simulated step by step.

    For each trial the tagged vehicle selects a resource; each other vehicle
    becomes ready inside the window with per-slot hazard pi/(1 - pi*i), then
    reselects with probability 1 - P_rk and picks uniformly among the
    CSR - N_v + 1 resources it considers free. Collision = any other vehicle
    picks the tagged vehicle's resource.
    """
    if csr < n_v:
        raise CollisionDomainError(f"csr={csr} must be >= n_v={n_v}")
    if n_v <= 1:
        return 0.0
    others = trials * (n_v - 1)
    ready = np.zeros(others, dtype=bool)
    undecided = np.ones(others, dtype=bool)
    for i in range(rri):
        hazard = pi / (1.0 - pi * i)
        idx = np.nonzero(undecided)[0]
        if idx.size == 0:
            break
        fire = rng.random(idx.size) < hazard
        ready[idx[fire]] = True
        undecided[idx[fire]] = False
    reselects = ready & (rng.random(others) < (1.0 - p_rk))
    picks = rng.integers(0, csr - n_v + 1, size=others)
    hits = (reselects & (picks == 0)).reshape(trials, n_v - 1)
    return float(hits.any(axis=1).mean())


class InsufficientHistoryError(ValueError):
    pass


def estimate_pi(reselect_events: int, n_vehicles: int, slots: int, min_slots: int = 10_000) -> float:
    """Empirical readiness probability: fraction of vehicle-slots where a
    vehicle had a nonempty queue, RC=0, and took the reselect branch."""
    if slots < min_slots:
        raise InsufficientHistoryError(f"need >= {min_slots} simulated slots, got {slots}")
    return reselect_events / (n_vehicles * slots)
