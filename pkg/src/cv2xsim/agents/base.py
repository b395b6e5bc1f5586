"""Agent interface and the stateless baseline policies.

An agent is queried once per vehicle reselection with the normalized state
vector and must return (RRI in ms, transmit power in mW); the engine holds the
choice for the whole reservation lifetime. Learning agents additionally get
`finish` callbacks carrying the epoch reward and the follow-up state.
"""

from __future__ import annotations

import numpy as np

from ..config import SimulationConfig


class Agent:
    def act(self, state: np.ndarray, vehicle: int) -> tuple[int, float]:
        raise NotImplementedError

    def finish(self, vehicle: int, reward: float, next_state: np.ndarray,
               terminal: bool) -> None:
        """Epoch closed for `vehicle`; terminal marks episode truncation."""

    def end_episode(self) -> None:
        """Hook invoked between episodes (exploration schedules etc.)."""


class RandomPolicy(Agent):
    """Uniform RRI over the allowed set, uniform power over [0, P_max]."""

    def __init__(self, cfg: SimulationConfig, rng: np.random.Generator):
        self.choices = cfg.rri_choices
        self.p_max_mw = cfg.p_max_mw
        self.rng = rng

    def act(self, state, vehicle):
        rri = int(self.choices[self.rng.integers(len(self.choices))])
        power = float(self.rng.uniform(0.0, self.p_max_mw))
        return rri, power


class FixedRriPolicy(Agent):
    """Random power but one forced RRI; used by the fixed-RRI sweeps."""

    def __init__(self, cfg: SimulationConfig, rng: np.random.Generator, rri: int):
        self.rri = int(rri)
        self.p_max_mw = cfg.p_max_mw
        self.rng = rng

    def act(self, state, vehicle):
        return self.rri, float(self.rng.uniform(0.0, self.p_max_mw))


class FixedAllocationPolicy(Agent):
    """Static per-vehicle (RRI, power) table, e.g. one GA individual."""

    def __init__(self, rri_by_vehicle, power_by_vehicle):
        self.rri_by_vehicle = [int(g) for g in rri_by_vehicle]
        self.power_by_vehicle = [float(p) for p in power_by_vehicle]

    def act(self, state, vehicle):
        return self.rri_by_vehicle[vehicle], self.power_by_vehicle[vehicle]


class ZeroPowerPolicy(Agent):
    """Diagnostic: always transmits at zero power with a fixed RRI."""

    def __init__(self, rri: int = 100):
        self.rri = rri

    def act(self, state, vehicle):
        return self.rri, 0.0
