"""Scenario configuration: every named constant, validation, and the flat key=value file format.

All times are integer milliseconds (one slot = one LTE subframe = 1 ms), all
distances meters, powers are dBm at the config boundary and linear mW inside
the simulator, bandwidth Hz, message size bits.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass


class ConfigError(ValueError):
    """Scenario file failed to parse or a field violates its constraints."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} [{', '.join(where)}]" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class SimulationConfig:
    # scenario geometry
    n_vehicles: int = 20            # N_v
    highway_length: float = 500.0   # D, meters (x wraps on a torus)
    comm_radius: float = 150.0      # w, meters, inclusive
    lanes: int = 4                  # F, two per direction
    lane_width: float = 4.0         # d_y, meters
    v_max: float = 80.0             # km/h
    v_min: float = 60.0             # km/h, derived consistency check only

    # traffic
    queue_capacity: int = 10        # L, per queue
    cam_period: int = 100           # T_c, ms
    lambda_arrival: float = 1e-4    # per-slot rate shared by HPD/DENM/MHD
    k_h: int = 8                    # HPD retransmission count
    k_d: int = 5                    # DENM retransmission count
    t_h: int = 100                  # HPD retransmission interval, ms
    t_d: int = 500                  # DENM retransmission interval, ms
    single_queue: bool = False      # pool all kinds into one FIFO (comparison mode)

    # MAC / SPS
    rri_choices: tuple[int, ...] = (20, 50, 100)  # ms
    p_rk: float = 0.8               # keep-resource probability
    t_w_max: int = 3                # selection buffer T_w ~ U[0, t_w_max] slots
    rc_base_lo: int = 5             # RC draw bounds at RRI=100 ms
    rc_base_hi: int = 15
    rsrp_threshold_dbm: float = -86.0  # exclusion threshold, relaxed +3 dB when starved

    # PHY
    p_max: float = 23.0             # dBm
    slot_ms: int = 1                # subframe length
    total_bandwidth: float = 10e6   # Hz
    n_subchannels: int = 5
    message_size_bits: int = 2400   # G
    noise_power: float = 1e-10      # p_n^2, mW
    pathloss_exponent: float = 3.0
    pathloss_ref_db: float = 48.0   # loss at 1 m
    fading_enabled: bool = False    # unit-mean exponential (Rayleigh-power) fading
    noma_enabled: bool = True       # SIC at the receiver; off = plain interference SINR

    # reward / engine
    omega1: float = 0.6             # energy weight
    omega2: float = 0.4             # AoI weight (default 1 - omega1)
    phi_cap_ms: float = 1000.0      # receiver-AoI normalization cap in the reward
    rri_fixed: int = 0              # 0 = agent chooses; otherwise force this RRI
    transmit_disabled: bool = False # diagnostics: force beta=0 everywhere

    # learning
    gamma_discount: float = 0.99
    lr_q: float = 5e-4
    lr_x: float = 1e-4
    tau_q: float = 0.01
    tau_x: float = 0.01
    replay_size: int = 2000         # M
    batch_size: int = 128           # B
    episodes: int = 500             # EP
    slots_per_episode: int = 10000  # T
    seed: int = 42

    # ------------------------------------------------------------------ derived
    @property
    def subchannel_bandwidth(self) -> float:
        """Per-resource bandwidth W in Hz."""
        return self.total_bandwidth / self.n_subchannels

    @property
    def p_max_mw(self) -> float:
        return 10.0 ** (self.p_max / 10.0)

    @property
    def rsrp_threshold_mw(self) -> float:
        return 10.0 ** (self.rsrp_threshold_dbm / 10.0)

    @property
    def rc_max(self) -> int:
        """Largest possible RC0 over all allowed RRIs (used for normalization)."""
        return self.rc_base_hi * (100 // min(self.rri_choices))

    def csr(self, rri: int) -> int:
        """Total resources in a selection window of the given RRI."""
        return rri * self.n_subchannels

    def validate(self) -> "SimulationConfig":
        def bad(key, msg):
            raise ConfigError(msg, key=key)

        if self.n_vehicles < 1:
            bad("n_vehicles", "must be >= 1")
        if self.highway_length <= 0:
            bad("highway_length", "must be positive")
        if self.comm_radius <= 0:
            bad("comm_radius", "must be positive")
        if self.lanes < 2 or self.lanes % 2 != 0:
            bad("lanes", "must be an even count >= 2 (two directions)")
        if self.lane_width < 0:
            bad("lane_width", "must be nonnegative")
        if self.v_max - 20.0 * (self.lanes / 2 - 1) < 0:
            bad("v_max", "outermost lane speed would be negative")
        expected_v_min = self.v_max - 20.0 * (self.lanes / 2 - 1)
        if abs(self.v_min - expected_v_min) > 1e-9:
            bad("v_min", f"inconsistent with lane speeds; expected {expected_v_min}")
        if self.queue_capacity < 1:
            bad("queue_capacity", "must be >= 1")
        if self.cam_period <= 0:
            bad("cam_period", "must be positive")
        if self.lambda_arrival < 0:
            bad("lambda_arrival", "must be nonnegative")
        for key in ("k_h", "k_d"):
            if getattr(self, key) < 0:
                bad(key, "must be nonnegative")
        for key in ("t_h", "t_d"):
            if getattr(self, key) <= 0:
                bad(key, "must be positive")
        if not self.rri_choices:
            bad("rri_choices", "must be nonempty")
        for g in self.rri_choices:
            if g <= 0 or g % self.slot_ms != 0:
                bad("rri_choices", f"RRI {g} must be a positive multiple of slot_ms")
        if not 0.0 <= self.p_rk <= 1.0:
            bad("p_rk", "must lie in [0, 1]")
        if self.t_w_max < 0:
            bad("t_w_max", "must be nonnegative")
        if not 1 <= self.rc_base_lo <= self.rc_base_hi:
            bad("rc_base_lo", "need 1 <= rc_base_lo <= rc_base_hi")
        if self.slot_ms < 1:
            bad("slot_ms", "must be >= 1")
        if self.n_subchannels < 1:
            bad("n_subchannels", "must be >= 1")
        if self.total_bandwidth / self.n_subchannels <= 0:
            bad("total_bandwidth", "per-resource bandwidth must be positive")
        if self.message_size_bits <= 0:
            bad("message_size_bits", "must be positive")
        if self.noise_power <= 0:
            bad("noise_power", "must be positive")
        if self.omega1 < 0 or self.omega2 < 0:
            bad("omega1", "reward weights must be nonnegative")
        if self.phi_cap_ms <= 0:
            bad("phi_cap_ms", "must be positive")
        if self.rri_fixed != 0 and self.rri_fixed not in self.rri_choices:
            bad("rri_fixed", f"must be 0 or one of {self.rri_choices}")
        if not 0.0 <= self.gamma_discount <= 1.0:
            bad("gamma_discount", "must lie in [0, 1]")
        for key in ("lr_q", "lr_x"):
            if getattr(self, key) <= 0:
                bad(key, "must be positive")
        for key in ("tau_q", "tau_x"):
            if not 0.0 < getattr(self, key) <= 1.0:
                bad(key, "must lie in (0, 1]")
        if self.batch_size < 1:
            bad("batch_size", "must be >= 1")
        if self.replay_size < self.batch_size:
            bad("replay_size", "must be >= batch_size")
        if self.episodes < 1:
            bad("episodes", "must be >= 1")
        if self.slots_per_episode < 1:
            bad("slots_per_episode", "must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            bad("seed", "must fit in 64 bits")
        return self


def default_config() -> SimulationConfig:
    """Baseline scenario: every documented default, already validated."""
    return SimulationConfig().validate()


_FIELDS = {f.name: f for f in dataclasses.fields(SimulationConfig)}


def _parse_value(key: str, raw: str, line: int):
    f = _FIELDS[key]
    raw = raw.strip()
    try:
        if f.type in ("int", int):
            return int(raw)
        if f.type in ("float", float):
            return float(raw)
        if f.type in ("bool", bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        # tuple[int, ...] (rri_choices)
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {raw!r}: {exc}", key=key, line=line) from None


def load_config(path: str) -> SimulationConfig:
    """Load a scenario from a flat key=value file; unknown keys are errors.

    Unspecified keys take the documented defaults. The SIM_SEED environment
    variable, when set, overrides the seed (and only the seed).
    """
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("expected key=value", line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _FIELDS:
                raise ConfigError(f"unknown key {key!r}", key=key, line=lineno)
            overrides[key] = _parse_value(key, value, lineno)
    env_seed = os.environ.get("SIM_SEED")
    if env_seed is not None:
        try:
            overrides["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"SIM_SEED is not an integer: {env_seed!r}", key="seed") from None
    cfg = dataclasses.replace(SimulationConfig(), **overrides)
    return cfg.validate()


def config_to_text(cfg: SimulationConfig) -> str:
    """Render a config in the scenario file format; round-trips exactly."""
    lines = []
    for f in dataclasses.fields(SimulationConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            rendered = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{f.name}={rendered}")
    return "\n".join(lines) + "\n"


def save_config(cfg: SimulationConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))


def config_to_dict(cfg: SimulationConfig) -> dict:
    return dataclasses.asdict(cfg)
