"""Channel gains, SINR with and without SIC, rate thresholds, time and energy.

Powers are linear mW throughout (dBm only at the config boundary). The channel
is log-distance pathloss with an optional unit-mean exponential fading factor;
distances clamp to 1 m to avoid a singular gain.
"""

from __future__ import annotations

import math

import numpy as np

from .config import SimulationConfig

MIN_DISTANCE_M = 1.0


def pathloss_gain(d: float, cfg: SimulationConfig) -> float:
    """Deterministic |h|^2 from the log-distance law."""
    d = max(d, MIN_DISTANCE_M)
    loss_db = cfg.pathloss_ref_db + 10.0 * cfg.pathloss_exponent * math.log10(d)
    return 10.0 ** (-loss_db / 10.0)


def channel_gain(d: float, rng, cfg: SimulationConfig) -> float:
    """|h|^2 for one (tx, rx, slot); multiplies in fading when enabled."""
    gain = pathloss_gain(d, cfg)
    if cfg.fading_enabled:
        gain *= rng.exponential(1.0)
    return gain


def pathloss_gain_array(d: np.ndarray, cfg: SimulationConfig) -> np.ndarray:
    d = np.maximum(d, MIN_DISTANCE_M)
    loss_db = cfg.pathloss_ref_db + 10.0 * cfg.pathloss_exponent * np.log10(d)
    return 10.0 ** (-loss_db / 10.0)


def sinr_threshold(g_bits: float, w_hz: float, slot_ms: float) -> float:
    """eta_th = 2^(R_th/W) - 1 with R_th = G over one slot in bits/s."""
    r_th = g_bits / (slot_ms / 1000.0)
    return 2.0 ** (r_th / w_hz) - 1.0


def sinr_no_collision(p_mw: float, gain: float, p_noise_mw: float) -> float:
    return p_mw * gain / p_noise_mw


def sic_decode(received: list[tuple[int, float]], p_noise_mw: float) -> dict[int, float]:
    """Per-transmitter SINR after successive cancellation.

    Signals are decoded in descending received-power order (power ties break
    by ascending tx id); each signal sees only the strictly-later entries in
    that order as interference.
    """
    if not received:
        raise ValueError("no received signals")
    ordering = sorted(received, key=lambda item: (-item[1], item[0]))
    eta = {}
    for rank, (tx, rp) in enumerate(ordering):
        not_yet_cancelled = sum(q for _, q in ordering[rank + 1:])
        eta[tx] = rp / (not_yet_cancelled + p_noise_mw)
    return eta


def sinr_collision_no_sic(received: list[tuple[int, float]], p_noise_mw: float) -> dict[int, float]:
    """Plain interference SINR: every other signal counts, no cancellation."""
    if not received:
        raise ValueError("no received signals")
    total = sum(rp for _, rp in received)
    return {tx: rp / (total - rp + p_noise_mw) for tx, rp in received}


def transmission_time_ms(g_bits: float, w_hz: float, eta: float) -> float:
    """l = G / (W log2(1 + eta)), in ms; nonpositive SINR cannot complete."""
    if eta <= 0.0:
        return math.inf
    return 1000.0 * g_bits / (w_hz * math.log2(1.0 + eta))


def transmission_energy(p_mw: float, beta: int, rc0: int, slot_ms: float) -> tuple[float, float]:
    """(energy per use, energy per reservation) in mJ; the whole slot is used."""
    eps = p_mw * beta * slot_ms / 1000.0
    return eps, eps * rc0


class TxReceptions:
    """All reception attempts of one transmission in a slot, as index arrays."""

    __slots__ = ("tx", "rx", "eta", "success", "l_ms")

    def __init__(self, tx: int, rx: np.ndarray, eta: np.ndarray,
                 success: np.ndarray, l_ms: np.ndarray):
        self.tx = tx
        self.rx = rx
        self.eta = eta
        self.success = success
        self.l_ms = l_ms

    def __repr__(self):
        return f"TxReceptions(tx={self.tx}, rx={self.rx.tolist()}, ok={self.success.tolist()})"


def resolve_slot_receptions(
    transmissions: list[tuple[int, int, float]],
    dist_sq: np.ndarray,
    fading_rows: dict[int, np.ndarray],
    cfg: SimulationConfig,
    eta_th: float,
) -> tuple[list[TxReceptions], list[tuple[int, np.ndarray, np.ndarray]]]:
    """Resolve one slot: NOMA/SIC (or plain-interference) decoding per receiver.

    transmissions: (tx id, subchannel, power mW) for every beta=1 vehicle.
    dist_sq: squared pairwise distances for the slot.
    fading_rows: per-tx fading factors toward every vehicle (ones if disabled).

    Transmitting vehicles receive nothing (strict half-duplex), and a signal
    is audible only inside the comm radius. Vectorizes the SIC chain per
    subchannel group; equivalent to sic_decode() per receiver. Also returns
    (subchannel, receiver ids, summed received power) sensing triples.
    """
    results: list[TxReceptions] = []
    sensed: list[tuple[int, np.ndarray, np.ndarray]] = []
    if not transmissions:
        return results, sensed
    n = dist_sq.shape[0]
    transmitting = np.zeros(n, dtype=bool)
    groups: dict[int, list[tuple[int, float]]] = {}
    for tx, sub, p_mw in sorted(transmissions):
        transmitting[tx] = True
        groups.setdefault(sub, []).append((tx, p_mw))
    w_sq = cfg.comm_radius ** 2
    gain_const = 10.0 ** (-cfg.pathloss_ref_db / 10.0)
    half_exp = cfg.pathloss_exponent / 2.0
    noise = cfg.noise_power
    for sub in sorted(groups):
        members = groups[sub]
        k = len(members)
        rp = np.zeros((k, n))
        audible = np.zeros((k, n), dtype=bool)
        for row, (tx, p_mw) in enumerate(members):
            gain = gain_const * np.maximum(dist_sq[tx], MIN_DISTANCE_M ** 2) ** (-half_exp)
            in_range = (dist_sq[tx] <= w_sq) & ~transmitting
            rp[row] = np.where(in_range, p_mw * gain * fading_rows[tx], 0.0)
            audible[row] = in_range
        rx_idx = np.nonzero(audible.any(axis=0))[0]
        if rx_idx.size == 0:
            continue
        rpx = rp[:, rx_idx]
        total = rpx.sum(axis=0)
        sensed.append((sub, rx_idx, total))
        if k == 1:
            eta = rpx / noise
        elif cfg.noma_enabled:
            # decode strongest-first; stable sort keeps tx-id order on ties
            order = np.argsort(-rpx, axis=0, kind="stable")
            ranked = np.take_along_axis(rpx, order, axis=0)
            weaker = total[None, :] - np.cumsum(ranked, axis=0)
            eta = np.empty_like(rpx)
            np.put_along_axis(eta, order, ranked / (weaker + noise), axis=0)
        else:
            eta = rpx / (total[None, :] - rpx + noise)
        success = (eta >= eta_th) & audible[:, rx_idx]
        for row, (tx, _) in enumerate(members):
            mask = audible[row, rx_idx]
            if not mask.any():
                continue
            et = eta[row, mask]
            ok = success[row, mask]
            l_ms = np.full(et.shape, math.inf)
            l_ms[ok] = 1000.0 * cfg.message_size_bits / (
                cfg.subchannel_bandwidth * np.log2(1.0 + et[ok]))
            results.append(TxReceptions(tx, rx_idx[mask], et, ok, l_ms))
    return results, sensed
