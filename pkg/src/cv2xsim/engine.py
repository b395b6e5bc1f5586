"""Per-slot simulation loop, receiver-AoI matrix, epochs, and episode metrics.

Slot pipeline, in this fixed order:
  1. mobility            - advance positions, refresh the pairwise distances
  2. arrivals            - due retransmission copies, CAM, Poisson triggers
  3. SPS bookkeeping     - resolve pending reselections (agent decisions here)
  4. transmit selection  - priority scan at reserved slots, RC/m/RB updates
  5. PHY resolution      - NOMA/SIC decoding, sensing energy accumulation
  6. AoI updates         - receiver matrix +1 slot, successful receptions land
  7. metrics             - sensing decay and per-slot accounting

A decision epoch is one reservation lifetime: the agent picks (RRI, power) at
a reselection instant and the choice holds until the next one. The receiver
AoI matrix covers ordered pairs currently within the comm radius; an entry
resets to zero when a pair (re)enters range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimulationConfig
from .mobility import KMH_TO_M_PER_MS, make_fleet, pair_distances_sq
from .traffic import (CAM, DENM, HPD, KINDS, MHD, Message, PriorityQueues,
                      arrival_probability, schedule_retransmissions,
                      select_transmit, transmit_opportunity)
from .sps import build_candidate_list, draw_rc, rb_keep, rb_reselect
from .phy import pathloss_gain, resolve_slot_receptions, sinr_threshold

SENSING_PERIOD = 100      # mod-100 slot buckets cover every allowed RRI
TRIGGERED_KINDS = (HPD, DENM, MHD)


@dataclass
class EpochRecord:
    vehicle: int
    start_slot: int
    end_slot: int
    rri: int
    power_mw: float
    rc0: int
    uses: int
    energy_mj: float
    receiver_aoi_ms: float
    rn: float
    reward: float


@dataclass
class EpisodeMetrics:
    n_vehicles: int
    slots: int
    e_bar_mj: float                 # mean transmit energy per vehicle-slot
    phi_bar_ms: float               # receiver AoI, 1/(T*Nv*(Nv-1)) normalization
    mean_reward: float
    collisions: int                 # resource instances carrying >= 2 transmissions
    drops: list[int]                # per kind
    queue_aoi_ms: list[float]       # per kind, message-slot weighted
    energy_total_mj: float
    transmissions: int
    successes: int
    reception_attempts: int
    reselect_events: int
    action_violations: int
    degenerate: bool
    epochs: list[EpochRecord] = field(default_factory=list)


def observe_state(n_receivers: int, mean_distance: float, rn: float, rc0: int,
                  cfg: SimulationConfig) -> np.ndarray:
    """Min-max normalized state vector [N, d, Rn, RC0]."""
    return np.array([
        n_receivers / cfg.n_vehicles,
        mean_distance / cfg.comm_radius,
        rn,
        rc0 / cfg.rc_max,
    ])


def epoch_reward(energy_mj: float, receiver_aoi_ms: float, cfg: SimulationConfig) -> float:
    """r = -(w1*E_norm + w2*Phi_norm); both terms normalized into [0, 1]."""
    e_norm = energy_mj / (cfg.p_max_mw * cfg.slot_ms / 1000.0 * cfg.rc_max)
    phi_norm = min(receiver_aoi_ms, cfg.phi_cap_ms) / cfg.phi_cap_ms
    return -(cfg.omega1 * e_norm + cfg.omega2 * phi_norm)


def update_receiver_aoi(phi_ms: float, success: bool, head_age_ms: float = 0.0,
                        l_ms: float = 0.0, slot_ms: float = 1.0) -> float:
    """One entry of the receiver matrix: lands at head age + transmission time
    on a successful reception, otherwise grows by one slot."""
    return head_age_ms + l_ms if success else phi_ms + slot_ms


class Simulator:
    """One episode of the C-V2X system; single-threaded and deterministic."""

    def __init__(self, cfg: SimulationConfig, agent, rng: np.random.Generator,
                 record_epochs: bool = True):
        self.cfg = cfg
        self.agent = agent
        self.rng = rng
        self.record_epochs = record_epochs
        n = cfg.n_vehicles

        fleet = make_fleet(cfg, rng)
        self.x = np.array([p.x for p in fleet])
        self.y = np.array([p.y for p in fleet])
        self.step_dx = np.array([p.direction * p.speed * KMH_TO_M_PER_MS * cfg.slot_ms
                                 for p in fleet])
        self.dy_sq = (self.y[:, None] - self.y[None, :]) ** 2  # lanes never change
        self.dist_sq = pair_distances_sq(self.x, self.dy_sq, cfg.highway_length)
        self.w_sq = cfg.comm_radius ** 2

        self.queues = [PriorityQueues(cfg.queue_capacity, cfg.single_queue) for _ in range(n)]
        self.retrans: dict[int, list[tuple[int, int]]] = {}
        self.next_arrival: dict[int, list[tuple[int, int]]] = {}
        self.arrival_p = arrival_probability(cfg.lambda_arrival)
        for v in range(n):
            for kind in TRIGGERED_KINDS:
                self._draw_next_arrival(v, kind, -1)

        # reservation state; rb_next = -1 means no scheduled use
        self.rri_v = np.zeros(n, dtype=np.int64)
        self.rb_next = np.full(n, -1, dtype=np.int64)
        self.subch = np.zeros(n, dtype=np.int64)
        self.rc = np.zeros(n, dtype=np.int64)
        self.rc0 = np.zeros(n, dtype=np.int64)
        self.m = np.zeros(n, dtype=np.int64)
        self.power = np.zeros(n)
        self.t_rk = np.zeros(n, dtype=np.int64)
        self.needs_selection = set(range(n))   # everyone starts unreserved
        self.waiting = np.ones(n, dtype=bool)  # waiting for a first message (t_a form)

        # decision-epoch accumulators
        self.ep_start = np.full(n, -1, dtype=np.int64)
        self.ep_energy = np.zeros(n)
        self.ep_uses = np.zeros(n, dtype=np.int64)
        self.ep_phi_sum = np.zeros(n)
        self.ep_rxslots = np.zeros(n, dtype=np.int64)
        self.ep_succ = np.zeros(n, dtype=np.int64)
        self.ep_rx = np.zeros(n, dtype=np.int64)
        self.prev_rn = np.zeros(n)

        self.phi = np.zeros((n, n))
        self.active = np.zeros((n, n), dtype=bool)
        # received-energy log, one bucket per (slot mod 100, subchannel); the
        # timestamp tells whether a bucket still belongs to the last window
        self.sensed_energy = np.zeros((n, SENSING_PERIOD, cfg.n_subchannels))
        self.sensed_slot = np.full((n, SENSING_PERIOD, cfg.n_subchannels), -1, dtype=np.int64)

        self.eta_th = sinr_threshold(cfg.message_size_bits, cfg.subchannel_bandwidth,
                                     cfg.slot_ms)
        self.phi_total = 0.0
        self.energy_total = 0.0
        self.collisions = 0
        self.transmissions = 0
        self.successes = 0
        self.reception_attempts = 0
        self.reselect_events = 0
        self.action_violations = 0
        self.epoch_rewards: list[float] = []
        self.epochs: list[EpochRecord] = []

    # ------------------------------------------------------------------ traffic
    def _draw_next_arrival(self, v: int, kind: int, t: int) -> None:
        if self.arrival_p <= 0.0:
            return
        due = t + int(self.rng.geometric(self.arrival_p))
        self.next_arrival.setdefault(due, []).append((v, kind))

    def _arrivals(self, t: int) -> None:
        cfg = self.cfg
        # scheduled retransmission copies first, with fresh timestamps
        for v, kind in self.retrans.pop(t, ()):
            self.queues[v].enqueue(Message(kind, t))
        if t % cfg.cam_period == 0:
            for v in range(cfg.n_vehicles):
                self.queues[v].enqueue(Message(CAM, t))
        for v, kind in self.next_arrival.pop(t, ()):
            self.queues[v].enqueue(Message(kind, t))
            if kind in (HPD, DENM):
                for due in schedule_retransmissions(kind, t, cfg):
                    self.retrans.setdefault(due, []).append((v, kind))
            self._draw_next_arrival(v, kind, t)

    # ------------------------------------------------------------------ SPS
    def _observe(self, v: int) -> np.ndarray:
        row = self.dist_sq[v]
        in_range = row <= self.w_sq
        in_range[v] = False
        n_rx = int(in_range.sum())
        d_mean = float(np.sqrt(row[in_range]).mean()) if n_rx else 0.0
        return observe_state(n_rx, d_mean, self.prev_rn[v], int(self.rc0[v]), self.cfg)

    def _finish_epoch(self, v: int, t: int, terminal: bool) -> np.ndarray:
        """Close the open epoch; returns the state observed after closing it
        (prev_rn already reflects the finished epoch)."""
        aoi = self.ep_phi_sum[v] / self.ep_rxslots[v] if self.ep_rxslots[v] else 0.0
        rn = self.ep_succ[v] / self.ep_rx[v] if self.ep_rx[v] else 0.0
        reward = epoch_reward(self.ep_energy[v], aoi, self.cfg)
        self.epoch_rewards.append(reward)
        if self.record_epochs:
            self.epochs.append(EpochRecord(
                vehicle=v, start_slot=int(self.ep_start[v]), end_slot=t,
                rri=int(self.rri_v[v]), power_mw=float(self.power[v]),
                rc0=int(self.rc0[v]), uses=int(self.ep_uses[v]),
                energy_mj=float(self.ep_energy[v]), receiver_aoi_ms=float(aoi),
                rn=float(rn), reward=reward))
        self.prev_rn[v] = rn
        next_state = self._observe(v)
        self.agent.finish(v, reward, next_state, terminal)
        self.ep_start[v] = -1
        return next_state

    def _reset_epoch(self, v: int, t: int) -> None:
        self.ep_energy[v] = 0.0
        self.ep_uses[v] = 0
        self.ep_phi_sum[v] = 0.0
        self.ep_rxslots[v] = 0
        self.ep_succ[v] = 0
        self.ep_rx[v] = 0
        self.ep_start[v] = t

    def _clamp_action(self, rri_req: int, p_req: float) -> tuple[int, float]:
        cfg = self.cfg
        rri, power = rri_req, p_req
        if cfg.rri_fixed:
            rri = cfg.rri_fixed
        elif rri not in cfg.rri_choices:
            rri = min(cfg.rri_choices, key=lambda g: abs(g - rri_req))
            self.action_violations += 1
        if not 0.0 <= power <= cfg.p_max_mw:
            power = min(max(power, 0.0), cfg.p_max_mw)
            self.action_violations += 1
        return int(rri), float(power)

    def _pool_occupancy(self, v: int, t: int, anchor: int, rri: int,
                        t_w: int) -> tuple[np.ndarray, np.ndarray]:
        """RSRP of known recurring reservations and last-window RSSI, per cell.

        Cell (i, c) of the pool covers absolute slots congruent to
        (anchor + t_w + i) mod rri; the first use of a picked cell lands at
        anchor + t_w + i + rri per the reselect RB equation. RSSI is the
        energy heard at each cell's single most recent recurrence (cells
        recur once per window, so this is the last window's accumulation).
        """
        cfg = self.cfg
        rsrp = np.zeros((rri, cfg.n_subchannels))
        base = (anchor + t_w) % rri
        for k in range(cfg.n_vehicles):
            if k == v or self.rb_next[k] < 0:
                continue
            # deterministic pathloss only; RSRP is a long-term average
            rx_power = self.power[k] * pathloss_gain(float(np.sqrt(self.dist_sq[v, k])), cfg)
            g = int(np.gcd(rri, int(self.rri_v[k])))
            phase_k = int(self.rb_next[k]) % g
            # pool subframes whose recurrence meets the reservation (mod gcd)
            i0 = (phase_k - base) % g
            rows = np.arange(i0, rri, g)
            c = int(self.subch[k])
            np.maximum.at(rsrp, (rows, np.full(rows.size, c)), rx_power)
        residues = (base + np.arange(rri)) % rri
        last_occurrence = t - ((t - residues) % rri)
        buckets = last_occurrence % SENSING_PERIOD
        energy = self.sensed_energy[v][buckets]
        stamps = self.sensed_slot[v][buckets]
        rssi = np.where(stamps[:, :] == last_occurrence[:, None], energy, 0.0)
        return rsrp, rssi

    def _resolve_selection(self, v: int, t: int) -> None:
        cfg = self.cfg
        waiting_case = bool(self.waiting[v])
        anchor = t if waiting_case else int(self.t_rk[v])
        if self.ep_start[v] >= 0:
            state = self._finish_epoch(v, t, terminal=False)
        else:
            state = self._observe(v)
        rri_req, p_req = self.agent.act(state, v)
        rri, power = self._clamp_action(rri_req, p_req)

        keep = (not waiting_case) and self.rri_v[v] > 0 and self.rng.random() < cfg.p_rk
        if keep:
            rb = rb_keep(anchor, rri)
        else:
            t_w = int(self.rng.integers(0, cfg.t_w_max + 1))
            rsrp, rssi = self._pool_occupancy(v, t, anchor, rri, t_w)
            candidates = build_candidate_list(rsrp, rssi, cfg.rsrp_threshold_mw)
            pick = candidates[int(self.rng.integers(len(candidates)))]
            self.subch[v] = pick.subchannel
            rb = rb_reselect(anchor, t_w, pick.subframe, rri)
            self.reselect_events += 1

        self.rri_v[v] = rri
        self.power[v] = power
        self.rb_next[v] = rb
        self.rc0[v] = self.rc[v] = draw_rc(rri, self.rng, cfg)
        self.m[v] = 0
        self.t_rk[v] = anchor
        self.waiting[v] = False
        self._reset_epoch(v, t)

    def _sps_step(self, t: int) -> None:
        if not self.needs_selection:
            return
        resolved = []
        for v in sorted(self.needs_selection):
            if self.queues[v].total_len() == 0:
                self.waiting[v] = True  # defer to the first arrival (t_a form)
                continue
            self._resolve_selection(v, t)
            resolved.append(v)
        self.needs_selection.difference_update(resolved)

    # ------------------------------------------------------------------ radio
    def _transmit_step(self, t: int) -> list[tuple[int, int, float, float]]:
        cfg = self.cfg
        due = np.nonzero(self.rb_next == t)[0]
        txs = []
        for v in due:
            v = int(v)
            rho = transmit_opportunity(int(self.rb_next[v]), t, self.queues[v])
            if cfg.transmit_disabled:
                rho = [0, 0, 0, 0]
            _, msg = select_transmit(self.queues[v], rho, t)
            beta = 1 if msg is not None else 0
            if beta:
                eps = self.power[v] * cfg.slot_ms / 1000.0
                self.ep_energy[v] += eps
                self.energy_total += eps
                self.ep_uses[v] += 1
                self.transmissions += 1
                head_age_ms = (t - msg.generated_at) * cfg.slot_ms
                txs.append((v, int(self.subch[v]), float(self.power[v]), head_age_ms))
            self.rc[v] -= beta
            self.m[v] += 1
            self.rb_next[v] += self.rri_v[v]
            if self.rc[v] == 0:
                self.rb_next[v] = -1
                self.t_rk[v] = t
                self.needs_selection.add(v)
        if len(txs) > 1:
            per_sub = {}
            for _, sub, _, _ in txs:
                per_sub[sub] = per_sub.get(sub, 0) + 1
            self.collisions += sum(1 for c in per_sub.values() if c >= 2)
        return txs

    def _phy_step(self, t: int, txs):
        cfg = self.cfg
        if not txs:
            return []
        n = cfg.n_vehicles
        fading_rows = {}
        for v, _, _, _ in txs:
            fading_rows[v] = self.rng.exponential(1.0, size=n) if cfg.fading_enabled \
                else np.ones(n)
        results, sensed = resolve_slot_receptions(
            [(v, sub, p) for v, sub, p, _ in txs], self.dist_sq, fading_rows, cfg, self.eta_th)
        bucket = t % SENSING_PERIOD
        for sub, rx_idx, power in sensed:
            stale = self.sensed_slot[rx_idx, bucket, sub] != t
            if stale.any():
                self.sensed_energy[rx_idx[stale], bucket, sub] = 0.0
                self.sensed_slot[rx_idx, bucket, sub] = t
            self.sensed_energy[rx_idx, bucket, sub] += power
        for v, _, _, _ in txs:
            in_range = self.dist_sq[v] <= self.w_sq
            self.ep_rx[v] += int(in_range.sum()) - 1  # every in-range vehicle counts
        for r in results:
            self.reception_attempts += r.rx.size
            n_ok = int(r.success.sum())
            self.ep_succ[r.tx] += n_ok
            self.successes += n_ok
        return results

    def _aoi_step(self, t: int, txs, results) -> None:
        cfg = self.cfg
        self.phi += cfg.slot_ms
        in_range = self.dist_sq <= self.w_sq
        np.fill_diagonal(in_range, False)
        entering = in_range & ~self.active
        self.phi[entering] = 0.0
        self.active = in_range
        head_age = {v: age for v, _, _, age in txs}
        for r in results:
            if r.success.any():
                self.phi[r.tx, r.rx[r.success]] = head_age[r.tx] + r.l_ms[r.success]
        row_sum = (self.phi * in_range).sum(axis=1)
        self.ep_phi_sum += row_sum
        self.ep_rxslots += in_range.sum(axis=1)
        self.phi_total += float(row_sum.sum())

    # ------------------------------------------------------------------ loop
    def _step(self, t: int) -> None:
        cfg = self.cfg
        self.x = (self.x + self.step_dx) % cfg.highway_length
        self.dist_sq = pair_distances_sq(self.x, self.dy_sq, cfg.highway_length)
        self._arrivals(t)
        self._sps_step(t)
        txs = self._transmit_step(t)
        outcomes = self._phy_step(t, txs)
        self._aoi_step(t, txs, outcomes)

    def run(self, slots: int | None = None) -> EpisodeMetrics:
        cfg = self.cfg
        t_end = cfg.slots_per_episode if slots is None else slots
        for t in range(t_end):
            self._step(t)
        for v in range(cfg.n_vehicles):
            self.queues[v].flush_ages(t_end)
            if self.ep_start[v] >= 0:
                self._finish_epoch(v, t_end, terminal=True)
        n = cfg.n_vehicles
        degenerate = n < 2
        phi_bar = 0.0 if degenerate else self.phi_total / (t_end * n * (n - 1))
        drops = [sum(q.drops[k] for q in self.queues) for k in KINDS]
        queue_aoi = []
        for k in KINDS:
            mass = sum(q.aoi_mass[k] for q in self.queues)
            slots_k = sum(q.aoi_slots[k] for q in self.queues)
            queue_aoi.append(mass * cfg.slot_ms / slots_k if slots_k else 0.0)
        mean_reward = float(np.mean(self.epoch_rewards)) if self.epoch_rewards else 0.0
        return EpisodeMetrics(
            n_vehicles=n, slots=t_end,
            e_bar_mj=float(self.energy_total) / (t_end * n),
            phi_bar_ms=float(phi_bar),
            mean_reward=mean_reward,
            collisions=self.collisions,
            drops=drops,
            queue_aoi_ms=queue_aoi,
            energy_total_mj=float(self.energy_total),
            transmissions=self.transmissions,
            successes=self.successes,
            reception_attempts=self.reception_attempts,
            reselect_events=self.reselect_events,
            action_violations=self.action_violations,
            degenerate=degenerate,
            epochs=self.epochs,
        )


def run_episode(cfg: SimulationConfig, agent, seed, record_epochs: bool = True) -> EpisodeMetrics:
    """Execute one seeded episode; identical (cfg, seed, agent state) gives
    bit-identical metrics."""
    rng = np.random.default_rng(seed)
    return Simulator(cfg, agent, rng, record_epochs=record_epochs).run()
