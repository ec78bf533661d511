"""Discrete-time scenario runner.

The clock ticks in 1 ms subframes. Each period (every beacon_period_ms
ticks) mobility advances, the channel realization refreshes, and the oldest
sensing-memory slot is recycled. Within a subframe the tick is two-phase:
first propagation (reception outcomes, sensing samples for every listener),
then per-vehicle MAC updates, so state updates never see partial data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mode4, phy
from .channel import ChannelRealization, ObstacleMap, dbm_to_mw, los_state
from .config import RunConfig
from .grid import br_from_flat
from .metrics import (HiddenNodeAccumulator, PrrAccumulator, UdTracker,
                      hidden_node_probability)
from .mobility import TraceError, load_trace, spawn_highway, step_highway
from .scenario import ScenarioSnapshot, pair_legs
from .seeding import substream


@dataclass
class SimulationResult:
    prr: PrrAccumulator
    ud: UdTracker
    hold_counts: np.ndarray
    half_duplex_violations: int
    half_duplex_pairs_checked: int
    mean_neighbors: float
    beacons_sent: int
    reselections: int
    seed: int
    warmup_s: float
    duration_s: float
    config_items: list = field(default_factory=list)
    beacon_log: list = field(default_factory=list)


class SimulationEngine:
    """One seeded scenario run."""

    def __init__(self, cfg: RunConfig, record_beacon_log: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.grid = cfg.grid_config()
        self.params = cfg.mode4_params()
        self.chan_params = cfg.channel_params()
        self.awareness_m = cfg.resolved_awareness_m()
        self.t_b = cfg.beacon_period_ms
        self.total_tti = int(round(cfg.duration_s * 1000))
        self.warmup_tti = cfg.t_sense_ms + cfg.n_max * self.t_b
        self.noise_lin = float(dbm_to_mw(self.chan_params.noise_floor_dbm))
        self.gamma_lin = float(dbm_to_mw(self.grid.sinr_min_db))
        self.ibe_lin = phy.ibe_factor(0, 1, self.chan_params.ibe_attenuation_db)
        self.record_beacon_log = record_beacon_log
        self.beacon_log = []

        self._setup_scenario()
        self._setup_state()

    # -- construction -----------------------------------------------------

    def _setup_scenario(self):
        cfg = self.cfg
        self.obstacles = ObstacleMap.from_file(cfg.obstacle_map) if cfg.obstacle_map else None
        if cfg.scenario == "highway":
            self.highway = cfg.highway_config()
            self.hw_state = spawn_highway(self.highway, substream(cfg.seed, "mobility"))
            self.n = cfg.highway_vehicles
            self.wrap = self.highway.length_m if self.highway.wrap_around else None
            self.trace_snapshots = None
            # Constant speeds make the per-pair relative displacement, and so
            # the shadowing correlation step, constant for the whole run.
            v = self.hw_state.speed
            moved = np.abs(v[:, None] - v[None, :]) * (self.t_b / 1000.0)
            self.rho_const = np.exp(-moved / self.chan_params.decorr_dist_m)
        else:
            self.trace_snapshots = load_trace(cfg.trace, self.t_b, cfg.max_trace_gap_s)
            needed = (self.total_tti + self.t_b - 1) // self.t_b
            if len(self.trace_snapshots) < needed:
                raise TraceError(
                    f"trace covers {len(self.trace_snapshots)} beacon periods, "
                    f"run needs {needed}"
                )
            ids = sorted({int(v) for snap in self.trace_snapshots for v in snap.ids})
            self.trace_index = {vid: k for k, vid in enumerate(ids)}
            self.trace_ids = np.asarray(ids, dtype=int)
            self.n = len(ids)
            self.wrap = None
            self.highway = None

    def _setup_state(self):
        cfg, n = self.cfg, self.n
        r = self.grid.br_count
        self.next_tx = np.full(n, -1, dtype=np.int64)
        self.select_at = np.full(n, -1, dtype=np.int64)
        self.cur_offset = np.full(n, -1, dtype=np.int32)
        self.cur_slot = np.zeros(n, dtype=np.int32)
        self.seq = np.full(n, -1, dtype=np.int64)
        self.held = np.zeros(n, dtype=np.int64)
        self.present = np.ones(n, dtype=bool)
        self.positions = np.full((n, 2), np.nan)
        self.phase = substream(cfg.seed, "phase").integers(0, self.t_b, size=n)
        self.shadow_rng = substream(cfg.seed, "shadow")
        self.mac_rngs = [substream(cfg.seed, "mac", v) for v in range(n)]

        self.sensing = cfg.allocation == "mode4"
        self.states: list[mode4.Mode4State | None] = [None] * n
        if self.sensing:
            slots = cfg.t_sense_ms // self.t_b
            self.mem_srssi = np.zeros((n, slots, r), dtype=np.float32)
            self.mem_rsrp_sum = np.zeros((n, slots, r), dtype=np.float32)
            self.mem_rsrp_cnt = np.zeros((n, slots, r), dtype=np.int32)
            self.mem_monitored = np.ones((n, slots, self.t_b), dtype=bool)
            for v in range(n):
                self.states[v] = mode4.Mode4State(
                    self.grid, self.params, self.chan_params.noise_floor_dbm,
                    arrays=(self.mem_srssi[v], self.mem_rsrp_sum[v],
                            self.mem_rsrp_cnt[v], self.mem_monitored[v]),
                )

        self.prr = PrrAccumulator(cfg.prr_bin_width_m, self.awareness_m)
        self.ud = UdTracker(n, self.t_b / 1000.0)
        self.hold_counts: list[int] = []
        self.hd_violations = 0
        self.hd_checked = 0
        self.beacons_sent = 0
        self.neighbor_samples = 0.0
        self.neighbor_periods = 0
        self.channel: ChannelRealization | None = None
        self.dist = None
        self.neigh = None
        self.bins = None
        self.prev_positions = None

        if cfg.scenario == "highway":
            self.select_at[:] = self.phase
        else:
            # Trace vehicles schedule their first selection on arrival.
            self.present[:] = False

    # -- per-period geometry ----------------------------------------------

    def _period_positions(self, period: int):
        if self.highway is not None:
            if period == 0:
                disp = np.zeros((self.n, 2))
            else:
                disp = step_highway(self.highway, self.hw_state, self.t_b / 1000.0)
            return self.hw_state.positions, np.ones(self.n, dtype=bool), disp
        snap = self.trace_snapshots[period]
        pos = np.full((self.n, 2), np.nan)
        present = np.zeros(self.n, dtype=bool)
        rows = np.asarray([self.trace_index[int(v)] for v in snap.ids], dtype=int)
        if len(rows):
            pos[rows] = snap.positions
            present[rows] = True
        if self.prev_positions is None:
            disp = np.zeros((self.n, 2))
        else:
            disp = pos - self.prev_positions
        return pos, present, disp

    def _los_matrix(self):
        if self.obstacles is None:
            return np.ones((self.n, self.n), dtype=bool)
        los = np.ones((self.n, self.n), dtype=bool)
        idx = np.flatnonzero(self.present)
        for a_pos, a in enumerate(idx):
            for b in idx[a_pos + 1:]:
                ok = los_state(self.obstacles, self.positions[a], self.positions[b])
                los[a, b] = ok
                los[b, a] = ok
        return los

    def _begin_period(self, t: int):
        period = t // self.t_b
        pos, present, disp = self._period_positions(period)
        was_present = self.present.copy()
        self.positions, self.present = pos, present
        self.prev_positions = pos.copy()

        adx, ady = pair_legs(pos, self.wrap)
        dist = np.hypot(adx, ady)
        self.dist = dist
        if self.highway is not None:
            moved, rho = None, self.rho_const
        else:
            with np.errstate(invalid="ignore"):
                moved = np.hypot(disp[:, 0][:, None] - disp[:, 0][None, :],
                                 disp[:, 1][:, None] - disp[:, 1][None, :])
            # Presence changes decorrelate the pair's shadowing entirely.
            moved = np.where(np.isnan(moved), np.inf, moved)
            rho = None
        los = self._los_matrix()
        legs = (adx, ady) if self.obstacles is not None else None
        if self.channel is None:
            self.channel = ChannelRealization.initial(
                self.chan_params, dist, los=los, legs=legs, rng=self.shadow_rng)
        else:
            self.channel.advance(dist, moved, los=los, legs=legs,
                                 rng=self.shadow_rng, rho=rho)

        pair_present = present[:, None] & present[None, :]
        neigh = (dist <= self.awareness_m) & pair_present
        np.fill_diagonal(neigh, False)
        self.neigh = neigh
        self.bins = self.prr.bin_of(np.minimum(dist, self.awareness_m))
        self.ud.reset_pairs(~neigh)

        if t >= self.warmup_tti and present.any():
            self.neighbor_samples += neigh.sum(axis=1)[present].mean()
            self.neighbor_periods += 1

        self.period_slot = 0
        if self.sensing:
            slot = period % (self.cfg.t_sense_ms // self.t_b)
            self.mem_srssi[:, slot] = 0.0
            self.mem_rsrp_sum[:, slot] = 0.0
            self.mem_rsrp_cnt[:, slot] = 0
            self.mem_monitored[:, slot] = True
            self.period_slot = slot

        # Trace churn: departures drop their allocation, arrivals schedule a
        # first selection within this period.
        if self.trace_snapshots is not None:
            gone = was_present & ~present
            for v in np.flatnonzero(gone):
                self.next_tx[v] = -1
                self.select_at[v] = -1
                self.cur_offset[v] = -1
                self.held[v] = 0
                if self.states[v] is not None:
                    self.states[v].current = None
            fresh = present & ~was_present
            for v in np.flatnonzero(fresh):
                if self.next_tx[v] < 0 and self.select_at[v] < 0:
                    self.select_at[v] = t + int(self.phase[v])

    # -- selection and transmission ----------------------------------------

    def _delta_to_offset(self, offset: int, t: int) -> int:
        delta = (offset - t) % self.t_b
        return delta if delta > 0 else self.t_b

    def _select(self, v: int, t: int):
        rng = self.mac_rngs[v]
        if self.sensing:
            state = self.states[v]
            cands = mode4.candidate_set(state, self.params, self.grid, t)
            br, counter = mode4.mac_select(cands, self.params, rng)
            state.current = br
            state.counter = counter
        else:
            br = br_from_flat(self.grid, int(rng.integers(self.grid.br_count)))
        self.cur_offset[v] = br.subframe
        self.cur_slot[v] = br.freq_slot
        self.next_tx[v] = t + self._delta_to_offset(br.subframe, t)

    def _mac_after_tx(self, v: int, t: int):
        if not self.sensing:
            self._select(v, t)  # random allocation redraws every period
            return
        state = self.states[v]
        action = mode4.on_beacon_period_end(state, self.params, self.mac_rngs[v])
        if action == "keep":
            self.next_tx[v] = t + self.t_b
        else:
            self.hold_counts.append(int(self.held[v]))
            self.held[v] = 0
            self._select(v, t)

    def _tick(self, t: int):
        if t % self.t_b == 0:
            self._begin_period(t)
        subframe = t % self.t_b

        for v in np.flatnonzero(self.select_at == t):
            self.select_at[v] = -1
            if self.present[v]:
                self._select(int(v), t)

        txs = np.flatnonzero(self.next_tx == t)
        slot = self.period_slot
        base = subframe * self.grid.brs_per_tti

        if len(txs) == 0:
            if self.sensing:
                obs = self.present
                for f in range(self.grid.brs_per_tti):
                    self.mem_srssi[obs, slot, base + f] = self.noise_lin
            return

        tx_mask = np.zeros(self.n, dtype=bool)
        tx_mask[txs] = True
        tx_slots = self.cur_slot[txs]
        power_rows = self.channel.rx_power_lin()[txs]
        recv_mask = self.present & ~tx_mask
        slot_sums = phy.slot_power_sums(power_rows, tx_slots, self.grid.brs_per_tti)
        sinr_lin, decoded = phy.subframe_reception(
            power_rows, tx_slots, self.noise_lin, self.gamma_lin,
            self.ibe_lin, recv_mask, slot_sums=slot_sums)

        # Half-duplex audit on the outcome log: decoded entries whose
        # destination transmits in this subframe are protocol violations.
        self.hd_checked += int(len(txs) * (len(txs) - 1))
        self.hd_violations += int(decoded[:, tx_mask].sum())

        if self.sensing:
            srssi = phy.subframe_srssi(power_rows, tx_slots, self.noise_lin,
                                       self.ibe_lin, self.grid.brs_per_tti,
                                       slot_sums=slot_sums)
            obs = recv_mask
            for f in range(self.grid.brs_per_tti):
                self.mem_srssi[obs, slot, base + f] = srssi[f, obs]
            for k, v in enumerate(txs):
                dec = decoded[k]
                if dec.any():
                    r = base + int(tx_slots[k])
                    self.mem_rsrp_sum[dec, slot, r] += power_rows[k, dec]
                    self.mem_rsrp_cnt[dec, slot, r] += 1
            self.mem_monitored[txs, slot, subframe] = False

        self.seq[txs] += 1
        self.held[txs] += 1
        self.beacons_sent += len(txs)

        if t >= self.warmup_tti:
            for k, v in enumerate(txs):
                nm = self.neigh[v]
                dec = decoded[k] & nm
                self.prr.record_arrays(self.bins[v][nm], dec[nm])
                dst = np.flatnonzero(dec)
                if len(dst):
                    self.ud.record(int(v), dst, self.seq[v] * self.t_b / 1000.0)
                if self.record_beacon_log:
                    self.beacon_log.append((int(v), int(nm.sum()), int(dec.sum())))

        for v in txs:
            self._mac_after_tx(int(v), t)

    def run(self) -> SimulationResult:
        for t in range(self.total_tti):
            self._tick(t)
        mean_neigh = (self.neighbor_samples / self.neighbor_periods
                      if self.neighbor_periods else float("nan"))
        return SimulationResult(
            prr=self.prr,
            ud=self.ud,
            hold_counts=np.asarray(self.hold_counts, dtype=np.int64),
            half_duplex_violations=self.hd_violations,
            half_duplex_pairs_checked=self.hd_checked,
            mean_neighbors=float(mean_neigh),
            beacons_sent=self.beacons_sent,
            reselections=len(self.hold_counts),
            seed=self.cfg.seed,
            warmup_s=self.warmup_tti / 1000.0,
            duration_s=self.cfg.duration_s,
            config_items=self.cfg.resolved_items(),
            beacon_log=self.beacon_log,
        )


def run_scenario(cfg: RunConfig, record_beacon_log: bool = False) -> SimulationResult:
    return SimulationEngine(cfg, record_beacon_log=record_beacon_log).run()


def run_hidden_node(cfg: RunConfig, sample_every_periods: int = 1):
    """Mobility + channel only: hidden-node statistics over sampled instants."""
    cfg.validate()
    engine = SimulationEngine(cfg)  # reuse geometry/channel plumbing
    acc = HiddenNodeAccumulator(bin_width_m=cfg.prr_bin_width_m,
                                max_range_m=engine.awareness_m)
    n_periods = engine.total_tti // engine.t_b
    for period in range(n_periods):
        t = period * engine.t_b
        engine._begin_period(t)
        if period % sample_every_periods:
            continue
        idx = np.flatnonzero(engine.present)
        if len(idx) < 2:
            continue
        snap = ScenarioSnapshot(
            tti=t,
            ids=idx,
            positions=engine.positions[idx],
            wrap_length_m=engine.wrap,
        )
        sub = ChannelRealization(
            engine.chan_params,
            engine.channel.pathloss_db[np.ix_(idx, idx)],
            engine.channel.shadow_db[np.ix_(idx, idx)],
            engine.channel.los[np.ix_(idx, idx)],
        )
        acc.add(hidden_node_probability(
            snap, sub, engine.grid.sinr_min_db,
            bin_width_m=cfg.prr_bin_width_m, max_range_m=engine.awareness_m))
    return acc
