"""Distributed sidelink resource selection (sensing + semi-persistent MAC).

Selection walks the standardized pipeline: restrict to the [t1, t2] window,
drop unmonitored BRs, drop BRs whose decoded control messages mark them
reserved with average RSRP above the power threshold (escalating the
threshold 3 dB at a time until enough survive), rank the rest by average
S-RSSI and hand the lowest n_R to the MAC, which picks uniformly and holds
the choice for a counter drawn in [n_min, n_max], rolling a keep/reselect
die at every expiry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import dbm_to_mw
from .grid import BrIndex, GridConfig, br_from_flat, selection_count


class Mode4ParamError(ValueError):
    pass


class Mode4ProtocolError(RuntimeError):
    pass


def power_threshold(a: int, b: int) -> float:
    """Occupancy threshold in dBm from transmitter priority a, receiver priority b."""
    if not (isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer))):
        raise Mode4ParamError("priorities must be integers")
    if not (0 <= a <= 7 and 0 <= b <= 7):
        raise Mode4ParamError("priorities must lie in [0, 7]")
    return float(-128 + 2 * (a * 8 + b))


@dataclass(frozen=True)
class Mode4Params:
    """Algorithm knobs with the standard defaults."""

    t_sense_ms: int = 1000
    p_th_dbm: float = -110.0
    r_sel: float = 0.2
    t1: int = 1
    t2: int = 100
    n_min: int = 5
    n_max: int = 15
    p_keep: float = 0.4
    nr_basis: str = "total"
    nonstandard: bool = False

    def __post_init__(self):
        if self.t_sense_ms <= 0:
            raise Mode4ParamError("t_sense_ms must be positive")
        if not (1 <= self.t1 <= 4):
            raise Mode4ParamError("t1 must lie in [1, 4]")
        if not (20 <= self.t2 <= 100):
            raise Mode4ParamError("t2 must lie in [20, 100]")
        if self.t1 >= self.t2:
            raise Mode4ParamError("t1 must be < t2")
        if not (0.0 < self.r_sel <= 1.0):
            raise Mode4ParamError("r_sel must be in (0, 1]")
        if not (0 < self.n_min <= self.n_max):
            raise Mode4ParamError("need 0 < n_min <= n_max")
        if not (0.0 <= self.p_keep < 1.0):
            raise Mode4ParamError("p_keep must lie in [0, 1)")
        if self.p_keep > 0.8 and not self.nonstandard:
            raise Mode4ParamError("p_keep above 0.8 requires the nonstandard flag")
        if self.nr_basis not in ("total", "window"):
            raise Mode4ParamError("nr_basis must be 'total' or 'window'")


class Mode4State:
    """Per-vehicle sensing memory and SPS allocation state.

    The memory is a ring of `t_sense / beacon_period` period slots; each slot
    holds per-BR S-RSSI and RSRP samples in linear mW (0 meaning no sample)
    plus per-subframe monitored flags. Slots older than the ring depth are
    overwritten, which is exactly the discard-after-t_sense rule.
    """

    def __init__(self, grid: GridConfig, params: Mode4Params,
                 noise_floor_dbm: float, arrays=None):
        if params.t_sense_ms % grid.beacon_period_ms != 0:
            raise Mode4ParamError("t_sense_ms must be a multiple of the beacon period")
        self.n_slots = params.t_sense_ms // grid.beacon_period_ms
        r = grid.br_count
        if arrays is None:
            self.s_rssi = np.zeros((self.n_slots, r), dtype=np.float32)
            self.rsrp_sum = np.zeros((self.n_slots, r), dtype=np.float32)
            self.rsrp_cnt = np.zeros((self.n_slots, r), dtype=np.int32)
            self.monitored = np.ones((self.n_slots, grid.beacon_period_ms), dtype=bool)
        else:
            self.s_rssi, self.rsrp_sum, self.rsrp_cnt, self.monitored = arrays
        self.noise_floor_lin = float(dbm_to_mw(noise_floor_dbm))
        self.current: BrIndex | None = None
        self.counter: int = 0

    def begin_period(self, slot: int):
        """Recycle one ring slot for the period about to be sensed."""
        self.s_rssi[slot] = 0.0
        self.rsrp_sum[slot] = 0.0
        self.rsrp_cnt[slot] = 0
        self.monitored[slot] = True

    def record_srssi(self, slot: int, flat_br: int, value_lin: float):
        self.s_rssi[slot, flat_br] = value_lin

    def record_rsrp(self, slot: int, flat_br: int, value_lin: float):
        self.rsrp_sum[slot, flat_br] += value_lin
        self.rsrp_cnt[slot, flat_br] += 1

    def record_transmission(self, slot: int, subframe: int):
        self.monitored[slot, subframe] = False

    # Aggregates over the whole ring (= the sensing window).

    def monitored_offsets(self) -> np.ndarray:
        return self.monitored.all(axis=0)

    def avg_srssi_lin(self) -> np.ndarray:
        total = self.s_rssi.sum(axis=0, dtype=np.float64)
        count = np.count_nonzero(self.s_rssi, axis=0)
        return np.where(count > 0, total / np.maximum(count, 1), self.noise_floor_lin)

    def avg_rsrp_lin(self) -> np.ndarray:
        count = self.rsrp_cnt.sum(axis=0)
        total = self.rsrp_sum.sum(axis=0, dtype=np.float64)
        return np.where(count > 0, total / np.maximum(count, 1), 0.0)

    def sci_seen(self) -> np.ndarray:
        return self.rsrp_cnt.sum(axis=0) > 0


def candidate_set(state: Mode4State, params: Mode4Params, grid: GridConfig,
                  now_tti: int) -> list[BrIndex]:
    """Ordered candidate list for a selection performed at `now_tti`.

    Escalating the power threshold only relaxes occupancy; if the monitored
    in-window BRs themselves number fewer than n_R, all of them are returned.
    """
    t_b = grid.beacon_period_ms
    offsets = (now_tti + np.arange(params.t1, params.t2 + 1)) % t_b
    in_window = np.zeros(t_b, dtype=bool)
    in_window[offsets] = True
    usable = in_window & state.monitored_offsets()
    cand = np.repeat(usable, grid.brs_per_tti)
    if params.nr_basis == "window":
        basis = int(in_window.sum()) * grid.brs_per_tti
    else:
        basis = grid.br_count
    n_r = selection_count(params.r_sel, basis)
    if not cand.any():
        return []

    sci = state.sci_seen()
    avg_rsrp = state.avg_rsrp_lin()
    p_th_dbm = params.p_th_dbm
    while True:
        occupied = sci & (avg_rsrp > dbm_to_mw(p_th_dbm))
        survivors = cand & ~occupied
        if survivors.sum() >= n_r or not (cand & occupied).any():
            break
        p_th_dbm += 3.0

    avg_srssi = state.avg_srssi_lin()
    idx = np.flatnonzero(survivors)
    order = idx[np.argsort(avg_srssi[idx], kind="stable")]
    return [br_from_flat(grid, int(r)) for r in order[:n_r]]


def mac_select(candidates: list[BrIndex], params: Mode4Params,
               rng: np.random.Generator) -> tuple[BrIndex, int]:
    """Uniform pick among the candidates plus a fresh reselection counter."""
    if not candidates:
        raise Mode4ProtocolError("MAC selection received an empty candidate list")
    choice = candidates[int(rng.integers(len(candidates)))]
    counter = draw_counter(params, rng)
    return choice, counter


def draw_counter(params: Mode4Params, rng: np.random.Generator) -> int:
    return int(rng.integers(params.n_min, params.n_max + 1))


def on_beacon_period_end(state: Mode4State, params: Mode4Params,
                         rng: np.random.Generator) -> str:
    """Advance the counter after a beacon period; decide keep vs reselect.

    On a keep-at-expiry the counter is redrawn here; on 'reselect' the caller
    runs candidate_set + mac_select, which supplies the new counter.
    """
    if state.current is None:
        raise Mode4ProtocolError("no active allocation")
    state.counter -= 1
    if state.counter > 0:
        return "keep"
    if rng.random() < params.p_keep:
        state.counter = draw_counter(params, rng)
        return "keep"
    return "reselect"
