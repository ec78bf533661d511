"""Vehicle positions per beacon period: trace ingestion and a synthetic
multi-lane ring highway.

Highway vehicles keep a constant per-vehicle speed drawn from a per-lane
truncated Gaussian; positions wrap modulo the road length, which keeps the
linear density (and so the neighbor statistics) stationary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioSnapshot

KMH = 1000.0 / 3600.0


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time_s: float
    vehicle_id: int
    x_m: float
    y_m: float


def _parse_trace(path) -> dict[int, list[TraceRecord]]:
    by_vehicle: dict[int, list[TraceRecord]] = {}
    n_records = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if lineno == 1 and any(not _is_number(p) for p in parts[:1]):
                continue  # optional header
            if len(parts) != 4:
                raise TraceError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                rec = TraceRecord(float(parts[0]), int(float(parts[1])),
                                  float(parts[2]), float(parts[3]))
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from exc
            if not np.isfinite([rec.time_s, rec.x_m, rec.y_m]).all():
                raise TraceError(f"{path}:{lineno}: non-finite value")
            by_vehicle.setdefault(rec.vehicle_id, []).append(rec)
            n_records += 1
    if n_records == 0:
        raise TraceError(f"{path}: empty trace")
    for vid, records in by_vehicle.items():
        times = [r.time_s for r in records]
        if any(b < a for a, b in zip(times, times[1:])):
            raise TraceError(f"vehicle {vid}: timestamps decrease")
    return by_vehicle


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def load_trace(path, beacon_period_ms: int = 100,
               max_gap_s: float = 1.0) -> list[ScenarioSnapshot]:
    """Trace file -> snapshots at beacon-period granularity.

    Positions are interpolated linearly between bracketing records; a vehicle
    is absent at a sample instant when no bracketing pair exists or the pair
    is more than max_gap_s apart (a leave/rejoin gap).
    """
    by_vehicle = _parse_trace(path)
    t_start = min(r[0].time_s for r in by_vehicle.values())
    t_end = max(r[-1].time_s for r in by_vehicle.values())
    step = beacon_period_ms / 1000.0
    n_steps = int(np.floor((t_end - t_start) / step)) + 1
    snapshots = []
    for k in range(n_steps):
        t = t_start + k * step
        ids, pos = [], []
        for vid in sorted(by_vehicle):
            records = by_vehicle[vid]
            times = [r.time_s for r in records]
            j = np.searchsorted(times, t, side="right")
            if j == 0 or j > len(records):
                continue
            if j == len(records):
                if times[-1] == t:
                    ids.append(vid)
                    pos.append((records[-1].x_m, records[-1].y_m))
                continue
            lo, hi = records[j - 1], records[j]
            if hi.time_s - lo.time_s > max_gap_s and lo.time_s != t:
                continue
            if hi.time_s == lo.time_s:
                frac = 0.0
            else:
                frac = (t - lo.time_s) / (hi.time_s - lo.time_s)
            ids.append(vid)
            pos.append((lo.x_m + frac * (hi.x_m - lo.x_m),
                        lo.y_m + frac * (hi.y_m - lo.y_m)))
        snapshots.append(ScenarioSnapshot(
            tti=k * beacon_period_ms,
            ids=np.asarray(ids, dtype=int),
            positions=np.asarray(pos, dtype=float).reshape(-1, 2),
        ))
    return snapshots


# ---------------------------------------------------------------------------
# Synthetic highway
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HighwayConfig:
    """Ring highway with fixed per-lane speeds (outer to inner lanes faster)."""

    length_m: float = 16000.0
    lanes_per_direction: int = 3
    target_vehicle_count: int = 2015
    speed_mean_mps: tuple = (70 * KMH, 90 * KMH, 110 * KMH)
    speed_sigma_frac: float = 0.1
    lane_width_m: float = 4.0
    wrap_around: bool = True

    def __post_init__(self):
        if self.length_m <= 0 or self.target_vehicle_count <= 0:
            raise ValueError("length and vehicle count must be positive")
        if self.lanes_per_direction < 1:
            raise ValueError("need at least one lane per direction")
        if any(v <= 0 for v in self.speed_mean_mps):
            raise ValueError("speeds must be positive")


@dataclass
class HighwayState:
    x: np.ndarray
    y: np.ndarray
    speed: np.ndarray  # signed, direction baked in

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


def _truncated_normal(rng, mean, sigma, n):
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (n,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    vals = rng.normal(mean, sigma, size=n)
    for _ in range(16):
        bad = np.abs(vals - mean) > 3 * sigma
        if not bad.any():
            break
        vals[bad] = rng.normal(mean[bad], sigma[bad])
    return np.clip(vals, mean - 3 * sigma, mean + 3 * sigma)


def spawn_highway(cfg: HighwayConfig, rng: np.random.Generator) -> HighwayState:
    """Uniform placement along each lane at the configured total density."""
    n = cfg.target_vehicle_count
    lanes = 2 * cfg.lanes_per_direction
    lane_of = np.arange(n) % lanes
    direction = np.where(lane_of < cfg.lanes_per_direction, 1.0, -1.0)
    lane_rank = np.where(lane_of < cfg.lanes_per_direction,
                         lane_of, lane_of - cfg.lanes_per_direction)
    # Outer lane (rank 0) slowest; y offsets mirror across the median.
    y = direction * (0.5 + lane_rank) * cfg.lane_width_m
    mean = np.asarray(cfg.speed_mean_mps)[lane_rank.astype(int)]
    speed = _truncated_normal(rng, mean, cfg.speed_sigma_frac * mean, n) * direction
    x = rng.uniform(0.0, cfg.length_m, size=n)
    return HighwayState(x=x, y=y, speed=speed)


def step_highway(cfg: HighwayConfig, state: HighwayState, dt_s: float) -> np.ndarray:
    """Advance positions by dt; returns the true per-vehicle displacement."""
    if dt_s <= 0:
        raise ValueError("dt must be positive")
    dx = state.speed * dt_s
    state.x = state.x + dx
    if cfg.wrap_around:
        state.x = np.mod(state.x, cfg.length_m)
    return np.column_stack([dx, np.zeros_like(dx)])


def neighbors(snapshot: ScenarioSnapshot, vehicle: int, awareness_m: float) -> set:
    """Ids of all vehicles within the awareness range (inclusive boundary)."""
    if awareness_m <= 0:
        raise ValueError("awareness_m must be positive")
    row = np.flatnonzero(snapshot.ids == vehicle)
    if len(row) != 1:
        raise ValueError(f"vehicle {vehicle} not in snapshot")
    i = int(row[0])
    dx = np.abs(snapshot.positions[:, 0] - snapshot.positions[i, 0])
    if snapshot.wrap_length_m is not None:
        dx = np.minimum(dx, snapshot.wrap_length_m - dx)
    dy = snapshot.positions[:, 1] - snapshot.positions[i, 1]
    dist = np.hypot(dx, dy)
    mask = dist <= awareness_m
    mask[i] = False
    return set(int(v) for v in snapshot.ids[mask])
