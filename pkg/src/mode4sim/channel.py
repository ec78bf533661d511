"""Link-level propagation: two-slope street-canyon pathloss (WINNER+ B1),
spatially correlated log-normal shadowing, and obstacle-based LOS checks.

Exact formulas are documented in the README so the reference values used in
the tests can be reproduced by hand.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 3e8
THERMAL_NOISE_DBM_HZ = -174.0
MIN_DISTANCE_M = 3.0

from .grid import RB_PAIRS_PER_SUBCHANNEL, RB_PAIR_BANDWIDTH_HZ


def dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


def noise_floor_dbm(subchannels_per_br: int, noise_figure_db: float = 9.0) -> float:
    """Thermal noise over one BR allocation plus the receiver noise figure."""
    bw_hz = subchannels_per_br * RB_PAIRS_PER_SUBCHANNEL * RB_PAIR_BANDWIDTH_HZ
    return THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(bw_hz) + noise_figure_db


@dataclass(frozen=True)
class ChannelParams:
    """Propagation and radio-front-end settings."""

    carrier_ghz: float = 5.9
    shadow_sigma_los_db: float = 3.0
    shadow_sigma_nlos_db: float = 4.0
    decorr_dist_m: float = 25.0
    tx_power_dbm: float = 23.0
    antenna_gain_db: float = 3.0
    antenna_height_m: float = 1.5
    noise_figure_db: float = 9.0
    noise_floor_dbm: float = field(default_factory=lambda: noise_floor_dbm(2))
    ibe_attenuation_db: float = 25.0

    def __post_init__(self):
        if self.shadow_sigma_los_db < 0 or self.shadow_sigma_nlos_db < 0:
            raise ValueError("shadowing sigmas must be >= 0")
        if self.decorr_dist_m <= 0:
            raise ValueError("decorrelation distance must be > 0")

    def shadow_sigma_db(self, los):
        return np.where(los, self.shadow_sigma_los_db, self.shadow_sigma_nlos_db)


def breakpoint_distance_m(carrier_ghz: float, antenna_height_m: float = 1.5) -> float:
    h_eff = antenna_height_m - 1.0
    return 4.0 * h_eff * h_eff * carrier_ghz * 1e9 / SPEED_OF_LIGHT


def pathloss_los_db(distance_m, carrier_ghz: float = 5.9, antenna_height_m: float = 1.5):
    """Two-slope LOS pathloss, continuous at the breakpoint up to the
    rounding of the published constants."""
    d = np.maximum(np.asarray(distance_m, dtype=float), MIN_DISTANCE_M)
    h_eff = antenna_height_m - 1.0
    d_bp = breakpoint_distance_m(carrier_ghz, antenna_height_m)
    fc_term = np.log10(carrier_ghz / 5.0)
    log_d = np.log10(d)
    near = 22.7 * log_d + (41.0 + 20.0 * fc_term)
    far = 40.0 * log_d + (9.45 - 34.6 * np.log10(h_eff) + 2.7 * fc_term)
    return np.where(d <= d_bp, near, far)


def _nlos_one_way(d_main, d_perp, carrier_ghz, antenna_height_m):
    n_j = np.maximum(2.8 - 0.0024 * d_main, 1.84)
    return (
        pathloss_los_db(d_main, carrier_ghz, antenna_height_m)
        + 20.0
        - 12.5 * n_j
        + 10.0 * n_j * np.log10(d_perp)
        + 3.0 * np.log10(carrier_ghz / 5.0)
    )


def pathloss_nlos_db(leg1_m, leg2_m, carrier_ghz: float = 5.9, antenna_height_m: float = 1.5):
    """Around-the-corner pathloss from the two right-triangle legs.

    Symmetric in the legs (best of the two street orderings) and floored at
    the LOS loss of the Euclidean distance, so NLOS >= LOS always holds.
    """
    d1 = np.maximum(np.asarray(leg1_m, dtype=float), MIN_DISTANCE_M)
    d2 = np.maximum(np.asarray(leg2_m, dtype=float), MIN_DISTANCE_M)
    corner = np.minimum(
        _nlos_one_way(d1, d2, carrier_ghz, antenna_height_m),
        _nlos_one_way(d2, d1, carrier_ghz, antenna_height_m),
    )
    euclid = np.hypot(d1, d2)
    return np.maximum(corner, pathloss_los_db(euclid, carrier_ghz, antenna_height_m))


def pathloss_db(params: ChannelParams, distance_m, los, legs=None):
    """Pathloss for a link of the given length.

    For NLOS links the two street legs default to the isoceles split
    d/sqrt(2) when the caller has no geometry.
    """
    d = np.asarray(distance_m, dtype=float)
    pl_los = pathloss_los_db(d, params.carrier_ghz, params.antenna_height_m)
    if np.all(los):
        return pl_los
    if legs is None:
        legs = (d / np.sqrt(2.0), d / np.sqrt(2.0))
    pl_nlos = pathloss_nlos_db(legs[0], legs[1], params.carrier_ghz, params.antenna_height_m)
    return np.where(los, pl_los, pl_nlos)


def rx_power_dbm(params: ChannelParams, pathloss_db, shadow_db):
    """Received power; a positive shadow sample attenuates."""
    return params.tx_power_dbm + 2.0 * params.antenna_gain_db - np.asarray(pathloss_db) - np.asarray(shadow_db)


# ---------------------------------------------------------------------------
# Obstacle map and LOS determination
# ---------------------------------------------------------------------------

class ObstacleMapError(ValueError):
    pass


def _orient(p, q, r):
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r):
    return (
        min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
        and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])
    )


def _segments_intersect(a1, a2, b1, b2):
    d1 = _orient(b1, b2, a1)
    d2 = _orient(b1, b2, a2)
    d3 = _orient(a1, a2, b1)
    d4 = _orient(a1, a2, b2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(b1, b2, a1):
        return True
    if d2 == 0 and _on_segment(b1, b2, a2):
        return True
    if d3 == 0 and _on_segment(a1, a2, b1):
        return True
    if d4 == 0 and _on_segment(a1, a2, b2):
        return True
    return False


def _point_in_polygon(poly, p):
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > p[1]) != (y2 > p[1]):
            x_cross = x1 + (p[1] - y1) * (x2 - x1) / (y2 - y1)
            if p[0] < x_cross:
                inside = not inside
    return inside


@dataclass
class ObstacleMap:
    """Building footprints as simple polygons, vertex lists in meters."""

    polygons: list

    def __post_init__(self):
        clean = []
        for poly in self.polygons:
            arr = np.asarray(poly, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
                raise ObstacleMapError("each polygon needs at least 3 x,y vertices")
            clean.append(arr)
        self.polygons = clean

    @classmethod
    def from_file(cls, path) -> "ObstacleMap":
        polys = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [p for p in line.split(",") if p.strip()]
                if len(parts) % 2 != 0:
                    raise ObstacleMapError(
                        f"{path}:{lineno}: odd number of coordinates"
                    )
                try:
                    vals = [float(p) for p in parts]
                except ValueError as exc:
                    raise ObstacleMapError(f"{path}:{lineno}: {exc}") from exc
                polys.append(np.asarray(vals).reshape(-1, 2))
        return cls(polygons=polys)

    def blocks(self, pos_i, pos_j) -> bool:
        p = (float(pos_i[0]), float(pos_i[1]))
        q = (float(pos_j[0]), float(pos_j[1]))
        for poly in self.polygons:
            if _point_in_polygon(poly, p) or _point_in_polygon(poly, q):
                return True
            n = len(poly)
            for k in range(n):
                if _segments_intersect(p, q, tuple(poly[k]), tuple(poly[(k + 1) % n])):
                    return True
        return False


def los_state(obstacles: ObstacleMap | None, pos_i, pos_j) -> bool:
    """True when the segment between the endpoints crosses no polygon."""
    if not np.all(np.isfinite(pos_i)) or not np.all(np.isfinite(pos_j)):
        raise ValueError("positions must be finite")
    if obstacles is None or not obstacles.polygons:
        return True
    return not obstacles.blocks(pos_i, pos_j)


# ---------------------------------------------------------------------------
# Pairwise channel realization
# ---------------------------------------------------------------------------

class ChannelRealization:
    """Per-link pathloss + correlated shadow state for all vehicle pairs.

    Matrices are (n, n) and symmetric; the diagonal is unused. Shadowing is
    an AR(1) process per unordered pair, stepped by the change in relative
    displacement between updates.
    """

    def __init__(self, params: ChannelParams, pathloss_db, shadow_db, los):
        self.params = params
        self.pathloss_db = np.asarray(pathloss_db, dtype=float)
        self.shadow_db = np.asarray(shadow_db, dtype=float)
        self.los = np.asarray(los, dtype=bool)
        self.n = self.pathloss_db.shape[0]
        self._rx_lin = None

    @classmethod
    def initial(
        cls,
        params: ChannelParams,
        dist_m,
        los=None,
        legs=None,
        rng: np.random.Generator | None = None,
    ) -> "ChannelRealization":
        dist = np.asarray(dist_m, dtype=float)
        n = dist.shape[0]
        if los is None:
            los = np.ones_like(dist, dtype=bool)
        pl = pathloss_db(params, dist, los, legs=legs)
        if rng is None:
            shadow = np.zeros_like(dist)
        else:
            shadow = _symmetric_normal(rng, n) * params.shadow_sigma_db(los)
        return cls(params, pl, shadow, los)

    def invalidate(self):
        self._rx_lin = None

    def advance(self, dist_m, moved_m=None, los=None, legs=None, rng=None,
                rho=None):
        """Refresh pathloss for the new geometry and step the shadow AR(1).

        moved_m is the per-pair relative displacement since the previous
        update; rho = exp(-moved/decorr). Infinite displacement resamples the
        pair from scratch. Callers with a constant displacement pattern may
        pass the precomputed rho matrix instead.
        """
        dist = np.asarray(dist_m, dtype=float)
        if los is None:
            los = np.ones_like(dist, dtype=bool)
        self.los = np.asarray(los, dtype=bool)
        self.pathloss_db = pathloss_db(self.params, dist, self.los, legs=legs)
        sigma = self.params.shadow_sigma_db(self.los)
        if rho is None:
            if moved_m is None:
                raise ValueError("need either moved_m or rho")
            with np.errstate(over="ignore"):
                rho = np.exp(-np.asarray(moved_m, dtype=float)
                             / self.params.decorr_dist_m)
        g = _symmetric_normal(rng, self.n) * sigma
        self.shadow_db = rho * self.shadow_db + np.sqrt(1.0 - rho * rho) * g
        self.invalidate()

    def rx_power_dbm_matrix(self):
        return rx_power_dbm(self.params, self.pathloss_db, self.shadow_db)

    def rx_power_lin(self):
        """Linear received power in mW, diagonal zeroed. rows = transmitter."""
        if self._rx_lin is None:
            with np.errstate(invalid="ignore"):
                lin = dbm_to_mw(self.rx_power_dbm_matrix())
            lin = np.nan_to_num(lin, nan=0.0, posinf=0.0)
            np.fill_diagonal(lin, 0.0)
            self._rx_lin = lin
        return self._rx_lin

    def rx_power_dbm_link(self, i: int, j: int) -> float:
        return float(
            rx_power_dbm(self.params, self.pathloss_db[i, j], self.shadow_db[i, j])
        )


def _symmetric_normal(rng, n):
    if rng is None:
        return np.zeros((n, n))
    g = rng.standard_normal((n, n))
    upper = np.triu(g, 1)
    return upper + upper.T


def shadow_step(
    real: ChannelRealization, link: tuple[int, int], moved_m: float, rng
) -> float:
    """Advance one pair's shadow sample by a relative displacement."""
    if moved_m < 0:
        raise ValueError("moved_m must be >= 0")
    i, j = link
    s = real.shadow_db[i, j]
    if moved_m == 0:
        return float(s)
    sigma = float(real.params.shadow_sigma_db(real.los[i, j]))
    rho = float(np.exp(-moved_m / real.params.decorr_dist_m))
    g = rng.normal(0.0, sigma)
    s_new = rho * s + np.sqrt(1.0 - rho * rho) * g
    real.shadow_db[i, j] = s_new
    real.shadow_db[j, i] = s_new
    real.invalidate()
    return float(s_new)
