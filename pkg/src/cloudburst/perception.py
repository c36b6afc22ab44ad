"""Perceptual layer: multi-sensor fusion into a quality-flagged analysis
grid, and precursor detection ahead of convective initiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridField
from .prediction.motion import MotionField

# per-cell quality flags
DIRECT, INFILLED, STALE, MISSING = 0, 1, 2, 3
QUALITY_NAMES = {DIRECT: "direct", INFILLED: "infilled",
                 STALE: "stale", MISSING: "missing"}


@dataclass(frozen=True)
class AnalysisGrid:
    t: float                              # frame time of the fused observations
    rain: GridField
    quality: np.ndarray                   # int8 flags
    ingest_latency: float                 # minutes from observation to analysis

    def __post_init__(self):
        self.quality.flags.writeable = False

    @property
    def stale_frac(self) -> float:
        return float(np.mean(self.quality >= STALE))


@dataclass(frozen=True)
class InitiationCandidate:
    y: int
    x: int
    score: float                          # precursor strength in [0,1]
    detected_at: float
    expires_at: float

    def __post_init__(self):
        if self.expires_at <= self.detected_at:
            raise ValueError("candidate must expire after detection")


@dataclass(frozen=True)
class AvailableObs:
    """Whatever sensor pieces have arrived for one analysis cycle."""
    frame_t: float
    radar: GridField | None = None
    radar_mask: np.ndarray | None = None
    gauges: tuple = ()                     # GaugeReading-like (y, x, value, observed_at)
    satellite: GridField | None = None


@dataclass
class InfillPlan:
    """Nearest-direct-cell IDW weights for a fixed shadow mask."""
    targets: np.ndarray                    # (n_masked, 2) cell coords
    source_idx: np.ndarray                 # (n_masked, k) flat indices into grid
    weights: np.ndarray                    # (n_masked, k) normalized IDW weights


def build_infill_plan(mask: np.ndarray, extra_sources: tuple = (),
                      k: int = 8, power: float = 2.0) -> InfillPlan:
    ny, nx = mask.shape
    targets = np.argwhere(mask)
    sources = np.argwhere(~mask)
    extra = np.array([(y, x) for y, x in extra_sources if mask[y, x]],
                     dtype=np.int64).reshape(-1, 2)
    sources = np.concatenate([sources, extra], axis=0)
    if len(sources) == 0 or len(targets) == 0:
        return InfillPlan(targets, np.zeros((len(targets), 0), dtype=np.int64),
                          np.zeros((len(targets), 0)))
    d2 = ((targets[:, None, :] - sources[None, :, :]) ** 2).sum(axis=2).astype(np.float64)
    k = min(k, len(sources))
    nearest = np.argpartition(d2, k - 1, axis=1)[:, :k]
    rows = np.arange(len(targets))[:, None]
    nd2 = d2[rows, nearest]
    order = np.argsort(nd2, axis=1, kind="stable")
    nearest = nearest[rows, order]
    nd2 = nd2[rows, order]
    w = 1.0 / np.maximum(nd2, 1e-12) ** (power / 2.0)
    w /= w.sum(axis=1, keepdims=True)
    flat = sources[nearest][:, :, 0] * nx + sources[nearest][:, :, 1]
    return InfillPlan(targets, flat, w)


def harmonize(obs: AvailableObs, prev: AnalysisGrid | None,
              plan: InfillPlan | None = None, cadence: float = 5.0,
              staleness_ticks: int = 2, idw_neighbors: int = 8,
              idw_power: float = 2.0) -> AnalysisGrid:
    """Fuse available observations into one analysis grid.

    Radar fills unmasked cells (direct); same-frame gauges override radar in
    their cell (direct); shadow cells take IDW infill from nearby direct
    values (infilled). With no fresh sensors at all, the previous analysis
    is carried forward with every cell flagged stale; after
    `staleness_ticks` carries, cells decay to missing.
    """
    t = obs.frame_t
    if obs.radar is not None:
        ny, nx = obs.radar.shape
        mask = obs.radar_mask if obs.radar_mask is not None \
            else np.isnan(obs.radar.values)
        rain = np.where(mask, 0.0, np.nan_to_num(obs.radar.values, nan=0.0))
        quality = np.where(mask, MISSING, DIRECT).astype(np.int8)

        fresh_gauges = [g for g in obs.gauges if g.observed_at == t]
        infill_gauges = [g for g in obs.gauges
                         if t - staleness_ticks * cadence <= g.observed_at <= t]
        for g in fresh_gauges:
            rain[g.y, g.x] = g.value
            quality[g.y, g.x] = DIRECT

        if mask.any():
            if plan is None:
                plan = build_infill_plan(
                    mask, tuple((g.y, g.x) for g in infill_gauges),
                    k=idw_neighbors, power=idw_power)
            source_vals = rain.ravel()[plan.source_idx] if plan.source_idx.size \
                else np.zeros((len(plan.targets), 0))
            gauge_map = {(g.y, g.x): g.value for g in infill_gauges}
            if gauge_map and plan.source_idx.size:
                flat_lookup = np.array(
                    [gauge_map.get((i // nx, i % nx), np.nan)
                     for i in plan.source_idx.ravel()]).reshape(plan.source_idx.shape)
                source_vals = np.where(np.isnan(flat_lookup), source_vals,
                                       flat_lookup)
            if plan.weights.size:
                filled = (source_vals * plan.weights).sum(axis=1)
                ys, xs = plan.targets[:, 0], plan.targets[:, 1]
                rain[ys, xs] = filled
                quality[ys, xs] = INFILLED
        rain = np.maximum(rain, 0.0)
        return AnalysisGrid(t, GridField(rain, obs.radar.cell_km, t,
                                         "rain_analysis", "mm/h"),
                            quality, ingest_latency=cadence)

    if obs.satellite is not None:
        factor = 1
        if prev is not None:
            factor = prev.rain.shape[0] // obs.satellite.shape[0]
        rain = np.repeat(np.repeat(obs.satellite.values, factor, 0), factor, 1)
        quality = np.full(rain.shape, INFILLED, dtype=np.int8)
        return AnalysisGrid(t, GridField(rain, obs.satellite.cell_km / factor,
                                         t, "rain_analysis", "mm/h"),
                            quality, ingest_latency=cadence)

    if prev is not None:
        # degraded mode: advance in time, decay quality toward missing
        quality = np.where(prev.quality >= STALE,
                           np.minimum(prev.quality + 1, MISSING),
                           STALE).astype(np.int8)
        return AnalysisGrid(t, prev.rain.with_values(prev.rain.values, t=t),
                            quality, ingest_latency=cadence)

    raise ValueError("no observations and no previous analysis to carry")


# -- initiation detection ------------------------------------------------------

def _rank_normalize(raw: np.ndarray) -> np.ndarray:
    """Empirical-CDF ranks in [0,1); ties share the count-below value, so a
    constant field maps to all zeros."""
    flat = raw.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_vals = flat[order]
    below = np.searchsorted(sorted_vals, flat, side="left")
    return (below / flat.size).reshape(raw.shape)


def _smooth3(a: np.ndarray) -> np.ndarray:
    out = np.copy(a)
    for axis in (0, 1):
        out = (np.roll(out, 1, axis) + out + np.roll(out, -1, axis)) / 3.0
    return out


def _precursor_raw(history: list[AnalysisGrid], terrain_elevation: np.ndarray,
                   motion: MotionField | None, k_required: int) -> np.ndarray:
    """Unnormalized precursor strength: positive rain trend, scaled by
    motion convergence and wind-aligned upslope.

    The multiplicative floors keep a growing-but-calm drizzle signal alive
    when the motion field is still flat.
    """
    curr = history[-1].rain.values
    first = history[-k_required].rain.values
    dt = max(history[-1].t - history[-k_required].t, 1e-9)
    trend = np.maximum(_smooth3((curr - first) / dt), 0.0)

    ny, nx = curr.shape
    if motion is not None:
        vy, vx = motion.cell_velocity(ny, nx)
    else:
        vy = np.zeros((ny, nx))
        vx = np.zeros((ny, nx))
    div = np.gradient(vx, axis=1) + np.gradient(vy, axis=0)
    conv = np.maximum(-div, 0.0)
    gy, gx = np.gradient(terrain_elevation)
    upslope = np.maximum(vy * gy + vx * gx, 0.0)

    floor_c, floor_u = 0.2, 0.2
    return trend * (floor_c + conv) * (floor_u + _rank_normalize(upslope))


def phi_field(history: list[AnalysisGrid], terrain_elevation: np.ndarray,
              motion: MotionField | None, k_required: int = 3) -> np.ndarray:
    """Rank-normalized precursor field; scale-free by construction."""
    if len(history) < k_required:
        return np.zeros_like(history[-1].rain.values)
    return _rank_normalize(_precursor_raw(history, terrain_elevation, motion,
                                          k_required))


def detect_initiation(history: list[AnalysisGrid], terrain_elevation: np.ndarray,
                      motion: MotionField | None, now: float,
                      theta_init: float = 0.9, ttl: float = 30.0,
                      dry_max_rain: float = 5.0, k_required: int = 3,
                      max_candidates: int = 3, min_separation: int = 8,
                      heavy_rain_floor: float = 20.0, isolation_radius: int = 8,
                      raw_min: float = 0.008) -> list[InitiationCandidate]:
    """Emit candidates where the precursor rank clears theta_init in
    currently dry cells, strongest first, suppressing near-duplicates.

    True initiation happens away from established storms, so cells within
    `isolation_radius` of heavy rain are excluded; `raw_min` keeps sensor
    noise from ever ranking its way into a candidate.
    """
    if len(history) < k_required:
        return []
    curr = history[-1].rain.values
    raw = _precursor_raw(history, terrain_elevation, motion, k_required)
    phi = _rank_normalize(raw)

    ny, nx = curr.shape
    eligible = (phi >= theta_init) & (curr < dry_max_rain) & (raw > raw_min)
    heavy = np.argwhere(curr >= heavy_rain_floor)
    cands: list[InitiationCandidate] = []
    order = np.argsort(-raw, axis=None, kind="stable")
    taken: list[tuple[int, int]] = []
    for idx in order:
        y, x = divmod(int(idx), nx)
        if not eligible[y, x]:
            continue
        if len(heavy) and np.max(np.abs(heavy - (y, x)), axis=1).min() <= isolation_radius:
            continue
        if any(abs(y - ty) <= min_separation and abs(x - tx) <= min_separation
               for ty, tx in taken):
            continue
        cands.append(InitiationCandidate(y, x, float(phi[y, x]), now, now + ttl))
        taken.append((y, x))
        if len(cands) >= max_candidates:
            break
    return cands
