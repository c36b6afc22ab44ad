"""Ensemble advection nowcasting and exceedance probabilities.

Member 0 is pure advection; members 1..m-1 carry seeded velocity jitter
and intensity multipliers. Initiation candidates seed a nascent cell that
intensifies with lead time in the leading ceil(score * m) members.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng
from .motion import MotionField


class ForecastError(Exception):
    pass


@dataclass(frozen=True)
class EnsembleForecast:
    issued_at: float
    frame_t: float                       # ingestion time of the driving analysis
    horizon: float
    cadence: float
    members: np.ndarray                  # (m, n_leads, ny, nx) mm/h
    member_seeds: tuple[int, ...]
    coarse: bool = False

    def __post_init__(self):
        self.members.flags.writeable = False
        if (self.members < 0).any():
            raise ValueError("all members must be nonnegative")

    @property
    def m(self) -> int:
        return self.members.shape[0]

    @property
    def leads(self) -> np.ndarray:
        n = self.members.shape[1]
        return np.arange(1, n + 1) * self.cadence

    def lead_index(self, lead: float) -> int:
        idx = int(round(lead / self.cadence)) - 1
        if not 0 <= idx < self.members.shape[1]:
            raise ForecastError(f"lead {lead} outside horizon {self.horizon}")
        return idx

    def at_lead(self, lead: float) -> np.ndarray:
        return self.members[:, self.lead_index(lead)]


@dataclass(frozen=True)
class ProbabilityGrid:
    threshold: float
    lead: float
    p: np.ndarray
    calibrated: bool
    issued_at: float
    frame_t: float
    valid_t: float

    def __post_init__(self):
        self.p.flags.writeable = False
        if (self.p < 0).any() or (self.p > 1).any():
            raise ValueError("probabilities must lie in [0,1]")


_MGRID_CACHE: dict = {}


def _mgrid(ny: int, nx: int):
    key = (ny, nx)
    if key not in _MGRID_CACHE:
        _MGRID_CACHE[key] = np.mgrid[0:ny, 0:nx]
    return _MGRID_CACHE[key]


def advect(field: np.ndarray, vy: np.ndarray, vx: np.ndarray,
           lead: float) -> np.ndarray:
    """Backward semi-Lagrangian advection with nearest-cell sampling.

    Integer displacements are recovered exactly; inflow boundaries fill 0.
    """
    ny, nx = field.shape
    yy, xx = _mgrid(ny, nx)
    src_y = np.rint(yy - vy * lead).astype(np.int64)
    src_x = np.rint(xx - vx * lead).astype(np.int64)
    inside = (src_y >= 0) & (src_y < ny) & (src_x >= 0) & (src_x < nx)
    out = np.zeros_like(field)
    out[inside] = field[src_y[inside], src_x[inside]]
    return out


def _advect_stack(field: np.ndarray, vy: np.ndarray, vx: np.ndarray,
                  jitters: np.ndarray, leads: np.ndarray) -> np.ndarray:
    """Advect one field along jittered velocities for every (member, lead)
    at once; returns (m, L, ny, nx)."""
    ny, nx = field.shape
    m, n_leads = jitters.shape[0], leads.shape[0]
    yy, xx = _mgrid(ny, nx)
    ld = leads[None, :, None, None]
    vy_k = vy[None, None] + jitters[:, 0][:, None, None, None]
    vx_k = vx[None, None] + jitters[:, 1][:, None, None, None]
    src_y = np.rint(yy[None, None] - vy_k * ld).astype(np.int64)
    src_x = np.rint(xx[None, None] - vx_k * ld).astype(np.int64)
    inside = (src_y >= 0) & (src_y < ny) & (src_x >= 0) & (src_x < nx)
    out = np.zeros((m, n_leads, ny, nx))
    out[inside] = field[src_y[inside], src_x[inside]]
    return out


def _nascent_bump(ny: int, nx: int, y: int, x: int, radius: float) -> np.ndarray:
    yy, xx = np.mgrid[0:ny, 0:nx].astype(np.float64)
    d2 = (yy - y) ** 2 + (xx - x) ** 2
    return np.exp(-0.5 * d2 / radius ** 2)


def nowcast_ensemble(analysis: np.ndarray, motion: MotionField,
                     candidates: list, m: int, horizon: float,
                     cadence: float, seed: int, issued_at: float,
                     frame_t: float, sigma_vel: float = 0.06,
                     sigma_int: float = 0.25, spread_inflation: float = 1.0,
                     inject_rate: float = 80.0, inject_radius: float = 2.5,
                     allow_deterministic: bool = False) -> EnsembleForecast:
    if m < 2 and not allow_deterministic:
        raise ForecastError("probabilistic products need m >= 2 members")
    if m < 1:
        raise ForecastError("need at least one member")
    n_leads = int(round(horizon / cadence))
    if abs(n_leads * cadence - horizon) > 1e-9 or n_leads < 1:
        raise ForecastError("horizon must be a positive multiple of cadence")

    ny, nx = analysis.shape
    vy, vx = motion.cell_velocity(ny, nx)
    seeds = tuple(rng.derive_seed(seed, "member", k) for k in range(m))

    jitters = np.zeros((m, 2))
    mults = np.ones(m)
    s_v = sigma_vel * spread_inflation
    s_i = sigma_int * spread_inflation
    for k in range(1, m):
        gen = rng.stream(seed, "member", k)
        if s_v > 0:
            jitters[k] = gen.normal(0.0, s_v, 2)
        if s_i > 0:
            mults[k] = np.exp(gen.normal(0.0, s_i) - 0.5 * s_i ** 2)

    leads = np.arange(1, n_leads + 1) * cadence
    members = _advect_stack(analysis, vy, vx, jitters, leads)
    members *= mults[:, None, None, None]
    for c in candidates:
        k_in = int(np.ceil(c.score * m))
        if k_in <= 0:
            continue
        bump = _nascent_bump(ny, nx, c.y, c.x, inject_radius)
        ramp = inject_rate * c.score * (leads / horizon)
        members[:k_in] += ramp[None, :, None, None] * bump[None, None]
    members = np.maximum(members, 0.0)

    return EnsembleForecast(issued_at=issued_at, frame_t=frame_t,
                            horizon=horizon, cadence=cadence, members=members,
                            member_seeds=seeds, coarse=False)


def exceedance_probability(ens: EnsembleForecast, threshold: float,
                           lead: float, calibration=None) -> ProbabilityGrid:
    fields = ens.at_lead(lead)           # raises beyond horizon
    raw = (fields >= threshold).mean(axis=0)
    calibrated = False
    if calibration is not None:
        raw = calibration.apply(raw)
        calibrated = True
    return ProbabilityGrid(threshold=threshold, lead=lead, p=raw,
                           calibrated=calibrated, issued_at=ens.issued_at,
                           frame_t=ens.frame_t, valid_t=ens.frame_t + lead)
