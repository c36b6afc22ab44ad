"""Sensor models: shadowed noisy radar, latent gauges, coarse satellite."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..grids import GridField


@dataclass(frozen=True)
class SensorSuite:
    shadow_mask: np.ndarray              # bool, True = radar-blind
    gauge_cells: tuple[tuple[int, int], ...]
    gauge_latency: float = 5.0
    satellite_factor: int = 4
    satellite_latency: float = 15.0
    radar_noise_sigma: float = 0.12
    satellite_noise_sigma: float = 0.0
    radar_latency: float = 0.0

    def __post_init__(self):
        if self.gauge_latency < 0:
            raise ValueError("gauge latency must be >= 0")
        if self.satellite_factor < 2:
            raise ValueError("satellite coarse factor must be >= 2")
        self.shadow_mask.flags.writeable = False


@dataclass(frozen=True)
class GaugeReading:
    y: int
    x: int
    value: float
    observed_at: float
    available_at: float


@dataclass(frozen=True)
class ObservationSet:
    frame_t: float
    radar: GridField                     # NaN where shadowed
    radar_mask: np.ndarray               # bool, True = missing
    radar_available_at: float
    gauges: tuple[GaugeReading, ...]
    satellite: GridField                 # block-mean coarse field
    satellite_available_at: float

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.frame_t).encode())
        h.update(self.radar.content_hash().encode())
        h.update(np.packbits(self.radar_mask).tobytes())
        for g in self.gauges:
            h.update(f"{g.y},{g.x},{g.value!r},{g.available_at!r}".encode())
        h.update(self.satellite.content_hash().encode())
        return h.hexdigest()


def block_mean(values: np.ndarray, factor: int) -> np.ndarray:
    ny, nx = values.shape
    if ny % factor or nx % factor:
        raise ValueError("grid not divisible by block factor")
    return values.reshape(ny // factor, factor, nx // factor, factor).mean(axis=(1, 3))


def make_shadow_mask(ny: int, nx: int, gen: np.random.Generator,
                     frac_min: float = 0.10, frac_max: float = 0.20) -> np.ndarray:
    """Contiguous angular sector, blind beyond a short range from the radar
    site at grid center; width solved to land inside [frac_min, frac_max]."""
    cy, cx = (ny - 1) / 2.0, (nx - 1) / 2.0
    yy, xx = np.mgrid[0:ny, 0:nx].astype(np.float64)
    angle = np.arctan2(yy - cy, xx - cx)
    dist = np.hypot(yy - cy, xx - cx)
    theta0 = gen.uniform(-np.pi, np.pi)
    r_min = 5.0
    target = gen.uniform(frac_min, frac_max)
    lo, hi = 0.0, 2 * np.pi
    mask = np.zeros((ny, nx), dtype=bool)
    for _ in range(40):
        width = 0.5 * (lo + hi)
        rel = np.mod(angle - theta0, 2 * np.pi)
        mask = (rel < width) & (dist > r_min)
        frac = mask.mean()
        if frac < target:
            lo = width
        else:
            hi = width
    return mask


def place_gauges(ny: int, nx: int, n: int,
                 gen: np.random.Generator) -> tuple[tuple[int, int], ...]:
    idx = gen.choice(ny * nx, size=n, replace=False)
    return tuple(sorted((int(i) // nx, int(i) % nx) for i in idx))


def sense(frame: GridField, suite: SensorSuite,
          gen: np.random.Generator) -> ObservationSet:
    """Observe one truth frame through the whole suite.

    All noise comes from the supplied generator, in a fixed draw order, so
    replays are bit-exact.
    """
    truth = frame.values
    t = frame.t
    sigma = suite.radar_noise_sigma
    if sigma > 0:
        noise = np.exp(gen.normal(0.0, sigma, truth.shape) - 0.5 * sigma ** 2)
    else:
        noise = np.ones_like(truth)
    radar_vals = truth * noise
    radar_vals = np.where(suite.shadow_mask, np.nan, radar_vals)
    radar = GridField(radar_vals, frame.cell_km, t, "rain_radar", "mm/h")

    gauges = tuple(GaugeReading(y, x, float(truth[y, x]), t,
                                t + suite.gauge_latency)
                   for y, x in suite.gauge_cells)

    sat_vals = block_mean(truth, suite.satellite_factor)
    if suite.satellite_noise_sigma > 0:
        s = suite.satellite_noise_sigma
        sat_vals = sat_vals * np.exp(gen.normal(0.0, s, sat_vals.shape) - 0.5 * s ** 2)
    satellite = GridField(sat_vals, frame.cell_km * suite.satellite_factor, t,
                          "rain_satellite", "mm/h")

    return ObservationSet(
        frame_t=t, radar=radar, radar_mask=suite.shadow_mask,
        radar_available_at=t + suite.radar_latency, gauges=gauges,
        satellite=satellite, satellite_available_at=t + suite.satellite_latency)
