"""Convective cells: Gaussian rain footprints with growth, motion and a
pre-initiation drizzle phase that downstream precursor detection can see.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConvectiveCell:
    center_y: float
    center_x: float
    peak_rate: float                     # mm/h at footprint center, full growth
    radius: float                        # cells (Gaussian sigma)
    vel_y: float                         # cells/min, applies after birth
    vel_x: float
    birth: float                         # minutes
    decay: float
    lead_in: float = 15.0                # drizzle window before birth
    drizzle_frac: float = 0.05

    def __post_init__(self):
        if self.peak_rate <= 0:
            raise ValueError("peak_rate must be > 0")
        if self.radius < 1:
            raise ValueError("radius must be >= 1 cell")
        if self.decay <= self.birth:
            raise ValueError("decay must be after birth")

    def growth(self, t: float) -> float:
        """Temporal intensity factor in [0,1]; peaks at mid-life."""
        if t < self.birth - self.lead_in or t > self.decay:
            return 0.0
        if t < self.birth:
            return self.drizzle_frac * (t - (self.birth - self.lead_in)) / self.lead_in
        mid = 0.5 * (self.birth + self.decay)
        sigma_t = (self.decay - self.birth) / 5.0
        return float(np.exp(-0.5 * ((t - mid) / sigma_t) ** 2))

    def position(self, t: float) -> tuple[float, float]:
        dt = max(0.0, t - self.birth)
        return self.center_y + self.vel_y * dt, self.center_x + self.vel_x * dt

    def footprint(self, ny: int, nx: int, t: float) -> np.ndarray:
        g = self.growth(t)
        if g == 0.0:
            return np.zeros((ny, nx))
        cy, cx = self.position(t)
        yy, xx = np.mgrid[0:ny, 0:nx].astype(np.float64)
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        return self.peak_rate * g * np.exp(-0.5 * d2 / self.radius ** 2)
