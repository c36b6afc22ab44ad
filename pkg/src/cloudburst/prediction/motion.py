"""Block cross-correlation motion estimation for Lagrangian extrapolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MotionField:
    block_size: int
    vel_y: np.ndarray                    # (nby, nbx) cells/min
    vel_x: np.ndarray
    quality: np.ndarray                  # best correlation per block
    grid_shape: tuple[int, int]

    def __post_init__(self):
        for arr in (self.vel_y, self.vel_x, self.quality):
            arr.flags.writeable = False
        if not (np.isfinite(self.vel_y).all() and np.isfinite(self.vel_x).all()):
            raise ValueError("motion vectors must be finite")

    def cell_velocity(self, ny: int, nx: int) -> tuple[np.ndarray, np.ndarray]:
        """Expand block vectors to per-cell fields."""
        b = self.block_size
        vy = np.repeat(np.repeat(self.vel_y, b, 0), b, 1)[:ny, :nx]
        vx = np.repeat(np.repeat(self.vel_x, b, 0), b, 1)[:ny, :nx]
        return vy, vx

    def median_speed(self) -> float:
        return float(np.median(np.hypot(self.vel_y, self.vel_x)))


def _block_sum(a: np.ndarray, b: int) -> np.ndarray:
    ny, nx = a.shape
    return a.reshape(ny // b, b, nx // b, b).sum(axis=(1, 3))


def _shift(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Shift with zero fill: result[y, x] = a[y - dy, x - dx]."""
    out = np.zeros_like(a)
    ny, nx = a.shape
    ys_dst = slice(max(0, dy), ny + min(0, dy))
    xs_dst = slice(max(0, dx), nx + min(0, dx))
    ys_src = slice(max(0, -dy), ny + min(0, -dy))
    xs_src = slice(max(0, -dx), nx + min(0, -dx))
    out[ys_dst, xs_dst] = a[ys_src, xs_src]
    return out


def estimate_motion(prev: np.ndarray, curr: np.ndarray, block_size: int = 16,
                    search_radius: int = 3, cadence: float = 5.0,
                    wet_threshold: float = 0.5) -> MotionField:
    """Per-block displacement maximizing normalized cross-correlation.

    Ties break toward the smallest speed, then lexicographic (dy, dx); dry
    blocks inherit the component-wise median of wet-block vectors.
    """
    ny, nx = curr.shape
    if ny % block_size or nx % block_size:
        raise ValueError("grid not divisible by block size")
    nby, nbx = ny // block_size, nx // block_size

    offsets = sorted(((dy, dx) for dy in range(-search_radius, search_radius + 1)
                      for dx in range(-search_radius, search_radius + 1)),
                     key=lambda o: (o[0] * o[0] + o[1] * o[1], o[0], o[1]))
    curr_sq = _block_sum(curr * curr, block_size)
    best_score = np.full((nby, nbx), -np.inf)
    best_dy = np.zeros((nby, nbx))
    best_dx = np.zeros((nby, nbx))
    for dy, dx in offsets:
        shifted = _shift(prev, dy, dx)
        num = _block_sum(shifted * curr, block_size)
        den = np.sqrt(_block_sum(shifted * shifted, block_size) * curr_sq)
        score = np.where(den > 0, num / np.maximum(den, 1e-12), 0.0)
        take = score > best_score + 1e-12
        best_score[take] = score[take]
        best_dy[take] = dy
        best_dx[take] = dx

    wet = _block_sum(curr, block_size) / block_size ** 2 > wet_threshold
    if wet.any():
        med_dy = float(np.median(best_dy[wet]))
        med_dx = float(np.median(best_dx[wet]))
    else:
        med_dy = med_dx = 0.0
    vy = np.where(wet, best_dy, med_dy) / cadence
    vx = np.where(wet, best_dx, med_dx) / cadence
    quality = np.where(wet, best_score, 0.0)
    return MotionField(block_size, vy, vx, quality, (ny, nx))
