"""Mass-conserving terrain-aware downscaling.

Within each coarse block the fine pattern follows softmax(beta * uplift),
optionally perturbed by a seeded zero-block-sum residual; a final
clip-and-renormalize pass enforces the block mean exactly while keeping
values nonnegative.
"""

from __future__ import annotations

import numpy as np

from .. import rng


class DownscaleError(Exception):
    pass


def _blocks(a: np.ndarray, s: int) -> np.ndarray:
    ny, nx = a.shape
    return a.reshape(ny // s, s, nx // s, s).swapaxes(1, 2)  # (by, bx, s, s)


def _unblocks(b: np.ndarray) -> np.ndarray:
    by, bx, s, _ = b.shape
    return b.swapaxes(1, 2).reshape(by * s, bx * s)


def coarsen(fine: np.ndarray, s: int) -> np.ndarray:
    ny, nx = fine.shape
    if ny % s or nx % s:
        raise DownscaleError("fine grid not divisible by coarse factor")
    return fine.reshape(ny // s, s, nx // s, s).mean(axis=(1, 3))


def terrain_weights(uplift: np.ndarray, factor: int, beta: float) -> np.ndarray:
    """Per-cell softmax(beta * uplift) weights, block mean exactly 1."""
    ub = _blocks(uplift, factor)
    z = beta * ub
    z = z - z.max(axis=(2, 3), keepdims=True)
    w = np.exp(z)
    w = w / w.sum(axis=(2, 3), keepdims=True) * factor ** 2
    return _unblocks(w)


def downscale(coarse: np.ndarray, uplift: np.ndarray, factor: int,
              beta: float = 3.0, residual_sigma: float = 0.05,
              member_seed: int = 0, block_replicate: bool = False) -> np.ndarray:
    """Fine field whose block means equal the coarse field exactly."""
    nyc, nxc = coarse.shape
    ny, nx = uplift.shape
    if (ny, nx) != (nyc * factor, nxc * factor):
        raise DownscaleError(
            f"fine dims {ny}x{nx} != coarse {nyc}x{nxc} times factor {factor}")

    rep = np.repeat(np.repeat(coarse, factor, 0), factor, 1)
    if block_replicate:
        return rep.copy()

    fine = rep * terrain_weights(uplift, factor, beta)

    if residual_sigma > 0:
        gen = rng.stream(member_seed, "downscale-residual")
        noise = gen.normal(0.0, residual_sigma, (ny, nx))
        nb = _blocks(noise, factor)
        nb = nb - nb.mean(axis=(2, 3), keepdims=True)     # zero block sum
        fine = fine + rep * _unblocks(nb)

    fine = np.maximum(fine, 0.0)
    means = coarsen(fine, factor)
    scale = np.where(means > 0, coarse / np.maximum(means, 1e-300), 0.0)
    fine = fine * np.repeat(np.repeat(scale, factor, 0), factor, 1)
    # blocks that clipped to zero but carry coarse mass fall back to uniform
    dead = (means <= 0) & (coarse > 0)
    if dead.any():
        fine = np.where(np.repeat(np.repeat(dead, factor, 0), factor, 1),
                        rep, fine)
    return fine


def downscale_stack(stack: np.ndarray, uplift: np.ndarray, factor: int,
                    beta: float = 3.0, residual_sigma: float = 0.05,
                    seed: int = 0, block_replicate: bool = False,
                    weights: np.ndarray | None = None) -> np.ndarray:
    """Vectorized downscale of a (n, nyc, nxc) stack; same contract per
    slice as `downscale`, one seeded residual draw for the whole stack."""
    n, nyc, nxc = stack.shape
    ny, nx = uplift.shape
    if (ny, nx) != (nyc * factor, nxc * factor):
        raise DownscaleError("stack dims incompatible with uplift grid")

    rep = np.repeat(np.repeat(stack, factor, 1), factor, 2)
    if block_replicate:
        return rep

    if weights is None:
        weights = terrain_weights(uplift, factor, beta)
    fine = rep * weights[None]

    if residual_sigma > 0:
        gen = rng.stream(seed, "downscale-residual-stack")
        noise = gen.normal(0.0, residual_sigma, (n, ny, nx))
        nb = noise.reshape(n, nyc, factor, nxc, factor)
        nb = nb - nb.mean(axis=(2, 4), keepdims=True)
        fine = fine + rep * nb.reshape(n, ny, nx)

    fine = np.maximum(fine, 0.0)
    means = fine.reshape(n, nyc, factor, nxc, factor).mean(axis=(2, 4))
    scale = np.where(means > 0, stack / np.maximum(means, 1e-300), 0.0)
    fine = fine * np.repeat(np.repeat(scale, factor, 1), factor, 2)
    dead = (means <= 0) & (stack > 0)
    if dead.any():
        fine = np.where(np.repeat(np.repeat(dead, factor, 1), factor, 2),
                        rep, fine)
    return fine
