"""Synthetic terrain: elevation surface, D8 flow routing, catchments.

Flow direction follows steepest descent to a strictly lower neighbor with
a fixed neighbor-order tie-break, so the drainage graph is acyclic by
construction. Cells with no lower neighbor are sinks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng
from ..grids import GridField

# Neighbor order is part of the tie-break contract: N, NE, E, SE, S, SW, W, NW.
D8_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_D8_DIST = tuple(np.hypot(dy, dx) for dy, dx in D8_OFFSETS)
SINK = -1


@dataclass(frozen=True)
class Terrain:
    elevation: GridField                 # meters
    flow_dir: np.ndarray                 # int8 D8 code, SINK at pits
    flow_acc: np.ndarray                 # upstream cell count incl. self
    catchment_id: np.ndarray             # int label per cell
    uplift: np.ndarray                   # normalized [0,1] orographic proxy

    @property
    def shape(self) -> tuple[int, int]:
        return self.elevation.shape

    def n_catchments(self) -> int:
        return int(self.catchment_id.max()) + 1


def _elevation_surface(ny: int, nx: int, gen: np.random.Generator) -> np.ndarray:
    """Broad Gaussian massifs plus narrow ridgelets on a gentle slope.

    The ridgelets give the surface sharp sub-block relief, which is what
    couples orographic rain enhancement to fine-grid structure.
    """
    yy, xx = np.mgrid[0:ny, 0:nx].astype(np.float64)
    elev = 40.0 * (xx / max(nx - 1, 1))            # regional slope
    for _ in range(6):
        cy, cx = gen.uniform(0, ny), gen.uniform(0, nx)
        amp = gen.uniform(120.0, 420.0)
        sy = gen.uniform(0.12, 0.30) * ny
        sx = gen.uniform(0.12, 0.30) * nx
        elev += amp * np.exp(-0.5 * (((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2))
    for _ in range(10):
        cy, cx = gen.uniform(0.1 * ny, 0.9 * ny), gen.uniform(0.1 * nx, 0.9 * nx)
        amp = gen.uniform(150.0, 300.0)
        theta = gen.uniform(0, np.pi)
        across = gen.uniform(1.5, 3.0)             # narrow axis, cells
        along = gen.uniform(8.0, 22.0)
        ca, sa = np.cos(theta), np.sin(theta)
        u = (yy - cy) * ca + (xx - cx) * sa
        v = -(yy - cy) * sa + (xx - cx) * ca
        elev += amp * np.exp(-0.5 * ((u / along) ** 2 + (v / across) ** 2))
    rough = gen.normal(0.0, 1.0, (ny, nx))
    for axis in (0, 1):                            # 3-cell box smoothing
        rough = (np.roll(rough, 1, axis) + rough + np.roll(rough, -1, axis)) / 3.0
    elev += 90.0 * rough
    return elev


def _flow_directions(elev: np.ndarray) -> np.ndarray:
    ny, nx = elev.shape
    fdir = np.full((ny, nx), SINK, dtype=np.int8)
    best_drop = np.zeros((ny, nx))
    for code, ((dy, dx), dist) in enumerate(zip(D8_OFFSETS, _D8_DIST)):
        shifted = np.full_like(elev, np.inf)   # off-grid is never downhill
        ys = slice(max(0, -dy), ny - max(0, dy))
        xs = slice(max(0, -dx), nx - max(0, dx))
        yd = slice(max(0, dy), ny - max(0, -dy))
        xd = slice(max(0, dx), nx - max(0, -dx))
        shifted[ys, xs] = elev[yd, xd]
        drop = (elev - shifted) / dist
        take = drop > best_drop                  # strict: earlier code wins ties
        fdir[take] = code
        best_drop[take] = drop[take]
    return fdir


def _accumulate(elev: np.ndarray, fdir: np.ndarray) -> np.ndarray:
    ny, nx = elev.shape
    acc = np.ones((ny, nx), dtype=np.int64)
    # higher cells drain first; (row, col) breaks elevation ties
    order = np.lexsort((np.arange(ny * nx), -elev.ravel()))
    for idx in order:
        y, x = divmod(int(idx), nx)
        code = fdir[y, x]
        if code == SINK:
            continue
        dy, dx = D8_OFFSETS[code]
        acc[y + dy, x + dx] += acc[y, x]
    return acc


def _catchments(fdir: np.ndarray) -> np.ndarray:
    ny, nx = fdir.shape
    label = np.full((ny, nx), -1, dtype=np.int64)
    sinks = [(y, x) for y in range(ny) for x in range(nx) if fdir[y, x] == SINK]
    for i, (y, x) in enumerate(sinks):
        label[y, x] = i
    for y in range(ny):
        for x in range(nx):
            if label[y, x] >= 0:
                continue
            path = []
            cy, cx = y, x
            while label[cy, cx] < 0:
                path.append((cy, cx))
                dy, dx = D8_OFFSETS[fdir[cy, cx]]
                cy, cx = cy + dy, cx + dx
            for py, px in path:
                label[py, px] = label[cy, cx]
    return label


def generate_terrain(ny: int, nx: int, seed: int, cell_km: float = 1.0) -> Terrain:
    gen = rng.stream(seed, "terrain")
    elev = _elevation_surface(ny, nx, gen)
    fdir = _flow_directions(elev)
    acc = _accumulate(elev, fdir)
    catch = _catchments(fdir)
    lo, hi = float(elev.min()), float(elev.max())
    uplift = (elev - lo) / (hi - lo) if hi > lo else np.zeros_like(elev)
    for arr in (fdir, acc, catch, uplift):
        arr.flags.writeable = False
    return Terrain(GridField(elev, cell_km=cell_km, variable="elevation", units="m"),
                   fdir, acc, catch, uplift)


def downstream_steps(terrain: Terrain, y: int, x: int) -> int:
    """Steps along flow_dir until a sink; bounded by cell count if acyclic."""
    ny, nx = terrain.shape
    steps = 0
    while terrain.flow_dir[y, x] != SINK:
        dy, dx = D8_OFFSETS[terrain.flow_dir[y, x]]
        y, x = y + dy, x + dx
        steps += 1
        if steps > ny * nx:
            raise RuntimeError("flow_dir contains a cycle")
    return steps
