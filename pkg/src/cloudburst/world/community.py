"""Population grid, districts, road network and shelters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grids import GridField
from .terrain import Terrain


@dataclass(frozen=True)
class RoadEdge:
    a: str
    b: str
    travel_min: float
    d_crit: float


@dataclass(frozen=True)
class RoadGraph:
    nodes: dict                          # node id -> (y, x)
    adjacency: dict                      # node id -> tuple of RoadEdge

    def neighbors(self, node: str):
        return self.adjacency.get(node, ())

    def node_ids(self) -> list[str]:
        return sorted(self.nodes)


@dataclass(frozen=True)
class Community:
    population: GridField                # persons per cell
    zones: np.ndarray                    # district index per cell, -1 unpopulated
    district_names: tuple[str, ...]
    roads: RoadGraph
    shelters: tuple[str, ...]
    zone_origins: dict                   # district name -> origin node id

    def district_of_cell(self, y: int, x: int) -> str | None:
        z = int(self.zones[y, x])
        return self.district_names[z] if z >= 0 else None

    def district_population(self, name: str) -> float:
        idx = self.district_names.index(name)
        return float(self.population.values[self.zones == idx].sum())

    def district_cells(self, name: str) -> np.ndarray:
        idx = self.district_names.index(name)
        return self.zones == idx


def _node_id(y: int, x: int) -> str:
    return f"n{y:03d}_{x:03d}"


def build_road_graph(terrain: Terrain, spacing: int, travel_min: float,
                     d_crit: float) -> RoadGraph:
    ny, nx = terrain.shape
    ys = range(spacing // 2, ny, spacing)
    xs = range(spacing // 2, nx, spacing)
    nodes = {_node_id(y, x): (y, x) for y in ys for x in xs}
    adjacency: dict[str, list[RoadEdge]] = {n: [] for n in nodes}
    ys_list, xs_list = list(ys), list(xs)
    for yi, y in enumerate(ys_list):
        for xi, x in enumerate(xs_list):
            here = _node_id(y, x)
            if xi + 1 < len(xs_list):
                there = _node_id(y, xs_list[xi + 1])
                e = RoadEdge(here, there, travel_min, d_crit)
                adjacency[here].append(e)
                adjacency[there].append(RoadEdge(there, here, travel_min, d_crit))
            if yi + 1 < len(ys_list):
                there = _node_id(ys_list[yi + 1], x)
                e = RoadEdge(here, there, travel_min, d_crit)
                adjacency[here].append(e)
                adjacency[there].append(RoadEdge(there, here, travel_min, d_crit))
    adj = {n: tuple(sorted(edges, key=lambda e: e.b))
           for n, edges in adjacency.items()}
    return RoadGraph(nodes=nodes, adjacency=adj)


def _static_reachable(roads: RoadGraph, start: str) -> set[str]:
    seen = {start}
    heap = [start]
    while heap:
        node = heap.pop()
        for e in roads.neighbors(node):
            if e.b not in seen:
                seen.add(e.b)
                heap.append(e.b)
    return seen


def generate_community(terrain: Terrain, gen: np.random.Generator,
                       n_districts: int = 6, road_spacing: int = 4,
                       population_total: float = 50_000.0,
                       d_crit: float = 0.3,
                       edge_travel_min: float = 4.0) -> Community:
    ny, nx = terrain.shape
    elev = terrain.elevation.values
    lo, hi = elev.min(), elev.max()
    valley = 1.0 - (elev - lo) / (hi - lo + 1e-12)
    texture = gen.uniform(0.4, 1.0, (ny, nx))
    weight = np.maximum(valley - 0.35, 0.0) ** 2 * texture
    if weight.sum() == 0:
        weight = np.ones((ny, nx))
    pop = population_total * weight / weight.sum()
    pop[pop < population_total / (ny * nx) * 0.05] = 0.0
    population = GridField(pop, terrain.elevation.cell_km,
                           variable="population", units="persons")

    populated = np.argwhere(pop > 0)
    if len(populated) < n_districts:
        raise ValueError("too few populated cells for the district count")
    centers = populated[gen.choice(len(populated), n_districts, replace=False)]
    zones = np.full((ny, nx), -1, dtype=np.int64)
    pts = np.argwhere(pop > 0)
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    nearest = d2.argmin(axis=1)
    zones[pts[:, 0], pts[:, 1]] = nearest
    district_names = tuple(f"d{i}" for i in range(n_districts))

    roads = build_road_graph(terrain, road_spacing, edge_travel_min, d_crit)
    node_list = roads.node_ids()
    node_pos = np.array([roads.nodes[n] for n in node_list], dtype=np.float64)

    zone_origins = {}
    for i, name in enumerate(district_names):
        cells = np.argwhere(zones == i)
        w = pop[cells[:, 0], cells[:, 1]]
        centroid = (cells * w[:, None]).sum(axis=0) / w.sum()
        dist = np.abs(node_pos - centroid).sum(axis=1)
        zone_origins[name] = node_list[int(dist.argmin())]

    # shelters sit on high ground, one per district zone area
    shelters = []
    for i, name in enumerate(district_names):
        cells = np.argwhere(zones == i)
        centroid = cells.mean(axis=0)
        dist = np.abs(node_pos - centroid).sum(axis=1)
        near = [node_list[j] for j in np.argsort(dist, kind="stable")[:12]]
        best = max(near, key=lambda n: (elev[roads.nodes[n]], n))
        shelters.append(best)
    shelters = tuple(sorted(set(shelters)))

    for name in district_names:
        reach = _static_reachable(roads, zone_origins[name])
        if not any(s in reach for s in shelters):
            raise ValueError(f"zone {name} cannot reach any shelter on dry roads")

    zones.flags.writeable = False
    return Community(population=population, zones=zones,
                     district_names=district_names, roads=roads,
                     shelters=shelters, zone_origins=zone_origins)
