"""Time-dependent evacuation routing over the flooding road network.

Label-setting earliest-arrival search without waiting: an edge is
traversable at entry time t iff the water depth at both endpoints is
below the edge's failure threshold at t. Ties break by (arrival time,
node sequence lexicographic). A plan is viable iff it reaches a shelter
inside the evacuation window; the independent replay checker is what the
viability metric trusts.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..world.community import RoadGraph


@dataclass(frozen=True)
class RoutePlan:
    zone: str
    origin: str
    nodes: tuple[str, ...]
    departure: float
    arrival: float
    passability_margin: float
    viable: bool


class DepthSchedule:
    """Stepwise-constant depth lookup over tick frames."""

    def __init__(self, frames: list[tuple[float, np.ndarray]]):
        if not frames:
            raise ValueError("empty depth schedule")
        self.times = [t for t, _ in frames]
        self.fields = [f for _, f in frames]

    @staticmethod
    def zero(shape: tuple[int, int], t0: float = 0.0) -> "DepthSchedule":
        return DepthSchedule([(t0, np.zeros(shape))])

    def at(self, t: float) -> np.ndarray:
        idx = 0
        for i, ft in enumerate(self.times):
            if ft <= t:
                idx = i
            else:
                break
        return self.fields[idx]

    def depth_at(self, cell: tuple[int, int], t: float) -> float:
        return float(self.at(t)[cell[0], cell[1]])


def plan_route(roads: RoadGraph, origin: str, shelters: tuple[str, ...],
               depart: float, schedule: DepthSchedule, window: float,
               zone: str = "") -> RoutePlan:
    shelter_set = set(shelters)
    deadline = depart + window

    def passable(a: str, b: str, t: float, d_crit: float) -> bool:
        return (schedule.depth_at(roads.nodes[a], t) < d_crit
                and schedule.depth_at(roads.nodes[b], t) < d_crit)

    best_fail = RoutePlan(zone, origin, (origin,), depart, float("inf"),
                          0.0, False)
    if origin in shelter_set:
        return RoutePlan(zone, origin, (origin,), depart, depart,
                         float("inf"), True)

    heap: list[tuple[float, tuple[str, ...]]] = [(depart, (origin,))]
    visited: set[str] = set()
    while heap:
        arrival, path = heapq.heappop(heap)
        node = path[-1]
        if node in visited:
            continue
        visited.add(node)
        if node in shelter_set:
            margin = _replay_margin(roads, path, depart, schedule)
            return RoutePlan(zone, origin, path, depart, arrival,
                             margin, arrival <= deadline)
        for edge in roads.neighbors(node):
            if edge.b in visited:
                continue
            if not passable(edge.a, edge.b, arrival, edge.d_crit):
                continue
            t2 = arrival + edge.travel_min
            if t2 > deadline:
                continue
            heapq.heappush(heap, (t2, path + (edge.b,)))
    return best_fail


def _replay_margin(roads: RoadGraph, nodes: tuple[str, ...], depart: float,
                   schedule: DepthSchedule) -> float:
    margin = float("inf")
    t = depart
    for a, b in zip(nodes, nodes[1:]):
        edge = next(e for e in roads.neighbors(a) if e.b == b)
        da = schedule.depth_at(roads.nodes[a], t)
        db = schedule.depth_at(roads.nodes[b], t)
        margin = min(margin, edge.d_crit - max(da, db))
        t += edge.travel_min
    return margin


def check_route(roads: RoadGraph, plan: RoutePlan, schedule: DepthSchedule,
                window: float) -> bool:
    """Independent replay: consecutive nodes must be edges, every edge
    passable at its entry time, and the shelter reached inside the window."""
    if len(plan.nodes) == 0:
        return False
    t = plan.departure
    for a, b in zip(plan.nodes, plan.nodes[1:]):
        edge = next((e for e in roads.neighbors(a) if e.b == b), None)
        if edge is None:
            return False
        da = schedule.depth_at(roads.nodes[a], t)
        db = schedule.depth_at(roads.nodes[b], t)
        if da >= edge.d_crit or db >= edge.d_crit:
            return False
        t += edge.travel_min
    return t <= plan.departure + window


def plan_routes(roads: RoadGraph, zone_origins: dict, shelters: tuple[str, ...],
                affected_zones: list[str], depart: float,
                schedule: DepthSchedule, window: float) -> list[RoutePlan]:
    plans = []
    for zone in sorted(affected_zones):
        plans.append(plan_route(roads, zone_origins[zone], shelters, depart,
                                schedule, window, zone=zone))
    return plans
