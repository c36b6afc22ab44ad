"""Seeded synthetic environment: terrain, storms, sensors, community."""

from .cells import ConvectiveCell
from .community import Community, RoadEdge, RoadGraph, build_road_graph
from .scenario import (EventLabel, Scenario, ScenarioError, TruthFrame,
                       generate_scenario, label_events, observe, save_scenario,
                       truth_step)
from .sensors import (GaugeReading, ObservationSet, SensorSuite, block_mean,
                      sense)
from .terrain import D8_OFFSETS, SINK, Terrain, downstream_steps, generate_terrain

__all__ = [
    "Community", "ConvectiveCell", "D8_OFFSETS", "EventLabel", "GaugeReading",
    "ObservationSet", "RoadEdge", "RoadGraph", "SINK", "Scenario",
    "ScenarioError", "SensorSuite", "Terrain", "TruthFrame", "block_mean",
    "build_road_graph", "downstream_steps", "generate_scenario",
    "generate_terrain", "label_events", "observe", "save_scenario", "sense",
    "truth_step",
]
