"""Operational societal layer: hydrology, triage, dissemination, routing."""

from ..alerts import AlertDecision, TIERS
from .dissemination import ReachReport, disseminate
from .hydrology import (DepthGrid, HydrologyError, HydrologyModel, RunoffState)
from .routing import DepthSchedule, RoutePlan, check_route, plan_route, plan_routes
from .triage import CostModel, expected_cost, triage

__all__ = [
    "AlertDecision", "CostModel", "DepthGrid", "DepthSchedule",
    "HydrologyError", "HydrologyModel", "ReachReport", "RoutePlan",
    "RunoffState", "TIERS", "check_route", "disseminate", "expected_cost",
    "plan_route", "plan_routes", "triage",
]
