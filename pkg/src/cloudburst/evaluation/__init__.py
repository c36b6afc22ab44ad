"""Verification metrics, benchmark and ablation runners."""

from .metrics import (ContingencyTable, LatencySummary, LeadTimeStats,
                      MetricError, contingency, coordination_latency, crps,
                      crps_field, lead_time, reliability_index)

__all__ = [
    "ContingencyTable", "LatencySummary", "LeadTimeStats", "MetricError",
    "contingency", "coordination_latency", "crps", "crps_field", "lead_time",
    "reliability_index",
]
