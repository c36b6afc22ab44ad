"""Cost-loss alert triage.

The warning threshold is the classical expected-loss minimizer
p* = L_false / (L_false + L_miss); evacuation additionally requires
forecast water depth in the district; a watch fires at half the warning
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..alerts import AlertDecision


@dataclass(frozen=True)
class CostModel:
    l_miss: float = 9.0
    l_false: float = 1.0
    tier_multipliers: dict = field(default_factory=lambda: {
        "watch": 0.2, "warning": 1.0, "evacuate": 3.0})

    def __post_init__(self):
        if self.l_miss <= 0 or self.l_false <= 0:
            raise ValueError("loss terms must be positive")

    @property
    def pstar(self) -> float:
        return self.l_false / (self.l_false + self.l_miss)


def expected_cost(p_event: float, alert: bool, costs: CostModel) -> float:
    """Expected loss of one alert decision against a Bernoulli event."""
    return costs.l_false * (1.0 - p_event) if alert else costs.l_miss * p_event


def triage(prob_p: np.ndarray, depth_vals: np.ndarray | None, zones: np.ndarray,
           district_names: tuple[str, ...], costs: CostModel, pstar: float,
           confidence_delta: float, depth_evac: float, now: float,
           frame_t: float, calibrated: bool = True,
           expiry: float = 30.0) -> list[AlertDecision]:
    """One decision per district whose aggregated probability clears the
    watch floor. District probability is the max over member cells
    (protective aggregation)."""
    decisions = []
    for i, name in enumerate(district_names):
        cells = zones == i
        if not cells.any():
            continue
        p = float(prob_p[cells].max())
        d = float(depth_vals[cells].max()) if depth_vals is not None else 0.0
        if p >= pstar:
            tier = "evacuate" if d >= depth_evac else "warning"
        elif p >= pstar / 2.0:
            tier = "watch"
        else:
            continue
        decisions.append(AlertDecision(
            district=name, tier=tier, probability=p, threshold=pstar,
            low_confidence=abs(p - pstar) <= confidence_delta,
            issued_at=now, expiry=now + expiry, frame_t=frame_t,
            degraded=not calibrated,
            evidence={"depth": d, "p_agg": "max"}))
    return decisions
