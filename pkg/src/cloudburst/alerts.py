"""Tiered alert decisions shared by triage, governance and the gateway."""

from __future__ import annotations

from dataclasses import dataclass, field

TIERS = ("watch", "warning", "evacuate")
TIER_RANK = {name: i for i, name in enumerate(TIERS)}


@dataclass(frozen=True)
class AlertDecision:
    district: str
    tier: str
    probability: float
    threshold: float            # the p* in force when the decision was made
    low_confidence: bool = False
    issued_at: float = 0.0
    expiry: float = 0.0
    frame_t: float = 0.0        # ingestion time of the triggering observations
    degraded: bool = False
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must be in [0,1]")

    @property
    def rank(self) -> int:
        return TIER_RANK[self.tier]
