"""Alert dissemination across channels and population reach accounting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import Channel


@dataclass(frozen=True)
class ReachReport:
    alert_key: str
    district: str
    per_channel_pop: dict
    union_reach: float                   # fraction of affected population
    window: float
    delay_medians: dict = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        if not self.degenerate and not 0.0 <= self.union_reach <= 1.0:
            raise ValueError("reach fraction must be in [0,1]")


def disseminate(alert_key: str, district: str, district_mask: np.ndarray,
                population: np.ndarray, channels: list[Channel],
                gen: np.random.Generator, window: float = 10.0) -> ReachReport:
    """Deliver one alert over every channel.

    Per channel, each populated cell in the district is covered with the
    channel's coverage probability and, if covered, hears the alert after
    a sampled delay; the reach is the union of populations reached within
    the window.
    """
    cells = np.argwhere(district_mask & (population > 0))
    pop = population[cells[:, 0], cells[:, 1]] if len(cells) else np.array([])
    total = float(pop.sum())
    if total <= 0:
        return ReachReport(alert_key, district, {c.name: 0.0 for c in channels},
                           union_reach=1.0, window=window, degenerate=True)

    union = np.zeros(len(cells), dtype=bool)
    per_channel = {}
    delay_medians = {}
    for ch in channels:
        covered = gen.random(len(cells)) < ch.coverage
        if ch.delay_kind == "fixed":
            delays = np.full(len(cells), ch.delay_param)
        elif ch.delay_kind == "exp":
            delays = gen.exponential(ch.delay_param, len(cells))
        else:
            raise ValueError(f"unknown delay kind {ch.delay_kind!r}")
        delivered = covered & (delays <= window)
        per_channel[ch.name] = float(pop[delivered].sum())
        delay_medians[ch.name] = float(np.median(delays[delivered])) \
            if delivered.any() else None
        union |= delivered
    return ReachReport(alert_key, district, per_channel,
                       union_reach=float(pop[union].sum()) / total,
                       window=window, delay_medians=delay_medians)
