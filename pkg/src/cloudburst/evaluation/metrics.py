"""Forecast verification kernels: CRPS, contingency scores, reliability,
lead time, coordination latency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(Exception):
    pass


# -- CRPS ----------------------------------------------------------------------

def crps(members, obs: float) -> float:
    """Empirical-CDF CRPS: mean |x_i - y| minus half the mean pairwise
    member distance. Reduces to |x - y| for a single member."""
    x = np.asarray(members, dtype=np.float64)
    if x.size == 0:
        raise MetricError("empty ensemble")
    if not (np.isfinite(x).all() and np.isfinite(obs)):
        raise MetricError("non-finite CRPS inputs")
    term1 = np.abs(x - obs).mean()
    term2 = np.abs(x[:, None] - x[None, :]).mean()
    return float(term1 - 0.5 * term2)


def crps_field(member_fields: np.ndarray, obs_field: np.ndarray,
               mask: np.ndarray | None = None) -> float:
    """Mean CRPS over (masked) cells; member_fields is (m, ...)."""
    m = member_fields.shape[0]
    if m == 0:
        raise MetricError("empty ensemble")
    x = member_fields.reshape(m, -1)
    y = obs_field.reshape(-1)
    if mask is not None:
        keep = mask.reshape(-1)
        x = x[:, keep]
        y = y[keep]
    if y.size == 0:
        raise MetricError("no cells to evaluate")
    term1 = np.abs(x - y[None, :]).mean(axis=0)
    term2 = np.abs(x[:, None, :] - x[None, :, :]).mean(axis=(0, 1))
    return float((term1 - 0.5 * term2).mean())


# -- contingency ----------------------------------------------------------------

@dataclass(frozen=True)
class ContingencyTable:
    hits: int = 0
    misses: int = 0
    false_alarms: int = 0
    correct_negatives: int = 0

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        return ContingencyTable(
            self.hits + other.hits, self.misses + other.misses,
            self.false_alarms + other.false_alarms,
            self.correct_negatives + other.correct_negatives)

    @property
    def total(self) -> int:
        return self.hits + self.misses + self.false_alarms + self.correct_negatives

    @property
    def csi(self) -> float | None:
        d = self.hits + self.misses + self.false_alarms
        return self.hits / d if d else None

    @property
    def pod(self) -> float | None:
        d = self.hits + self.misses
        return self.hits / d if d else None

    @property
    def far(self) -> float | None:
        d = self.hits + self.false_alarms
        return self.false_alarms / d if d else None


def contingency(forecast: np.ndarray, observed: np.ndarray,
                threshold: float) -> ContingencyTable:
    if forecast.shape != observed.shape:
        raise MetricError("forecast/observation shape mismatch")
    f = forecast >= threshold
    o = observed >= threshold
    return ContingencyTable(
        hits=int(np.sum(f & o)), misses=int(np.sum(~f & o)),
        false_alarms=int(np.sum(f & ~o)),
        correct_negatives=int(np.sum(~f & ~o)))


# -- reliability ----------------------------------------------------------------

def reliability_index(pairs, bins: int = 10) -> float | None:
    """1 - sum_k (n_k/N) |mean forecast_k - observed freq_k| over
    equal-width bins; 1 is perfect calibration. None for empty input."""
    if len(pairs) == 0:
        return None
    p = np.asarray([x for x, _ in pairs], dtype=np.float64)
    o = np.asarray([y for _, y in pairs], dtype=np.float64)
    if (p < 0).any() or (p > 1).any():
        raise MetricError("probabilities outside [0,1]")
    idx = np.minimum((p * bins).astype(int), bins - 1)
    n = len(p)
    score = 1.0
    for k in range(bins):
        sel = idx == k
        nk = int(sel.sum())
        if nk == 0:
            continue
        score -= (nk / n) * abs(p[sel].mean() - o[sel].mean())
    return float(score)


# -- lead time -------------------------------------------------------------------

@dataclass(frozen=True)
class LeadTimeStats:
    per_event: dict                      # event id -> lead minutes or None
    median_lead: float | None
    warned: int                          # lead >= late_cut
    late: int                            # 0 < lead < late_cut
    missed: int                          # no alert at positive lead

    @property
    def detection_rate(self) -> float | None:
        total = self.warned + self.late + self.missed
        return (self.warned + self.late) / total if total else None


def lead_time(alerts, labels, late_cut: float = 5.0,
              max_lead: float = 45.0) -> LeadTimeStats:
    """Per event: onset minus the earliest warning-or-higher alert covering
    an affected district. Events without a positive-lead alert count as
    missed; leads under `late_cut` count as late warnings.

    Alerts are attributed to an event only when issued after the previous
    event ended and within `max_lead` minutes of onset; anything earlier
    cannot have been caused by the event at the forecast horizon.

    `alerts` is an iterable of (issued_at, district, tier_rank) with
    tier_rank >= 1 meaning warning or higher.
    """
    per_event: dict = {}
    warned = late = missed = 0
    leads = []
    ordered = sorted(labels, key=lambda l: l.onset)
    for i, lab in enumerate(ordered):
        window_start = max(ordered[i - 1].end if i > 0 else -np.inf,
                           lab.onset - max_lead)
        covering = [t for (t, d, rank) in alerts
                    if rank >= 1 and d in lab.affected_districts
                    and window_start < t <= lab.onset]
        lead = (lab.onset - min(covering)) if covering else None
        if lead is None or lead <= 0:
            missed += 1
            per_event[lab.event_id] = None
            continue
        per_event[lab.event_id] = lead
        leads.append(lead)
        if lead < late_cut:
            late += 1
        else:
            warned += 1
    median = float(np.median(leads)) if leads else None
    return LeadTimeStats(per_event, median, warned, late, missed)


# -- coordination latency ---------------------------------------------------------

@dataclass(frozen=True)
class LatencySummary:
    latencies: tuple
    median: float | None
    p95: float | None


def coordination_latency(audit_log) -> LatencySummary:
    """Virtual minutes from the triggering observations' ingestion to alert
    publication, read off alert_issued audit records."""
    lats = []
    for rec in audit_log.select(kind="alert_issued"):
        frame_t = (rec.new or {}).get("frame_t")
        if frame_t is not None:
            lats.append(rec.t - frame_t)
    lats_t = tuple(lats)
    if not lats:
        return LatencySummary((), None, None)
    arr = np.asarray(lats)
    return LatencySummary(lats_t, float(np.median(arr)),
                          float(np.percentile(arr, 95)))
