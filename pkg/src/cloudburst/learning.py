"""Strategic layer: probability recalibration, threshold adaptation, and
audit summarization. Updates run only between events, never mid-event.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audit import AuditLog
from .response.triage import CostModel


@dataclass(frozen=True)
class AdaptationPolicy:
    eta: float = 0.1                     # learning rate, also the p* probe step
    pstar_min: float = 0.05
    pstar_max: float = 0.35
    spread_min: float = 0.5
    spread_max: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("learning rate must be in (0, 1]")
        if not 0.0 <= self.pstar_min < self.pstar_max <= 1.0:
            raise ValueError("p* bounds must satisfy 0 <= min < max <= 1")
        if not 0.0 < self.spread_min <= self.spread_max:
            raise ValueError("spread bounds must be positive and ordered")

    def clamp_pstar(self, p: float) -> float:
        return min(max(p, self.pstar_min), self.pstar_max)

    def clamp_spread(self, s: float) -> float:
        return min(max(s, self.spread_min), self.spread_max)


def _pava(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators: nondecreasing projection under L2."""
    v = values.astype(np.float64).copy()
    w = weights.astype(np.float64).copy()
    n = len(v)
    i = 0
    while i < n - 1:
        if v[i] > v[i + 1] + 1e-15:
            pooled = (v[i] * w[i] + v[i + 1] * w[i + 1]) / (w[i] + w[i + 1])
            v[i] = v[i + 1] = pooled
            w_new = w[i] + w[i + 1]
            w[i] = w[i + 1] = w_new
            j = i
            while j > 0 and v[j - 1] > v[j] + 1e-15:
                pooled = (v[j - 1] * w[j - 1] + v[j] * w[j]) / (w[j - 1] + w[j])
                v[j - 1] = v[j] = pooled
                w[j - 1] = w[j] = w[j - 1] + w[j]
                j -= 1
            i = max(j, 0)
        else:
            i += 1
    return v


@dataclass(frozen=True)
class CalibrationMap:
    """Piecewise-linear probability remapping on K equally spaced nodes.

    The default map is the exact identity; updates nudge node values
    toward observed frequencies and re-impose monotonicity.
    """

    nodes: np.ndarray                    # K fixed x positions in [0,1]
    mapped: np.ndarray                   # f-hat per node, in [0,1], nondecreasing
    counts: np.ndarray
    successes: np.ndarray
    version: int = 0

    def __post_init__(self):
        self.nodes.flags.writeable = False
        self.mapped.flags.writeable = False
        self.counts.flags.writeable = False
        self.successes.flags.writeable = False
        if (self.mapped < 0).any() or (self.mapped > 1).any():
            raise ValueError("mapped values must lie in [0,1]")
        if (np.diff(self.mapped) < -1e-12).any():
            raise ValueError("mapped values must be nondecreasing")

    @staticmethod
    def identity(bins: int = 10) -> "CalibrationMap":
        nodes = np.linspace(0.0, 1.0, bins)
        return CalibrationMap(nodes, nodes.copy(),
                              np.zeros(bins, dtype=np.int64),
                              np.zeros(bins, dtype=np.float64))

    def apply(self, p: np.ndarray | float):
        return np.interp(p, self.nodes, self.mapped)

    def bin_of(self, p: np.ndarray) -> np.ndarray:
        """Nearest-node bin assignment."""
        half = 0.5 * (self.nodes[1] - self.nodes[0])
        return np.clip(np.floor((np.asarray(p) + half) / (2 * half)).astype(int),
                       0, len(self.nodes) - 1)


def recalibrate(cmap: CalibrationMap, pairs: list[tuple[float, int]],
                eta: float = 0.1) -> CalibrationMap:
    """Nudge each touched bin toward its accumulated observed frequency,
    then project back to a monotone map.

    The bin frequency runs over everything the bin has seen, so repeated
    updates converge to the true rate; eta damps each step. Empty input
    returns the map unchanged.
    """
    if not pairs:
        return cmap
    p = np.array([x for x, _ in pairs], dtype=np.float64)
    o = np.array([y for _, y in pairs], dtype=np.float64)
    bins = cmap.bin_of(p)
    mapped = cmap.mapped.copy()
    counts = cmap.counts.copy()
    succ = cmap.successes.copy()
    for k in range(len(cmap.nodes)):
        sel = bins == k
        n = int(sel.sum())
        if n == 0:
            continue
        counts[k] += n
        succ[k] += float(o[sel].sum())
        obs = succ[k] / counts[k]
        mapped[k] = mapped[k] + eta * (obs - mapped[k])
    mapped = np.clip(_pava(mapped, np.maximum(counts, 1.0)), 0.0, 1.0)
    return CalibrationMap(cmap.nodes, mapped, counts, succ, cmap.version + 1)


def adapt_threshold(pstar: float, records: list[tuple[float, int]],
                    costs: CostModel, policy: AdaptationPolicy
                    ) -> tuple[float, str]:
    """One-step empirical cost descent on the warning threshold.

    Probes p* +/- eta on the event's recorded (probability, outcome)
    pairs; moves in the strictly improving direction, clamped to bounds.
    Returns (new p*, rationale).
    """
    pos = sum(1 for _, o in records if o == 1)
    neg = sum(1 for _, o in records if o == 0)
    if pos == 0 or neg == 0:
        return pstar, "insufficient_evidence"

    def cost(theta: float) -> float:
        c = 0.0
        for p, o in records:
            if p >= theta:
                c += costs.l_false * (1 - o)
            else:
                c += costs.l_miss * o
        return c

    here = cost(pstar)
    up = policy.clamp_pstar(pstar + policy.eta)
    down = policy.clamp_pstar(pstar - policy.eta)
    cost_up, cost_down = cost(up), cost(down)
    if cost_up < here and cost_up <= cost_down:
        return up, "cost_descent_up"
    if cost_down < here:
        return down, "cost_descent_down"
    return pstar, "at_local_minimum"


@dataclass(frozen=True)
class ChangeSummary:
    param_trajectories: dict
    veto_counts: dict
    hitl_outcomes: dict
    failures: list
    alerts_issued: int
    window: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {"param_trajectories": self.param_trajectories,
                "veto_counts": self.veto_counts,
                "hitl_outcomes": self.hitl_outcomes,
                "failures": self.failures,
                "alerts_issued": self.alerts_issued,
                "window": list(self.window) if self.window else None}

    def to_text(self) -> str:
        lines = ["audit summary"]
        if self.window:
            lines[0] += f" [{self.window[0]:g}..{self.window[1]:g} min]"
        lines.append(f"alerts issued: {self.alerts_issued}")
        lines.append("parameter trajectories:")
        for subject in sorted(self.param_trajectories):
            steps = self.param_trajectories[subject]
            chain = " -> ".join(str(s["new"]) for s in steps)
            first = steps[0]["old"]
            lines.append(f"  {subject}: {first} -> {chain} ({len(steps)} changes)")
        lines.append("governance vetoes: " + (", ".join(
            f"{k}={v}" for k, v in sorted(self.veto_counts.items())) or "none"))
        lines.append("hitl outcomes: " + (", ".join(
            f"{k}={v}" for k, v in sorted(self.hitl_outcomes.items())) or "none"))
        lines.append(f"agent failures: {len(self.failures)}")
        for f in self.failures:
            lines.append(f"  t={f['t']:g} {f['actor']}")
        return "\n".join(lines) + "\n"


def summarize_audit(log: AuditLog,
                    window: tuple[float, float] | None = None) -> ChangeSummary:
    recs = [r for r in log.records
            if window is None or window[0] <= r.t <= window[1]]
    trajectories: dict = {}
    vetoes: dict = {}
    hitl: dict = {}
    failures = []
    alerts = 0
    for r in recs:
        if r.kind == "param_change":
            trajectories.setdefault(r.subject, []).append(
                {"t": r.t, "old": r.old, "new": r.new})
        elif r.kind == "governance_veto":
            vetoes[r.rationale] = vetoes.get(r.rationale, 0) + 1
        elif r.kind == "hitl_decision" and r.new in ("approved", "overridden",
                                                     "timed_out"):
            hitl[str(r.new)] = hitl.get(str(r.new), 0) + 1
        elif r.kind == "agent_failure":
            failures.append({"t": r.t, "actor": r.actor})
        elif r.kind == "alert_issued":
            alerts += 1
    return ChangeSummary(trajectories, vetoes, hitl, failures, alerts, window)
