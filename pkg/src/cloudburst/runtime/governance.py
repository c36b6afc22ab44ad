"""Governance filter: rate caps, fairness, low-confidence HITL routing.

Every proposed alert passes through Governor.apply and maps to exactly
one outcome; every outcome emits an audit record. Alerts that survive
(allow, HITL approve, HITL escalate-on-timeout) are issued through a
single _issue path so the per-district rate cap can never be bypassed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..alerts import AlertDecision
from ..audit import AuditLog, AuditRecord

HITL_DEFAULTS = ("escalate", "suppress")


@dataclass
class GovernancePolicy:
    max_alert_rate: float = 4.0          # issuances per simulated hour per district
    confidence_delta: float = 0.05       # half-width of the low-confidence band
    hitl_timeout: float = 10.0           # simulated minutes
    hitl_default: str = "escalate"
    fairness_min: int = 1                # guaranteed eligibility per district per hour
    global_hourly_budget: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence_delta <= 0.5:
            raise ValueError("confidence_delta must be in [0, 0.5]")
        if self.hitl_timeout <= 0:
            raise ValueError("hitl_timeout must be > 0")
        if self.max_alert_rate <= 0:
            raise ValueError("max_alert_rate must be > 0")
        if self.hitl_default not in HITL_DEFAULTS:
            raise ValueError(f"hitl_default must be one of {HITL_DEFAULTS}")


@dataclass
class HitlItem:
    item_id: str
    decision: AlertDecision
    created_at: float
    deadline: float
    status: str = "pending"              # -> approved | overridden | timed_out

    TERMINAL = ("approved", "overridden", "timed_out")


@dataclass(frozen=True)
class GovernanceOutcome:
    kind: str                            # allow | veto_rate_cap | veto_fairness | route_to_hitl
    record: AuditRecord
    item: HitlItem | None = None
    issued: AlertDecision | None = None


class Governor:
    def __init__(self, policy: GovernancePolicy, audit: AuditLog,
                 clock: "callable[[], float]", districts: tuple[str, ...] = ()):
        self.policy = policy
        self.audit = audit
        self._clock = clock
        self.districts = tuple(districts)
        self._issued: dict[str, list[float]] = {}
        self._hitl: dict[str, HitlItem] = {}
        self._hitl_counter = 0
        self.on_issue: "callable[[AlertDecision], None] | None" = None

    # -- bookkeeping --------------------------------------------------------
    def _window_count(self, district: str, now: float) -> int:
        return sum(1 for t in self._issued.get(district, []) if now - 60.0 < t <= now)

    def _total_window_count(self, now: float) -> int:
        return sum(self._window_count(d, now) for d in self._issued)

    def issued_alerts(self, district: str) -> list[float]:
        return list(self._issued.get(district, []))

    def pending_items(self) -> list[HitlItem]:
        return [self._hitl[k] for k in sorted(self._hitl)
                if self._hitl[k].status == "pending"]

    def all_items(self) -> list[HitlItem]:
        return [self._hitl[k] for k in sorted(self._hitl)]

    def max_window_rate(self, district: str) -> int:
        """Largest issuance count in any trailing 60-minute window."""
        times = self._issued.get(district, [])
        return max((sum(1 for u in times if t - 60.0 < u <= t) for t in times),
                   default=0)

    # -- the filter ----------------------------------------------------------
    def apply(self, proposed: AlertDecision, actor: str = "triage") -> GovernanceOutcome:
        now = self._clock()
        pol = self.policy
        district = proposed.district

        if self._window_count(district, now) >= pol.max_alert_rate:
            rec = self.audit.append(now, actor, "governance_veto",
                                    f"alert:{district}:{proposed.tier}",
                                    evidence={"p": proposed.probability},
                                    rationale="rate_cap")
            return GovernanceOutcome("veto_rate_cap", rec)

        if pol.global_hourly_budget is not None:
            remaining = pol.global_hourly_budget - self._total_window_count(now)
            reserved = sum(max(0, pol.fairness_min - self._window_count(d, now))
                           for d in self.districts if d != district)
            if (self._window_count(district, now) >= pol.fairness_min
                    and remaining <= reserved):
                rec = self.audit.append(now, actor, "governance_veto",
                                        f"alert:{district}:{proposed.tier}",
                                        evidence={"p": proposed.probability},
                                        rationale="fairness")
                return GovernanceOutcome("veto_fairness", rec)

        band = abs(proposed.probability - proposed.threshold)
        if band <= pol.confidence_delta:
            item = self._enqueue_hitl(proposed, now)
            rec = self.audit.append(now, actor, "hitl_decision",
                                    f"hitl:{item.item_id}",
                                    new={"district": district, "tier": proposed.tier,
                                         "p": proposed.probability,
                                         "deadline": item.deadline},
                                    rationale="queued_low_confidence")
            return GovernanceOutcome("route_to_hitl", rec, item=item)

        issued = self._issue(proposed, now)
        rec = self.audit.append(now, actor, "alert_issued",
                                f"alert:{district}:{proposed.tier}",
                                new={"p": proposed.probability,
                                     "frame_t": proposed.frame_t},
                                rationale="allow")
        return GovernanceOutcome("allow", rec, issued=issued)

    def _enqueue_hitl(self, proposed: AlertDecision, now: float) -> HitlItem:
        item_id = f"hitl-{self._hitl_counter:05d}"
        self._hitl_counter += 1
        item = HitlItem(item_id, replace(proposed, low_confidence=True),
                        created_at=now, deadline=now + self.policy.hitl_timeout)
        self._hitl[item_id] = item
        return item

    def _issue(self, decision: AlertDecision, now: float) -> AlertDecision:
        issued = replace(decision, issued_at=now,
                         expiry=now + max(decision.expiry - decision.issued_at, 30.0))
        self._issued.setdefault(decision.district, []).append(now)
        if self.on_issue is not None:
            self.on_issue(issued)
        return issued

    # -- HITL lifecycle -------------------------------------------------------
    class HitlConflict(Exception):
        pass

    class HitlUnknown(Exception):
        pass

    def resolve_hitl(self, item_id: str, decision: str,
                     actor: str = "operator") -> HitlItem:
        """approve -> issue the alert; override -> suppress it."""
        if item_id not in self._hitl:
            raise Governor.HitlUnknown(item_id)
        item = self._hitl[item_id]
        if item.status != "pending":
            raise Governor.HitlConflict(f"{item_id} already {item.status}")
        if decision not in ("approve", "override"):
            raise ValueError(f"unknown decision {decision!r}")
        now = self._clock()
        item.status = "approved" if decision == "approve" else "overridden"
        issued = None
        if decision == "approve":
            if self._window_count(item.decision.district, now) < self.policy.max_alert_rate:
                issued = self._issue(item.decision, now)
        self.audit.append(now, actor, "hitl_decision", f"hitl:{item_id}",
                          old="pending", new=item.status,
                          evidence={"issued": issued is not None},
                          rationale=decision)
        return item

    def expire(self, now: float, force: bool = False) -> list[HitlItem]:
        """Resolve overdue pending items to the policy default; with
        force, resolve everything still pending (run end leaves no
        unresolved items)."""
        expired = []
        for item_id in sorted(self._hitl):
            item = self._hitl[item_id]
            if item.status != "pending" or (item.deadline > now and not force):
                continue
            item.status = "timed_out"
            issued = None
            if self.policy.hitl_default == "escalate":
                if self._window_count(item.decision.district, now) < self.policy.max_alert_rate:
                    issued = self._issue(item.decision, now)
            self.audit.append(now, "governance", "hitl_decision",
                              f"hitl:{item_id}", old="pending", new="timed_out",
                              evidence={"issued": issued is not None},
                              rationale=f"timeout_{self.policy.hitl_default}")
            expired.append(item)
        return expired
