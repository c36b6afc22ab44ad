"""Two-loop deterministic scheduler.

The fast loop runs every `cadence` simulated minutes: pre-tick hooks
publish sensor observations stamped at the old clock, the clock advances,
and all messages due by the new boundary are delivered in total order,
with same-boundary cascades allowed so the whole perception-to-alert
pipeline completes within one tick. Strategic-layer agents piggyback on
the same delivery mechanism and apply their updates at event boundaries.

Operator decisions (live gateway POSTs or a recorded timeline) enter
through the operator inbox and are applied at tick boundaries, which is
what makes recorded runs replay bit-identically.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .. import rng
from ..audit import AuditLog
from ..grids import BlobStore
from .bus import InProcessBus
from .governance import Governor
from .registry import AgentContext, AgentDescriptor, AgentRegistry

MAX_DELIVERIES_PER_TICK = 100_000


@dataclass
class OperatorDecision:
    t: float
    item_id: str
    decision: str               # approve | override

    def key(self) -> tuple[float, str]:
        return (self.t, self.item_id)


@dataclass
class TickSummary:
    t: float
    delivered: int
    state_version: int
    degraded: bool
    alerts_issued: int
    hitl_pending: int
    events: list = field(default_factory=list)


class Scheduler:
    def __init__(self, bus: InProcessBus, state, registry: AgentRegistry,
                 governor: Governor, audit: AuditLog, blobs: BlobStore,
                 seed: int, cadence: float = 5.0):
        if cadence <= 0:
            raise ValueError("cadence must be positive")
        self.bus = bus
        self.state = state
        self.registry = registry
        self.governor = governor
        self.audit = audit
        self.blobs = blobs
        self.seed = seed
        self.cadence = cadence
        self.degraded_mode = False
        self._pre_tick: list = []
        self._post_tick: list = []
        self._operator_inbox: list[OperatorDecision] = []
        self._operator_applied: list[OperatorDecision] = []
        self._inbox_lock = threading.Lock()
        bus.register_sender("governance")

    def rng_stream(self, *labels: object):
        return rng.stream(self.seed, *labels)

    def register_agent(self, desc: AgentDescriptor) -> None:
        self.registry.register(desc, self.bus.topics)
        self.bus.register_sender(desc.id)

    def add_pre_tick(self, hook) -> None:
        """hook(frame_time) runs before each tick's delivery drain."""
        self._pre_tick.append(hook)

    def add_post_tick(self, hook) -> None:
        """hook(summary) runs after each tick."""
        self._post_tick.append(hook)

    # -- operator channel ---------------------------------------------------
    def submit_operator_decision(self, item_id: str, decision: str,
                                 t: float | None = None) -> OperatorDecision:
        """Queue a HITL decision; applied at the next tick boundary >= t."""
        with self._inbox_lock:
            stamp = self.state.clock if t is None else t
            dec = OperatorDecision(stamp, item_id, decision)
            self._operator_inbox.append(dec)
            return dec

    def operator_timeline(self) -> list[OperatorDecision]:
        return list(self._operator_applied)

    def _apply_operator_decisions(self, up_to: float) -> None:
        with self._inbox_lock:
            due = sorted([d for d in self._operator_inbox if d.t <= up_to],
                         key=OperatorDecision.key)
            self._operator_inbox = [d for d in self._operator_inbox if d.t > up_to]
        for dec in due:
            try:
                self.governor.resolve_hitl(dec.item_id, dec.decision,
                                           actor="operator")
                # the timeline records the boundary the decision took effect
                # at, so a replayed run applies it at the same tick
                self._operator_applied.append(
                    OperatorDecision(up_to, dec.item_id, dec.decision))
            except (Governor.HitlConflict, Governor.HitlUnknown):
                continue

    # -- the fast loop --------------------------------------------------------
    def step(self, world_tick: float | None = None) -> TickSummary:
        tick = self.cadence if world_tick is None else world_tick
        frame_time = self.state.clock
        for hook in self._pre_tick:
            hook(frame_time)

        new_time = frame_time + tick
        self.state.advance_clock(new_time)
        self.bus.now = new_time
        if self.bus.any_fault_in(frame_time, new_time):
            self.degraded_mode = True

        alerts_before = len(list(self.audit.select(kind="alert_issued")))
        delivered = 0
        while True:
            msg = self.bus.pop_next(new_time)
            if msg is None:
                break
            delivered += 1
            if delivered > MAX_DELIVERIES_PER_TICK:
                raise RuntimeError("message cascade did not terminate")
            for agent in self.registry.subscribers(msg.topic):
                if self.bus.agent_dropped(agent.id, new_time):
                    self.degraded_mode = True
                    continue
                ctx = AgentContext(self, agent)
                try:
                    agent.policy(ctx, msg)
                except Exception as exc:  # degrade-and-continue contract
                    agent.degraded = True
                    self.degraded_mode = True
                    self.audit.append(new_time, agent.id, "agent_failure",
                                      f"policy:{msg.topic}",
                                      evidence={"error": repr(exc)},
                                      rationale="degraded_continue")

        self._apply_operator_decisions(new_time)
        self.governor.expire(new_time)

        summary = TickSummary(
            t=new_time, delivered=delivered,
            state_version=self.state.version,
            degraded=self.degraded_mode,
            alerts_issued=len(list(self.audit.select(kind="alert_issued"))) - alerts_before,
            hitl_pending=len(self.governor.pending_items()))
        for hook in self._post_tick:
            hook(summary)
        return summary

    def run(self, n_ticks: int) -> list[TickSummary]:
        return [self.step() for _ in range(n_ticks)]
