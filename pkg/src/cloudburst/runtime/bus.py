"""Deterministic in-process message bus behind an abstract transport contract.

Delivery order among queued messages is the total order
(deliver_at, sender id, seq). Fault specs modify scheduling at publish
time: dropout silences a sender, delay shifts deliver_at, loss drops
messages via a per-fault seeded stream.
"""

from __future__ import annotations

import heapq
from abc import ABC, abstractmethod

from .. import rng
from .messages import DeliveryReceipt, FaultHandle, FaultSpec, Message


class BusError(Exception):
    pass


class UnknownTopic(BusError):
    pass


class UnknownSender(BusError):
    pass


class Transport(ABC):
    """Contract the scheduler programs against; only one implementation
    exists here, but a networked transport would slot in behind it."""

    @abstractmethod
    def publish(self, topic: str, sender: str, observation: object,
                action: object = None, delay: float = 0.0) -> DeliveryReceipt: ...

    @abstractmethod
    def pop_next(self, up_to: float) -> Message | None: ...

    @abstractmethod
    def inject_fault(self, spec: FaultSpec) -> FaultHandle: ...


class InProcessBus(Transport):
    def __init__(self, seed: int = 0):
        self.now: float = 0.0
        self._topics: set[str] = set()
        self._senders: set[str] = set()
        self._seq: dict[str, int] = {}
        self._heap: list[tuple[tuple[float, str, int], Message]] = []
        self._faults: dict[int, FaultSpec] = {}
        self._fault_rng: dict[int, object] = {}
        self._next_fault_id = 0
        self._seed = seed
        self.delivered_count = 0

    # -- topology ---------------------------------------------------------
    def declare_topic(self, topic: str) -> None:
        self._topics.add(topic)

    def register_sender(self, sender: str) -> None:
        self._senders.add(sender)
        self._seq.setdefault(sender, 0)

    @property
    def topics(self) -> frozenset[str]:
        return frozenset(self._topics)

    # -- faults -----------------------------------------------------------
    def inject_fault(self, spec: FaultSpec) -> FaultHandle:
        if spec.window[0] < self.now:
            raise BusError("fault window must start at or after the current clock")
        if spec.kind == "agent_dropout":
            if spec.target not in self._senders:
                raise BusError(f"unknown fault target agent {spec.target!r}")
        elif spec.target not in self._topics and spec.target not in self._senders:
            raise BusError(f"unknown fault target {spec.target!r}")
        fid = self._next_fault_id
        self._next_fault_id += 1
        self._faults[fid] = spec
        self._fault_rng[fid] = rng.stream(self._seed, "fault", fid)
        return FaultHandle(fid, spec, self._cancel_fault)

    def _cancel_fault(self, fault_id: int) -> None:
        self._faults.pop(fault_id, None)
        self._fault_rng.pop(fault_id, None)

    def agent_dropped(self, agent_id: str, t: float) -> bool:
        return any(s.kind == "agent_dropout" and s.target == agent_id
                   and s.active_at(t) for s in self._faults.values())

    def any_fault_in(self, start: float, end: float) -> bool:
        return any(s.window[0] < end and s.window[1] > start
                   for s in self._faults.values())

    # -- publish/deliver --------------------------------------------------
    def publish(self, topic: str, sender: str, observation: object,
                action: object = None, delay: float = 0.0,
                issued_at: float | None = None) -> DeliveryReceipt:
        if topic not in self._topics:
            raise UnknownTopic(f"topic {topic!r} not declared")
        if sender not in self._senders:
            raise UnknownSender(f"sender {sender!r} not registered")
        issued = self.now if issued_at is None else issued_at
        deliver = issued + max(0.0, delay)

        if self.agent_dropped(sender, issued):
            return DeliveryReceipt(deliver, dropped=True, reason="agent_dropout")
        for fid in sorted(self._faults):
            spec = self._faults[fid]
            if not spec.active_at(issued):
                continue
            if spec.target not in (topic, sender):
                continue
            if spec.kind == "message_delay":
                deliver += spec.magnitude
            elif spec.kind == "message_loss":
                if self._fault_rng[fid].random() < spec.magnitude:
                    return DeliveryReceipt(deliver, dropped=True,
                                           reason="message_loss")

        seq = self._seq[sender]
        self._seq[sender] = seq + 1
        msg = Message(topic=topic, sender=sender, observation=observation,
                      action=action, issued_at=issued, deliver_at=deliver,
                      seq=seq)
        heapq.heappush(self._heap, (msg.sort_key(), msg))
        return DeliveryReceipt(deliver, dropped=False)

    def pop_next(self, up_to: float) -> Message | None:
        """Next message with deliver_at <= up_to, in total order."""
        if self._heap and self._heap[0][0][0] <= up_to:
            self.delivered_count += 1
            return heapq.heappop(self._heap)[1]
        return None

    def pending(self) -> int:
        return len(self._heap)
