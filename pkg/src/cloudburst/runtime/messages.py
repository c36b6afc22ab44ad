"""Message envelope routed on the bus."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..wire import canonical_json


@dataclass(frozen=True)
class Message:
    """One bus message: observation plus optional proposed action.

    (issued_at, sender, seq) is globally unique; deliver_at >= issued_at.
    """

    topic: str
    sender: str
    observation: object
    action: object = None
    issued_at: float = 0.0
    deliver_at: float = 0.0
    seq: int = 0

    def __post_init__(self):
        if self.deliver_at < self.issued_at:
            raise ValueError("deliver_at must be >= issued_at")

    def sort_key(self) -> tuple[float, str, int]:
        return (self.deliver_at, self.sender, self.seq)

    def to_wire(self) -> str:
        return canonical_json({
            "topic": self.topic, "sender": self.sender,
            "observation": self.observation, "action": self.action,
            "issued_at": self.issued_at, "deliver_at": self.deliver_at,
            "seq": self.seq,
        })


@dataclass(frozen=True)
class DeliveryReceipt:
    delivery_time: float
    dropped: bool = False
    reason: str = ""


@dataclass
class FaultSpec:
    """One injected disturbance: agent dropout, message delay, or loss."""

    kind: str                       # agent_dropout | message_delay | message_loss
    target: str                     # agent id or topic name
    window: tuple[float, float]     # [start, end) virtual minutes
    magnitude: float = 0.0          # delay minutes or loss probability

    KINDS = ("agent_dropout", "message_delay", "message_loss")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        start, end = self.window
        if not start < end:
            raise ValueError("fault window start must be < end")
        if self.kind == "message_loss" and not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("loss probability must be in [0,1]")
        if self.kind == "message_delay" and self.magnitude < 0:
            raise ValueError("delay must be >= 0")

    def active_at(self, t: float) -> bool:
        return self.window[0] <= t < self.window[1]


@dataclass
class FaultHandle:
    fault_id: int
    spec: FaultSpec
    _cancel: object = field(default=None, repr=False)

    def cancel(self) -> None:
        if self._cancel is not None:
            self._cancel(self.fault_id)
