"""Deterministic virtual-time execution substrate."""

from .bus import BusError, InProcessBus, Transport, UnknownSender, UnknownTopic
from .governance import GovernancePolicy, GovernanceOutcome, Governor, HitlItem
from .messages import DeliveryReceipt, FaultHandle, FaultSpec, Message
from .registry import (AgentContext, AgentDescriptor, AgentRegistry, LAYERS,
                       ObservationBinding, RegistryError)
from .scheduler import OperatorDecision, Scheduler, TickSummary
from .state import SharedState, Snapshot

__all__ = [
    "AgentContext", "AgentDescriptor", "AgentRegistry", "BusError",
    "DeliveryReceipt", "FaultHandle", "FaultSpec", "GovernanceOutcome",
    "GovernancePolicy", "Governor", "HitlItem", "InProcessBus", "LAYERS",
    "Message", "ObservationBinding", "OperatorDecision", "RegistryError",
    "Scheduler", "SharedState", "Snapshot", "TickSummary", "Transport",
    "UnknownSender", "UnknownTopic",
]
