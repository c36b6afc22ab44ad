"""Agent registry, observation bindings, and the context handed to policies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, TYPE_CHECKING

from .messages import Message
from .state import Snapshot

if TYPE_CHECKING:
    from .scheduler import Scheduler

LAYERS = ("perceptual", "operational", "strategic")


class RegistryError(Exception):
    pass


@dataclass
class ObservationBinding:
    """Projection selecting which shared-state entries an agent may read."""

    agent_id: str
    keys: tuple[str, ...]

    def project(self, snap: Snapshot) -> dict:
        return {k: snap.get(k) for k in self.keys if k in snap}


@dataclass
class AgentDescriptor:
    id: str
    layer: str
    subscriptions: tuple[str, ...]
    policy: Callable[["AgentContext", Message], None]
    binding: ObservationBinding | None = None
    degraded: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise RegistryError(f"layer must be one of {LAYERS}, got {self.layer!r}")


class AgentRegistry:
    def __init__(self):
        self._agents: dict[str, AgentDescriptor] = {}
        self._by_topic: dict[str, list[str]] = {}

    def register(self, desc: AgentDescriptor, declared_topics: frozenset[str]) -> None:
        if desc.id in self._agents:
            raise RegistryError(f"duplicate agent id {desc.id!r}")
        for topic in desc.subscriptions:
            if topic not in declared_topics:
                raise RegistryError(
                    f"agent {desc.id!r} subscribes to undeclared topic {topic!r}")
        self._agents[desc.id] = desc
        for topic in desc.subscriptions:
            self._by_topic.setdefault(topic, []).append(desc.id)
            self._by_topic[topic].sort()

    def get(self, agent_id: str) -> AgentDescriptor:
        return self._agents[agent_id]

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self._agents

    def subscribers(self, topic: str) -> list[AgentDescriptor]:
        return [self._agents[a] for a in self._by_topic.get(topic, [])]

    def all(self) -> list[AgentDescriptor]:
        return [self._agents[a] for a in sorted(self._agents)]

    def degraded_agents(self) -> list[str]:
        return [a.id for a in self.all() if a.degraded]


class AgentContext:
    """Single-policy-call view of the runtime.

    Policies read their bound state projection, publish messages, write
    state entries, and propose alerts (which pass through governance
    before anything mutates the alert registry).
    """

    def __init__(self, scheduler: "Scheduler", agent: AgentDescriptor):
        self._sched = scheduler
        self.agent = agent
        self._snap = scheduler.state.snapshot()

    @property
    def now(self) -> float:
        return self._sched.state.clock

    @property
    def blobs(self):
        return self._sched.blobs

    @property
    def audit(self):
        return self._sched.audit

    def observe(self) -> dict:
        if self.agent.binding is None:
            return {}
        return self.agent.binding.project(self._snap)

    def state_get(self, key: str, default: object = None) -> object:
        return self._snap.get(key, default)

    def publish(self, topic: str, observation: object, action: object = None,
                delay: float = 0.0):
        return self._sched.bus.publish(topic, self.agent.id, observation,
                                       action=action, delay=delay)

    def write_state(self, key: str, value: object) -> int:
        version = self._sched.state.write(key, value)
        self._snap = self._sched.state.snapshot()
        return version

    def propose_alert(self, decision) -> object:
        return self._sched.governor.apply(decision, actor=self.agent.id)

    def rng(self, *labels: object):
        return self._sched.rng_stream(self.agent.id, *labels)
