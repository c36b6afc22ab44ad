"""End-to-end assembly of one simulated event: scenario, agents, runtime,
artifact recording.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .agents import (TOPICS, CommsAgent, DownscalingAgent, HydrologyAgent,
                     InitiationAgent, LearningAgent, NowcastAgent,
                     RoutingAgent, SensingAgent, TriageAgent, WorldAgent)
from .audit import AuditLog
from .config import SimConfig
from .grids import BlobStore
from .learning import CalibrationMap
from .runtime import (AgentDescriptor, AgentRegistry, Governor, InProcessBus,
                      ObservationBinding, OperatorDecision, Scheduler,
                      SharedState)
from .wire import to_jsonable
from .world.scenario import (Scenario, generate_scenario, label_events,
                             truth_step)

AGENT_BINDINGS = {
    "agent.sensing": (),
    "agent.initiation": ("analysis",),
    "agent.nowcast": ("analysis", "initiation.candidates", "spread_inflation"),
    "agent.downscale": ("forecast.coarse", "calibration"),
    "agent.hydrology": ("analysis", "forecast.fine"),
    "agent.triage": ("probability", "hydro.depth_forecast", "pstar"),
    "agent.comms": (),
    "agent.routing": ("hydro.depth_forecast",),
    "agent.learning": ("analysis", "probability", "calibration", "pstar"),
}


@dataclass
class RunRecorder:
    obs_hashes: list = field(default_factory=list)
    alerts: list = field(default_factory=list)
    proposals: list = field(default_factory=list)
    reach_reports: list = field(default_factory=list)
    route_plans: list = field(default_factory=list)
    verification: list = field(default_factory=list)
    stream: list = field(default_factory=list)
    district_pmax: list = field(default_factory=list)
    bbox: tuple = (slice(None), slice(None))
    windows: list = field(default_factory=list)

    def obs_digest(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for t, digest in self.obs_hashes:
            h.update(f"{t:g}:{digest};".encode())
        return h.hexdigest()


@dataclass
class RunResult:
    mode: str
    seed: int
    cfg: SimConfig
    scenario: Scenario
    labels: list
    audit: AuditLog
    recorder: RunRecorder
    final_state_hash: str
    degraded: bool
    operator_timeline: list
    learning_out: dict
    ticks: int

    def alert_tuples(self) -> list[tuple[float, str, int]]:
        rank = {"watch": 0, "warning": 1, "evacuate": 2}
        return [(a.issued_at, a.district, rank[a.tier])
                for a in self.recorder.alerts]

    def run_digest(self) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(self.audit.digest().encode())
        h.update(self.final_state_hash.encode())
        h.update(self.recorder.obs_digest().encode())
        return h.hexdigest()


def _verify_plan(scenario: Scenario, labels, buffer_cells: int = 4):
    """Bounding box (as index arrays) and verification time windows."""
    ny, nx = scenario.terrain.shape
    if labels:
        ys = [y for lab in labels for (y, x) in lab.affected_cells]
        xs = [x for lab in labels for (y, x) in lab.affected_cells]
        y0 = max(0, min(ys) - buffer_cells)
        y1 = min(ny, max(ys) + buffer_cells + 1)
        x0 = max(0, min(xs) - buffer_cells)
        x1 = min(nx, max(xs) + buffer_cells + 1)
    else:
        y0, y1, x0, x1 = 0, ny, 0, nx
    windows = [(lab.onset - 15.0, lab.end + 15.0) for lab in labels]
    return (slice(y0, y1), slice(x0, x1)), windows


@dataclass
class Simulation:
    """Assembled but not yet executed run; the gateway steps it paced."""
    cfg: SimConfig
    seed: int
    mode: str
    scenario: Scenario
    labels: list
    sched: Scheduler
    recorder: RunRecorder
    learning_agent: object
    n_ticks: int
    _initial_learning: dict | None = None

    @property
    def state(self):
        return self.sched.state

    @property
    def governor(self):
        return self.sched.governor

    @property
    def blobs(self):
        return self.sched.blobs

    def step(self):
        return self.sched.step()

    def done(self) -> bool:
        return self.sched.state.clock >= self.scenario.duration

    def finish(self) -> RunResult:
        state = self.sched.state
        # no HITL item may outlive the run unresolved
        self.sched.governor.expire(state.clock, force=True)
        if self.learning_agent is not None:
            self.learning_agent.finalize(_FinalizeCtx(self.sched,
                                                      self.learning_agent))
        init = self._initial_learning or {}
        pstar0 = init.get("pstar", self.cfg.pstar_default)
        infl0 = init.get("spread_inflation", self.cfg.forecast.spread_inflation)
        learning_out = {
            "pstar": float(state.get("pstar", pstar0)),
            "calibration": state.get("calibration"),
            "spread_inflation": float(state.get("spread_inflation", infl0)),
            "events_seen": self.learning_agent.events_seen
            if self.learning_agent else 0}
        self.sched.audit.append(state.clock, "runner", "run_event", "run_end",
                                new={"degraded": self.sched.degraded_mode,
                                     "alerts": len(self.recorder.alerts)})
        return RunResult(mode=self.mode, seed=self.seed, cfg=self.cfg,
                         scenario=self.scenario, labels=self.labels,
                         audit=self.sched.audit, recorder=self.recorder,
                         final_state_hash=state.content_hash(),
                         degraded=self.sched.degraded_mode,
                         operator_timeline=self.sched.operator_timeline(),
                         learning_out=learning_out, ticks=self.n_ticks)


def run_simulation(cfg: SimConfig, seed: int, mode: str = "mas",
                   operator_script: list[OperatorDecision] = (),
                   initial_learning: dict | None = None) -> RunResult:
    sim = build_simulation(cfg, seed, mode=mode,
                           operator_script=operator_script,
                           initial_learning=initial_learning)
    for _ in range(sim.n_ticks):
        sim.step()
    return sim.finish()


def build_simulation(cfg: SimConfig, seed: int, mode: str = "mas",
                     operator_script: list[OperatorDecision] = (),
                     initial_learning: dict | None = None) -> Simulation:
    scenario = generate_scenario(cfg.world, cfg.sensors, cfg.community, seed)
    labels = label_events(scenario)
    bbox, windows = _verify_plan(scenario, labels)

    recorder = RunRecorder(bbox=bbox, windows=windows)
    bus = InProcessBus(seed=rng.derive_seed(seed, "bus"))
    state = SharedState()
    audit = AuditLog()
    governor = Governor(cfg.governance, audit, clock=lambda: state.clock,
                        districts=scenario.community.district_names)
    registry = AgentRegistry()
    sched = Scheduler(bus, state, registry, governor, audit, BlobStore(),
                      seed=seed, cadence=cfg.cadence_minutes)
    for topic in TOPICS:
        bus.declare_topic(topic)
    bus.register_sender("world")

    audit.append(0.0, "runner", "run_event", "run_start",
                 new={"mode": mode, "seed": seed,
                      "toggles": to_jsonable(cfg.toggles)})

    # strategic state carried across events in a batch
    pstar0 = cfg.pstar_default
    cal0 = None
    infl0 = cfg.forecast.spread_inflation
    if initial_learning:
        pstar0 = initial_learning.get("pstar", pstar0)
        cal0 = initial_learning.get("calibration")
        infl0 = initial_learning.get("spread_inflation", infl0)
    state.write("pstar", pstar0)
    if cfg.toggles.learning:
        state.write("calibration", cal0 or {
            20.0: CalibrationMap.identity(cfg.learning.bins),
            40.0: CalibrationMap.identity(cfg.learning.bins)})
        state.write("spread_inflation", infl0)

    world = WorldAgent(scenario, recorder, audit)
    sched.add_pre_tick(lambda frame_t: world.on_tick(bus, frame_t))

    agents = [SensingAgent(cfg, scenario)]
    if cfg.toggles.initiation:
        agents.append(InitiationAgent(cfg, scenario))
    agents += [NowcastAgent(cfg, scenario, seed),
               DownscalingAgent(cfg, scenario, seed),
               HydrologyAgent(cfg, scenario),
               TriageAgent(cfg, scenario, recorder),
               CommsAgent(cfg, scenario, seed, recorder),
               RoutingAgent(cfg, scenario, recorder)]
    learning_agent = None
    if cfg.toggles.learning:
        learning_agent = LearningAgent(cfg, scenario, recorder)
        agents.append(learning_agent)
    for agent in agents:
        sched.register_agent(AgentDescriptor(
            agent.id, agent.layer, agent.subscriptions, agent.policy,
            binding=ObservationBinding(agent.id, AGENT_BINDINGS[agent.id])))

    def _issue_hook(decision):
        recorder.alerts.append(decision)
        payload = {"district": decision.district, "tier": decision.tier,
                   "p": decision.probability, "threshold": decision.threshold,
                   "low_confidence": decision.low_confidence,
                   "issued_at": decision.issued_at, "expiry": decision.expiry,
                   "frame_t": decision.frame_t}
        bus.publish("alerts", "governance", payload,
                    issued_at=state.clock)
        recorder.stream.append({"type": "alert", "t": state.clock,
                                "alert": payload})
    governor.on_issue = _issue_hook

    for spec in cfg.faults:
        bus.inject_fault(spec)
    for dec in operator_script:
        sched.submit_operator_decision(dec.item_id, dec.decision, t=dec.t)

    verify_lead = cfg.triage.verify_lead
    seen_hitl: dict = {}
    zones = scenario.community.zones
    names = scenario.community.district_names

    def _probe(summary):
        ens = state.get("forecast.fine")
        prob = state.get("probability")
        frame_t = summary.t - cfg.cadence_minutes
        if prob is not None and prob["frame_t"] == frame_t:
            pmax = {}
            for i, name in enumerate(names):
                cells = zones == i
                if cells.any():
                    pmax[name] = float(prob["p_any_raw"][cells].max())
            recorder.district_pmax.append((summary.t, pmax))
        if ens is not None and prob is not None and ens.frame_t == frame_t:
            fields = ens.at_lead(verify_lead)
            mean_all = ens.members.mean(axis=0)
            recorder.verification.append({
                "frame_t": frame_t,
                "issued_at": ens.issued_at,
                "valid_t": frame_t + verify_lead,
                "members": fields[:, bbox[0], bbox[1]].copy(),
                "mean_leads": mean_all[:, bbox[0], bbox[1]].copy(),
                "lead_valid_ts": [frame_t + lead for lead in ens.leads],
                "p20": prob["p20"].p[bbox[0], bbox[1]].copy(),
                "p40": prob["p40"].p[bbox[0], bbox[1]].copy(),
                "calibrated": prob["calibrated"]})
        for item in governor.all_items():
            prev = seen_hitl.get(item.item_id)
            if prev is None:
                recorder.stream.append({
                    "type": "hitl", "t": summary.t, "id": item.item_id,
                    "district": item.decision.district,
                    "tier": item.decision.tier,
                    "p": item.decision.probability,
                    "deadline": item.deadline, "status": item.status})
            elif prev != item.status:
                recorder.stream.append({
                    "type": "hitl_resolved", "t": summary.t,
                    "id": item.item_id, "status": item.status})
            seen_hitl[item.item_id] = item.status
        recorder.stream.append({
            "type": "tick", "t": summary.t, "version": summary.state_version,
            "delivered": summary.delivered, "degraded": summary.degraded,
            "alerts_issued": summary.alerts_issued,
            "hitl_pending": summary.hitl_pending})
    sched.add_post_tick(_probe)

    n_ticks = int(round(scenario.duration / cfg.cadence_minutes))
    return Simulation(cfg=cfg, seed=seed, mode=mode, scenario=scenario,
                      labels=labels, sched=sched, recorder=recorder,
                      learning_agent=learning_agent, n_ticks=n_ticks,
                      _initial_learning=initial_learning)


class _FinalizeCtx:
    """Minimal context for the learning agent's run-end flush."""

    def __init__(self, sched: Scheduler, agent):
        self._sched = sched
        self._agent = agent

    @property
    def now(self) -> float:
        return self._sched.state.clock

    @property
    def audit(self):
        return self._sched.audit

    def state_get(self, key, default=None):
        return self._sched.state.get(key, default)

    def write_state(self, key, value):
        return self._sched.state.write(key, value)


def truth_depth_schedule(scenario: Scenario, cfg: SimConfig):
    """Depth evolution under the true rain, for judging route viability."""
    from .response.hydrology import HydrologyModel
    from .response.routing import DepthSchedule
    cell_area = (scenario.terrain.elevation.cell_km * 1000.0) ** 2
    model = HydrologyModel(scenario.terrain, cell_area_m2=cell_area,
                           reservoir_k=cfg.hydro.reservoir_k,
                           alpha_depth=cfg.hydro.alpha_depth,
                           channel_acc_threshold=cfg.hydro.channel_acc_threshold)
    st = model.initial_state()
    frames = []
    cadence = cfg.cadence_minutes
    for t in np.arange(0.0, scenario.duration + 1e-9, cadence):
        frames.append((float(t),
                       model.depth_from_outflow(st.outflow, t).depth.values))
        if t < scenario.duration:
            st = model.step(st, truth_step(scenario, float(t)).rain.values,
                            cadence)
    return DepthSchedule(frames)
