"""Concrete agent policies wiring perception, prediction, response and
learning into the runtime.

Messages are lightweight triggers; heavy products (analyses, ensembles,
depth schedules, probability grids) live in the shared state so every
same-tick consumer reads one consistent version. Agent ids are chosen so
that same-message fan-out runs in pipeline order.
"""

from __future__ import annotations

import numpy as np

from . import rng
from .config import SimConfig
from .learning import CalibrationMap, AdaptationPolicy, adapt_threshold, recalibrate
from .perception import (AnalysisGrid, AvailableObs, build_infill_plan,
                         detect_initiation, harmonize)
from .prediction import (coarsen, estimate_motion, exceedance_probability,
                         nowcast_ensemble)
from .prediction.downscale import downscale_stack, terrain_weights
from .prediction.ensemble import EnsembleForecast
from .response.dissemination import disseminate
from .response.hydrology import HydrologyModel
from .response.routing import DepthSchedule, plan_route
from .response.triage import CostModel, triage
from .world.scenario import Scenario, observe
from .world.sensors import GaugeReading

TOPICS = ("tick", "obs.radar", "obs.gauge", "obs.sat", "analysis",
          "initiation", "forecast.coarse", "forecast.fine", "probability",
          "hydro.depth", "alerts", "reach", "routes")


class WorldAgent:
    """Pre-tick hook: samples truth at the frame time and publishes the
    observation set with per-sensor latencies, plus the tick heartbeat."""

    def __init__(self, scenario: Scenario, recorder, audit):
        self.scenario = scenario
        self.recorder = recorder
        self.audit = audit
        self.sender = "world"

    def on_tick(self, bus, frame_t: float) -> None:
        if frame_t > self.scenario.duration:
            return
        obs = observe(self.scenario, frame_t)
        self.recorder.obs_hashes.append((frame_t, obs.content_hash()))
        self.audit.append(frame_t, self.sender, "ingest", f"obs:{frame_t:g}",
                          new={"hash": obs.content_hash()[:16]})
        suite = self.scenario.sensors
        bus.publish("obs.radar", self.sender,
                    {"frame_t": frame_t, "radar": obs.radar,
                     "mask": obs.radar_mask},
                    issued_at=frame_t, delay=suite.radar_latency)
        bus.publish("obs.gauge", self.sender,
                    {"frame_t": frame_t,
                     "gauges": [(g.y, g.x, g.value, g.observed_at)
                                for g in obs.gauges]},
                    issued_at=frame_t, delay=suite.gauge_latency)
        bus.publish("obs.sat", self.sender,
                    {"frame_t": frame_t, "satellite": obs.satellite},
                    issued_at=frame_t, delay=suite.satellite_latency)
        bus.publish("tick", self.sender, {"frame_t": frame_t},
                    issued_at=frame_t)


class SensingAgent:
    id = "agent.sensing"
    layer = "perceptual"
    subscriptions = ("obs.radar", "obs.gauge", "obs.sat", "tick")

    def __init__(self, cfg: SimConfig, scenario: Scenario):
        self.cfg = cfg
        self.scenario = scenario
        self._radar: dict = {}
        self._gauges: list = []
        self._satellite = None
        self._prev: AnalysisGrid | None = None
        self._plan = None

    def policy(self, ctx, msg) -> None:
        obs = msg.observation
        if msg.topic == "obs.radar":
            self._radar[obs["frame_t"]] = obs
            return
        if msg.topic == "obs.gauge":
            self._gauges = [GaugeReading(y, x, v, t, t)
                            for (y, x, v, t) in obs["gauges"]]
            return
        if msg.topic == "obs.sat":
            self._satellite = obs["satellite"]
            return

        frame_t = obs["frame_t"]
        radar = self._radar.pop(frame_t, None)
        self._radar = {t: r for t, r in self._radar.items() if t >= frame_t}
        pcfg = self.cfg.perception
        if radar is not None and self._plan is None:
            self._plan = build_infill_plan(
                radar["mask"], tuple((g.y, g.x) for g in self._gauges),
                k=pcfg.idw_neighbors, power=pcfg.idw_power)
        available = AvailableObs(
            frame_t=frame_t,
            radar=radar["radar"] if radar else None,
            radar_mask=radar["mask"] if radar else None,
            gauges=tuple(self._gauges),
            satellite=self._satellite if radar is None else None)
        try:
            analysis = harmonize(available, self._prev, plan=self._plan,
                                 cadence=self.cfg.cadence_minutes,
                                 staleness_ticks=pcfg.staleness_ticks)
        except ValueError:
            return                        # nothing ever observed yet
        self._prev = analysis
        ctx.write_state("analysis", analysis)
        ctx.publish("analysis", {"frame_t": frame_t,
                                 "grid": analysis.rain,
                                 "stale_frac": analysis.stale_frac})


class InitiationAgent:
    id = "agent.initiation"
    layer = "perceptual"
    subscriptions = ("analysis",)

    def __init__(self, cfg: SimConfig, scenario: Scenario):
        self.cfg = cfg
        self.elevation = scenario.terrain.elevation.values
        self.history: list[AnalysisGrid] = []
        self.active: dict = {}

    def policy(self, ctx, msg) -> None:
        analysis = ctx.state_get("analysis")
        if analysis is None:
            return
        self.history.append(analysis)
        self.history = self.history[-self.cfg.perception.history_k:]
        pcfg = self.cfg.perception
        fcfg = self.cfg.forecast
        motion = None
        if len(self.history) >= 2:
            motion = estimate_motion(self.history[-2].rain.values,
                                     self.history[-1].rain.values,
                                     block_size=fcfg.block_size,
                                     search_radius=fcfg.search_radius,
                                     cadence=self.cfg.cadence_minutes)
        cands = detect_initiation(self.history, self.elevation, motion,
                                  now=ctx.now, theta_init=pcfg.theta_init,
                                  ttl=pcfg.candidate_ttl,
                                  k_required=pcfg.history_k)
        now = ctx.now
        for c in cands:
            self.active[(c.y, c.x)] = c
        self.active = {k: c for k, c in self.active.items()
                       if c.expires_at > now}
        current = [self.active[k] for k in sorted(self.active)]
        ctx.write_state("initiation.candidates", current)
        ctx.publish("initiation",
                    {"frame_t": msg.observation["frame_t"],
                     "candidates": [(c.y, c.x, c.score) for c in current]})


class NowcastAgent:
    id = "agent.nowcast"
    layer = "operational"
    subscriptions = ("analysis",)

    def __init__(self, cfg: SimConfig, scenario: Scenario, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.coarse_factor = cfg.forecast.coarse_factor
        self._prev: AnalysisGrid | None = None

    def policy(self, ctx, msg) -> None:
        analysis: AnalysisGrid = ctx.state_get("analysis")
        if analysis is None:
            return
        fcfg = self.cfg.forecast
        cadence = self.cfg.cadence_minutes
        if self._prev is not None:
            motion = estimate_motion(self._prev.rain.values,
                                     analysis.rain.values,
                                     block_size=fcfg.block_size,
                                     search_radius=fcfg.search_radius,
                                     cadence=cadence)
        else:
            ny, nx = analysis.rain.shape
            z = np.zeros((ny // fcfg.block_size, nx // fcfg.block_size))
            from .prediction.motion import MotionField
            motion = MotionField(fcfg.block_size, z, z.copy(), z.copy(),
                                 (ny, nx))
        self._prev = analysis

        toggles = self.cfg.toggles
        m = fcfg.members if toggles.ensemble else 1
        candidates = ctx.state_get("initiation.candidates", []) \
            if toggles.initiation else []
        spread = ctx.state_get("spread_inflation", fcfg.spread_inflation)
        ens = nowcast_ensemble(
            analysis.rain.values, motion, list(candidates), m=m,
            horizon=fcfg.horizon, cadence=cadence,
            seed=rng.derive_seed(self.seed, "nowcast", analysis.t),
            issued_at=ctx.now, frame_t=analysis.t,
            sigma_vel=fcfg.sigma_vel, sigma_int=fcfg.sigma_int,
            spread_inflation=spread, inject_rate=fcfg.inject_rate,
            inject_radius=fcfg.inject_radius,
            allow_deterministic=not toggles.ensemble)

        s = self.coarse_factor
        mcoarse = np.stack([[coarsen(ens.members[k, li], s)
                             for li in range(ens.members.shape[1])]
                            for k in range(m)])
        coarse = EnsembleForecast(issued_at=ens.issued_at, frame_t=ens.frame_t,
                                  horizon=ens.horizon, cadence=ens.cadence,
                                  members=mcoarse,
                                  member_seeds=ens.member_seeds, coarse=True)
        ctx.write_state("forecast.coarse", coarse)
        ctx.publish("forecast.coarse",
                    {"frame_t": analysis.t, "m": m, "horizon": fcfg.horizon,
                     "member0_hash": ctx.blobs.put(
                         analysis.rain.with_values(mcoarse[0, 0]))})


class DownscalingAgent:
    id = "agent.downscale"
    layer = "operational"
    subscriptions = ("forecast.coarse",)

    def __init__(self, cfg: SimConfig, scenario: Scenario, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.uplift = scenario.terrain.uplift
        self.cell_km = scenario.terrain.elevation.cell_km
        self._weights = terrain_weights(self.uplift, cfg.forecast.coarse_factor,
                                        cfg.forecast.beta)

    def policy(self, ctx, msg) -> None:
        coarse: EnsembleForecast = ctx.state_get("forecast.coarse")
        if coarse is None:
            return
        fcfg = self.cfg.forecast
        tcfg = self.cfg.triage
        s = fcfg.coarse_factor
        replicate = not self.cfg.toggles.terrain_downscaling
        m, n_leads = coarse.members.shape[:2]
        ny, nx = self.uplift.shape
        stack = coarse.members.reshape(m * n_leads, *coarse.members.shape[2:])
        fine = downscale_stack(
            stack, self.uplift, s, beta=fcfg.beta,
            residual_sigma=fcfg.residual_sigma,
            seed=rng.derive_seed(self.seed, "downscale", coarse.frame_t),
            block_replicate=replicate,
            weights=self._weights).reshape(m, n_leads, ny, nx)
        ens = EnsembleForecast(issued_at=coarse.issued_at,
                               frame_t=coarse.frame_t, horizon=coarse.horizon,
                               cadence=coarse.cadence, members=fine,
                               member_seeds=coarse.member_seeds, coarse=False)
        ctx.write_state("forecast.fine", ens)

        cal = ctx.state_get("calibration") if self.cfg.toggles.learning else None
        lead = tcfg.verify_lead
        p20 = exceedance_probability(ens, 20.0, lead,
                                     calibration=cal.get(20.0) if cal else None)
        p40 = exceedance_probability(ens, 40.0, lead,
                                     calibration=cal.get(40.0) if cal else None)
        thr = tcfg.alert_threshold_mmh
        raw_any = np.zeros((ny, nx))
        for li in range(n_leads):
            raw_any = np.maximum(raw_any,
                                 (ens.members[:, li] >= thr).mean(axis=0))
        if cal is not None and thr in cal:
            p_any = np.asarray(cal[thr].apply(raw_any))
        else:
            p_any = raw_any
        at_lead = ens.at_lead(lead)
        ctx.write_state("probability",
                        {"p20": p20, "p40": p40, "p_any": p_any,
                         "p_any_raw": raw_any,
                         "frame_t": coarse.frame_t, "issued_at": ctx.now,
                         "calibrated": cal is not None,
                         "mean_lead": at_lead.mean(axis=0),
                         "spread": float(at_lead.std(axis=0).mean()),
                         "valid_t": coarse.frame_t + lead})
        ctx.publish("forecast.fine",
                    {"frame_t": coarse.frame_t,
                     "member0_hash": ctx.blobs.put(
                         _grid(fine[0, 0], self.cell_km, coarse.frame_t))})
        ctx.publish("probability",
                    {"frame_t": coarse.frame_t,
                     "p20_hash": ctx.blobs.put(
                         _grid(p20.p, self.cell_km, p20.valid_t, "p20", "1")),
                     "p40_hash": ctx.blobs.put(
                         _grid(p40.p, self.cell_km, p40.valid_t, "p40", "1"))})


def _grid(vals, cell_km, t, variable="rain", units="mm/h"):
    from .grids import GridField
    return GridField(vals, cell_km, t, variable, units)


class HydrologyAgent:
    id = "agent.hydrology"
    layer = "operational"
    subscriptions = ("analysis", "forecast.fine")

    def __init__(self, cfg: SimConfig, scenario: Scenario):
        self.cfg = cfg
        cell_area = (scenario.terrain.elevation.cell_km * 1000.0) ** 2
        self.model = HydrologyModel(
            scenario.terrain, cell_area_m2=cell_area,
            reservoir_k=cfg.hydro.reservoir_k,
            alpha_depth=cfg.hydro.alpha_depth,
            channel_acc_threshold=cfg.hydro.channel_acc_threshold)
        self.state = self.model.initial_state()

    def policy(self, ctx, msg) -> None:
        if msg.topic == "analysis":
            analysis: AnalysisGrid = ctx.state_get("analysis")
            if analysis is None:
                return
            self.state = self.model.step(self.state, analysis.rain.values,
                                         self.cfg.cadence_minutes)
            depth_now = self.model.depth_from_outflow(self.state.outflow,
                                                      analysis.t)
            ctx.write_state("hydro.depth_now", depth_now)
            return

        ens: EnsembleForecast = ctx.state_get("forecast.fine")
        if ens is None:
            return
        cadence = self.cfg.cadence_minutes
        mean_fields = ens.members.mean(axis=0)
        st = self.state
        schedule = [(ens.frame_t,
                     self.model.depth_from_outflow(st.outflow,
                                                   ens.frame_t).depth.values)]
        for li in range(mean_fields.shape[0]):
            st = self.model.step(st, mean_fields[li], cadence)
            d = self.model.depth_from_outflow(st.outflow, st.t)
            schedule.append((float(ens.frame_t + (li + 1) * cadence),
                             d.depth.values))
        ctx.write_state("hydro.depth_forecast", schedule)
        ctx.publish("hydro.depth",
                    {"frame_t": ens.frame_t, "leads": len(schedule) - 1,
                     "max_depth": float(max(f.max() for _, f in schedule))})


class TriageAgent:
    id = "agent.triage"
    layer = "operational"
    subscriptions = ("hydro.depth", "alerts")

    def __init__(self, cfg: SimConfig, scenario: Scenario, recorder):
        self.cfg = cfg
        self.zones = scenario.community.zones
        self.names = scenario.community.district_names
        self.costs = CostModel(cfg.triage.l_miss, cfg.triage.l_false,
                               cfg.triage.tier_multipliers)
        self.recorder = recorder
        self.active: dict = {}           # district -> (rank, until)
        self.cooldown: dict = {}

    def policy(self, ctx, msg) -> None:
        if msg.topic == "alerts":
            alert = msg.observation
            self.active[alert["district"]] = (
                {"watch": 0, "warning": 1, "evacuate": 2}[alert["tier"]],
                alert["expiry"])
            return

        prob = ctx.state_get("probability")
        if prob is None:
            return
        schedule = ctx.state_get("hydro.depth_forecast")
        depth_max = None
        if schedule:
            depth_max = np.maximum.reduce([f for _, f in schedule])
        tcfg = self.cfg.triage
        pstar = float(ctx.state_get("pstar", self.costs.pstar))
        decisions = triage(prob["p_any"], depth_max, self.zones, self.names,
                           self.costs, pstar=pstar,
                           confidence_delta=self.cfg.governance.confidence_delta,
                           depth_evac=tcfg.depth_evac, now=ctx.now,
                           frame_t=prob["frame_t"],
                           calibrated=prob["calibrated"],
                           expiry=tcfg.alert_expiry)
        for dec in decisions:
            name = dec.district
            if name in self.cooldown and ctx.now < self.cooldown[name]:
                continue
            rank, until = self.active.get(name, (-1, -np.inf))
            if dec.rank <= rank and ctx.now < until:
                continue
            outcome = ctx.propose_alert(dec)
            self.recorder.proposals.append(
                {"t": ctx.now, "district": name, "tier": dec.tier,
                 "p": dec.probability, "outcome": outcome.kind})
            if outcome.kind == "route_to_hitl":
                self.active[name] = (dec.rank, outcome.item.deadline)
            elif outcome.kind == "veto_rate_cap":
                self.cooldown[name] = ctx.now + 15.0
            elif outcome.kind == "veto_fairness":
                self.cooldown[name] = ctx.now + 10.0


class CommsAgent:
    id = "agent.comms"
    layer = "operational"
    subscriptions = ("alerts",)

    def __init__(self, cfg: SimConfig, scenario: Scenario, seed: int,
                 recorder):
        self.cfg = cfg
        self.community = scenario.community
        self.seed = seed
        self.recorder = recorder

    def policy(self, ctx, msg) -> None:
        alert = msg.observation
        if alert["tier"] == "watch":
            return
        district = alert["district"]
        idx = self.community.district_names.index(district)
        mask = self.community.zones == idx
        gen = rng.stream(self.seed, "disseminate", district,
                         alert["issued_at"])
        report = disseminate(
            f"{district}@{alert['issued_at']:g}", district, mask,
            self.community.population.values, self.cfg.channels.channels,
            gen, window=self.cfg.channels.reach_window)
        self.recorder.reach_reports.append(report)
        ctx.publish("reach", {"district": district,
                              "union_reach": report.union_reach,
                              "degenerate": report.degenerate})


class RoutingAgent:
    id = "agent.routing"
    layer = "operational"
    subscriptions = ("alerts",)

    def __init__(self, cfg: SimConfig, scenario: Scenario, recorder):
        self.cfg = cfg
        self.community = scenario.community
        self.recorder = recorder
        self.planned: dict = {}

    def policy(self, ctx, msg) -> None:
        alert = msg.observation
        if alert["tier"] == "watch":
            return
        district = alert["district"]
        last = self.planned.get(district)
        if last is not None and ctx.now - last < 45.0:
            return
        self.planned[district] = ctx.now
        if self.cfg.toggles.adaptive_routes:
            frames = ctx.state_get("hydro.depth_forecast")
            if frames:
                schedule = DepthSchedule(frames)
            else:
                schedule = DepthSchedule.zero(self.community.zones.shape, ctx.now)
        else:
            schedule = DepthSchedule.zero(self.community.zones.shape, ctx.now)
        plan = plan_route(self.community.roads,
                          self.community.zone_origins[district],
                          self.community.shelters, depart=ctx.now,
                          schedule=schedule,
                          window=self.cfg.routing.evac_window,
                          zone=district)
        self.recorder.route_plans.append(plan)
        ctx.publish("routes", {"zone": district, "nodes": list(plan.nodes),
                               "departure": plan.departure,
                               "arrival": plan.arrival if plan.viable else None,
                               "viable": plan.viable})


class LearningAgent:
    id = "agent.learning"
    layer = "strategic"
    subscriptions = ("analysis", "probability")

    def __init__(self, cfg: SimConfig, scenario: Scenario, recorder):
        self.cfg = cfg
        self.zones = scenario.community.zones
        self.names = scenario.community.district_names
        self.threshold = cfg.world.event_threshold
        self.costs = CostModel(cfg.triage.l_miss, cfg.triage.l_false)
        self.policy_params = AdaptationPolicy(
            eta=cfg.learning.eta, pstar_min=cfg.learning.pstar_min,
            pstar_max=cfg.learning.pstar_max,
            spread_min=cfg.learning.spread_min,
            spread_max=cfg.learning.spread_max)
        self.recorder = recorder
        self._pending_prob: dict = {}      # valid_t -> (p20, p40, mean, spread)
        self._pairs20: list = []
        self._pairs40: list = []
        self._district_probs: list = []    # (t, district, p)
        self._district_wet: list = []      # (t, set of wet districts)
        self._dispersion: list = []        # (mean abs error, member spread)
        self._was_wet = False
        self.events_seen = 0

    def policy(self, ctx, msg) -> None:
        if msg.topic == "probability":
            prob = ctx.state_get("probability")
            if prob is None:
                return
            self._pending_prob[prob["p20"].valid_t] = (
                prob["p20"], prob["p40"], prob["mean_lead"], prob["spread"])
            for i, name in enumerate(self.names):
                cells = self.zones == i
                if cells.any():
                    self._district_probs.append(
                        (ctx.now, name, float(prob["p_any"][cells].max())))
            return

        analysis: AnalysisGrid = ctx.state_get("analysis")
        if analysis is None:
            return
        t = analysis.t
        obs_vals = analysis.rain.values
        matched = self._pending_prob.pop(t, None)
        if matched is not None:
            p20, p40, mean_lead, spread = matched
            self._collect_pairs(p20, obs_vals, 20.0, self._pairs20)
            self._collect_pairs(p40, obs_vals, 40.0, self._pairs40)
            active = (mean_lead >= 1.0) | (obs_vals >= 1.0)
            if active.any():
                mae = float(np.abs(mean_lead - obs_vals)[active].mean())
                self._dispersion.append((mae, spread))
        self._pending_prob = {vt: v for vt, v in self._pending_prob.items()
                              if vt >= t}

        wet_districts = set()
        exceed = obs_vals >= self.threshold
        if exceed.any():
            for i, name in enumerate(self.names):
                if (exceed & (self.zones == i)).any():
                    wet_districts.add(name)
        self._district_wet.append((t, wet_districts))

        wet_now = bool(exceed.any())
        if self._was_wet and not wet_now:
            self.events_seen += 1
            self._strategic_update(ctx)
        self._was_wet = wet_now

    def _collect_pairs(self, pgrid, obs_vals, threshold, sink) -> None:
        outcome = obs_vals >= threshold
        interesting = (pgrid.p > 0) | outcome
        ps = pgrid.p[interesting]
        os_ = outcome[interesting]
        sink.extend(zip(ps.tolist(), os_.astype(int).tolist()))

    def _district_records(self) -> list[tuple[float, int]]:
        horizon = self.cfg.forecast.horizon
        records = []
        for (t, name, p) in self._district_probs:
            hit = any(name in wet for (u, wet) in self._district_wet
                      if t <= u <= t + horizon)
            records.append((p, int(hit)))
        return records

    def _strategic_update(self, ctx) -> None:
        if not self.cfg.toggles.learning:
            self._pairs20.clear()
            self._pairs40.clear()
            self._district_probs.clear()
            return
        eta = self.cfg.learning.eta
        cal = dict(ctx.state_get("calibration") or {})
        for thr, pairs in ((20.0, self._pairs20), (40.0, self._pairs40)):
            if not pairs:
                continue
            old = cal.get(thr) or CalibrationMap.identity(self.cfg.learning.bins)
            new = recalibrate(old, pairs, eta=eta)
            cal[thr] = new
            ctx.audit.append(ctx.now, self.id, "param_change",
                             f"calibration.{thr:g}",
                             old=old.version, new=new.version,
                             evidence={"pairs": len(pairs),
                                       "events": self.events_seen})
        ctx.write_state("calibration", cal)
        self._pairs20 = []
        self._pairs40 = []

        records = self._district_records()
        pstar = float(ctx.state_get("pstar", self.costs.pstar))
        new_pstar, why = adapt_threshold(pstar, records, self.costs,
                                         self.policy_params)
        if new_pstar != pstar or why == "insufficient_evidence":
            ctx.audit.append(ctx.now, self.id, "param_change", "pstar",
                             old=pstar, new=new_pstar,
                             evidence={"records": len(records),
                                       "events": self.events_seen},
                             rationale=why)
        ctx.write_state("pstar", new_pstar)
        self._district_probs = []

        # spread adaptation: widen the ensemble while realized error
        # outruns member dispersion, shrink when overdispersive
        if self._dispersion:
            mae = sum(m for m, _ in self._dispersion)
            spr = sum(s for _, s in self._dispersion)
            old_infl = float(ctx.state_get("spread_inflation",
                                           self.cfg.forecast.spread_inflation))
            ratio = mae / max(spr, 1e-9)
            if ratio > 1.1:
                new_infl = old_infl * (1.0 + self.cfg.learning.eta)
            elif ratio < 0.9:
                new_infl = old_infl * (1.0 - self.cfg.learning.eta)
            else:
                new_infl = old_infl
            new_infl = self.policy_params.clamp_spread(new_infl)
            if new_infl != old_infl:
                ctx.audit.append(ctx.now, self.id, "param_change",
                                 "spread_inflation", old=old_infl,
                                 new=new_infl,
                                 evidence={"error_spread_ratio": round(ratio, 3)},
                                 rationale="dispersion_tracking")
            ctx.write_state("spread_inflation", new_infl)
            self._dispersion = []

    def finalize(self, ctx) -> None:
        """Run-end boundary: flush any open event's evidence."""
        if self._pairs20 or self._pairs40 or self._district_probs:
            self.events_seen += int(self._was_wet)
            self._strategic_update(ctx)
