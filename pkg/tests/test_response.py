"""Hydrology, triage, dissemination, routing."""

import numpy as np
import pytest

from cloudburst import rng
from cloudburst.config import Channel
from cloudburst.response import (CostModel, DepthSchedule, HydrologyError,
                                 HydrologyModel, check_route, disseminate,
                                 expected_cost, plan_route, triage)
from cloudburst.world import generate_terrain
from cloudburst.world.community import RoadEdge, RoadGraph


@pytest.fixture(scope="module")
def terrain():
    return generate_terrain(32, 32, seed=5)


class TestRunoff:
    def test_zero_rain_zero_outflow(self, terrain):
        model = HydrologyModel(terrain)
        state = model.initial_state()
        for _ in range(50):
            state = model.step(state, np.zeros((32, 32)), 5.0)
        assert np.allclose(state.outflow, 0.0)

    def test_steady_state_matches_closed_form(self, terrain):
        """Linear reservoir under constant rain converges to Q = P*A."""
        model = HydrologyModel(terrain, reservoir_k=45.0)
        rain = np.full((32, 32), 12.0)
        state = model.initial_state()
        for _ in range(10_000):
            state = model.step(state, rain, 5.0)
        p = model.catchment_mean_rain(rain) / 60.0 / 1000.0
        q_expect = p * model.areas
        assert np.allclose(state.outflow, q_expect, rtol=0.01)

    def test_mass_balance_exact(self, terrain):
        model = HydrologyModel(terrain)
        gen = rng.stream(7, "rain")
        seq = [(i * 5.0, gen.uniform(0, 80, (32, 32))) for i in range(40)]
        states = model.simulate(seq, 5.0)
        assert model.mass_balance_residual(seq, states, 5.0) <= 1e-6

    def test_negative_rain_rejected(self, terrain):
        model = HydrologyModel(terrain)
        with pytest.raises(HydrologyError):
            model.step(model.initial_state(), np.full((32, 32), -1.0), 5.0)


class TestInundation:
    def test_zero_outflow_zero_depth(self, terrain):
        model = HydrologyModel(terrain)
        d = model.depth_from_outflow(np.zeros(model.n_catchments), 0.0)
        assert (d.depth.values == 0.0).all()

    def test_monotone_in_outflow(self, terrain):
        model = HydrologyModel(terrain)
        q = np.full(model.n_catchments, 50.0)
        d1 = model.depth_from_outflow(q, 0.0).depth.values
        d2 = model.depth_from_outflow(2 * q, 0.0).depth.values
        assert (d2 >= d1 - 1e-12).all()

    def test_hillslope_cells_stay_dry(self, terrain):
        model = HydrologyModel(terrain, channel_acc_threshold=20)
        q = np.full(model.n_catchments, 1e9)
        d = model.depth_from_outflow(q, 0.0).depth.values
        assert (d[terrain.flow_acc < 20] == 0.0).all()


class TestTriage:
    def setup_method(self):
        self.zones = np.zeros((4, 4), dtype=np.int64)
        self.names = ("d0",)
        self.costs = CostModel(l_miss=9.0, l_false=1.0)

    def run(self, p, depth=0.0, pstar=None):
        pgrid = np.full((4, 4), p)
        dgrid = np.full((4, 4), depth)
        return triage(pgrid, dgrid, self.zones, self.names, self.costs,
                      pstar=self.costs.pstar if pstar is None else pstar,
                      confidence_delta=0.05, depth_evac=0.4, now=10.0,
                      frame_t=5.0)

    def test_cost_loss_threshold_hand_case(self):
        # L_miss=9, L_false=1 -> p* = 1/10; P=0.2 clears it
        assert self.costs.pstar == pytest.approx(0.1)
        alerts = self.run(0.2)
        assert len(alerts) == 1 and alerts[0].tier == "warning"

    def test_half_threshold_watch(self):
        alerts = self.run(0.05)
        assert len(alerts) == 1 and alerts[0].tier == "watch"

    def test_depth_gate_for_evacuation(self):
        assert self.run(0.95, depth=0.0)[0].tier == "warning"
        assert self.run(0.95, depth=0.5)[0].tier == "evacuate"

    def test_below_watch_floor_silent(self):
        assert self.run(0.02) == []

    def test_low_confidence_band_flag(self):
        assert self.run(0.12)[0].low_confidence
        assert not self.run(0.30)[0].low_confidence

    def test_alert_monotone_in_probability(self):
        order = {"watch": 0, "warning": 1, "evacuate": 2}
        last = -1
        for p in np.linspace(0.05, 0.95, 10):
            alerts = self.run(float(p), depth=0.5)
            rank = order[alerts[0].tier] if alerts else -1
            assert rank >= last
            last = rank

    def test_pstar_minimizes_expected_cost_brute_force(self):
        """Enumerated oracle: p* rule beats alert-always and alert-never."""
        costs = self.costs
        pstar = costs.pstar
        for p_event in np.arange(0.0, 1.0 + 1e-9, 0.05):
            rule = expected_cost(p_event, p_event >= pstar, costs)
            always = expected_cost(p_event, True, costs)
            never = expected_cost(p_event, False, costs)
            assert rule <= always + 1e-12
            assert rule <= never + 1e-12


class TestDissemination:
    def setup_method(self):
        self.mask = np.ones((4, 4), dtype=bool)
        self.pop = np.full((4, 4), 10.0)

    def test_full_coverage_zero_delay_full_reach(self):
        ch = [Channel("c", 1.0, "fixed", 0.0)]
        r = disseminate("a0", "d0", self.mask, self.pop, ch,
                        rng.stream(1, "d"))
        assert r.union_reach == 1.0

    def test_delay_beyond_window_zero_reach(self):
        ch = [Channel("c", 1.0, "fixed", 11.0)]
        r = disseminate("a0", "d0", self.mask, self.pop, ch,
                        rng.stream(1, "d"), window=10.0)
        assert r.union_reach == 0.0

    def test_two_half_coverage_channels_union_monte_carlo(self):
        """Independent channels at 0.5 coverage: union ~ 0.75 (1000 seeds)."""
        chs = [Channel("a", 0.5, "fixed", 0.0), Channel("b", 0.5, "fixed", 0.0)]
        vals = [disseminate("a0", "d0", self.mask, self.pop, chs,
                            rng.stream(s, "mc")).union_reach
                for s in range(1000)]
        assert abs(np.mean(vals) - 0.75) <= 0.02

    def test_adding_channel_never_decreases_reach(self):
        base = [Channel("a", 0.4, "exp", 2.0)]
        more = base + [Channel("b", 0.4, "exp", 2.0)]
        for s in range(30):
            r1 = disseminate("a0", "d0", self.mask, self.pop, base,
                             rng.stream(s, "mono"))
            r2 = disseminate("a0", "d0", self.mask, self.pop, more,
                             rng.stream(s, "mono"))
            assert r2.union_reach >= r1.union_reach - 1e-12
            assert r2.union_reach >= max(r2.per_channel_pop.values()) / 160.0 - 1e-12

    def test_empty_district_degenerate(self):
        r = disseminate("a0", "d0", self.mask, np.zeros((4, 4)),
                        [Channel("c", 1.0, "fixed", 0.0)], rng.stream(1, "d"))
        assert r.degenerate and r.union_reach == 1.0


def line_graph(closures=None, travel=5.0, d_crit=0.3):
    """o - a - b - shelter, with a spur o - c - shelter (longer)."""
    nodes = {"o": (0, 0), "a": (0, 1), "b": (0, 2), "s": (0, 3),
             "c": (1, 1)}
    edges = [("o", "a", travel), ("a", "b", travel), ("b", "s", travel),
             ("o", "c", travel * 2), ("c", "s", travel * 2)]
    adj = {n: [] for n in nodes}
    for a, b, tt in edges:
        adj[a].append(RoadEdge(a, b, tt, d_crit))
        adj[b].append(RoadEdge(b, a, tt, d_crit))
    return RoadGraph(nodes, {n: tuple(sorted(e, key=lambda x: x.b))
                             for n, e in adj.items()})


class TestRouting:
    def test_all_dry_static_shortest_path(self):
        roads = line_graph()
        sched = DepthSchedule.zero((2, 4))
        plan = plan_route(roads, "o", ("s",), 0.0, sched, window=60.0)
        assert plan.viable
        assert plan.nodes == ("o", "a", "b", "s")
        assert plan.arrival == 15.0

    def test_bridge_crossed_before_flooding(self):
        """Brute-force oracle on the small graph: the fast path floods at
        t=10 but the walker is already past the bridge."""
        roads = line_graph(travel=5.0)
        dry = np.zeros((2, 4))
        wet = np.zeros((2, 4))
        wet[0, 1] = 1.0                   # node "a" under water from t=10
        sched = DepthSchedule([(0.0, dry), (10.0, wet)])
        plan = plan_route(roads, "o", ("s",), 0.0, sched, window=60.0)
        assert plan.viable and plan.nodes == ("o", "a", "b", "s")

        # brute force: enumerate all simple paths, replay each
        def all_paths(path, target, acc):
            node = path[-1]
            if node == target:
                acc.append(tuple(path))
                return
            for e in roads.neighbors(node):
                if e.b not in path:
                    all_paths(path + [e.b], target, acc)
        acc = []
        all_paths(["o"], "s", acc)
        feasible = []
        for nodes in acc:
            t = 0.0
            ok = True
            for a, b in zip(nodes, nodes[1:]):
                e = next(x for x in roads.neighbors(a) if x.b == b)
                if sched.depth_at(roads.nodes[a], t) >= e.d_crit or \
                   sched.depth_at(roads.nodes[b], t) >= e.d_crit:
                    ok = False
                    break
                t += e.travel_min
            if ok:
                feasible.append((t, nodes))
        assert feasible
        best = min(feasible)
        assert plan.arrival == best[0] and plan.nodes == best[1]

    def test_departure_after_flood_takes_detour(self):
        roads = line_graph(travel=5.0)
        wet = np.zeros((2, 4))
        wet[0, 1] = 1.0
        sched = DepthSchedule([(0.0, wet)])  # "a" flooded from the start
        plan = plan_route(roads, "o", ("s",), 0.0, sched, window=60.0)
        assert plan.viable and plan.nodes == ("o", "c", "s")

    def test_fully_flooded_not_viable(self):
        roads = line_graph()
        wet = np.ones((2, 4))
        sched = DepthSchedule([(0.0, wet)])
        plan = plan_route(roads, "o", ("s",), 0.0, sched, window=60.0)
        assert not plan.viable

    def test_route_soundness_checker_agrees(self):
        roads = line_graph()
        gen = rng.stream(11, "routes")
        for trial in range(40):
            depth0 = (gen.random((2, 4)) < 0.3) * 1.0
            depth1 = (gen.random((2, 4)) < 0.3) * 1.0
            sched = DepthSchedule([(0.0, depth0), (10.0, depth1)])
            plan = plan_route(roads, "o", ("s",), 0.0, sched, window=60.0)
            if plan.viable:
                assert check_route(roads, plan, sched, window=60.0)

    def test_window_bound_enforced(self):
        roads = line_graph(travel=30.0)
        sched = DepthSchedule.zero((2, 4))
        plan = plan_route(roads, "o", ("s",), 0.0, sched, window=60.0)
        assert not plan.viable
