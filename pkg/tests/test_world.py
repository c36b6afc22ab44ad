"""Synthetic world: terrain routing, truth, sensors, labeling."""

import numpy as np
import pytest

from cloudburst import rng
from cloudburst.config import CommunityConfig, SensorConfig, WorldConfig
from cloudburst.world import (ConvectiveCell, ScenarioError, block_mean,
                              downstream_steps, generate_scenario,
                              generate_terrain, label_events, observe,
                              sense, truth_step)
from cloudburst.world.scenario import Scenario
from cloudburst.world.sensors import SensorSuite, make_shadow_mask


def small_scenario(seed=1, storm_class="cloudburst", duration=120.0, **world_kw):
    wc = WorldConfig(nx=32, ny=32, duration_min=duration,
                     storm_class=storm_class, **world_kw)
    return generate_scenario(wc, SensorConfig(n_gauges=6),
                             CommunityConfig(n_districts=3), seed)


class TestTerrain:
    def test_flow_acc_at_least_one_and_d8_acyclic(self):
        terr = generate_terrain(32, 32, seed=3)
        assert (terr.flow_acc >= 1).all()
        ny, nx = terr.shape
        for y in range(0, ny, 5):
            for x in range(0, nx, 5):
                assert downstream_steps(terr, y, x) <= ny * nx

    def test_catchments_partition_grid(self):
        terr = generate_terrain(32, 32, seed=3)
        assert (terr.catchment_id >= 0).all()
        assert terr.n_catchments() >= 1

    def test_deterministic(self):
        a = generate_terrain(32, 32, seed=7)
        b = generate_terrain(32, 32, seed=7)
        assert a.elevation.content_hash() == b.elevation.content_hash()
        assert (a.flow_dir == b.flow_dir).all()


class TestTruth:
    def test_zero_before_first_cell(self):
        scen = small_scenario(seed=2)
        first = min(c.birth - c.lead_in for c in scen.cells)
        if first > 0:
            frame = truth_step(scen, 0.0)
            assert frame.rain.values.max() == 0.0

    def test_single_stationary_cell_center_closed_form(self):
        cell = ConvectiveCell(center_y=16, center_x=16, peak_rate=100.0,
                              radius=4.0, vel_y=0.0, vel_x=0.0,
                              birth=30.0, decay=90.0)
        scen = small_scenario(seed=3)
        scen = Scenario(seed=scen.seed,
                        world_cfg=WorldConfig(nx=32, ny=32, duration_min=120.0,
                                              orographic_gamma=0.0),
                        terrain=scen.terrain, cells=(cell,),
                        sensors=scen.sensors, community=scen.community,
                        duration=120.0)
        for t in (20.0, 30.0, 60.0, 89.0):
            frame = truth_step(scen, t)
            assert frame.rain.values[16, 16] == pytest.approx(
                100.0 * cell.growth(t), abs=1e-9)

    def test_purity(self):
        scen = small_scenario(seed=4)
        a = truth_step(scen, 60.0).rain.values
        b = truth_step(scen, 60.0).rain.values
        assert (a == b).all()

    def test_out_of_range_rejected(self):
        scen = small_scenario(seed=4)
        with pytest.raises(ScenarioError):
            truth_step(scen, -1.0)
        with pytest.raises(ScenarioError):
            truth_step(scen, scen.duration + 1.0)

    def test_zero_cells_gives_zero_fields(self):
        scen = small_scenario(seed=5, storm_class="dry")
        for t in (0.0, 50.0, 100.0):
            assert truth_step(scen, t).rain.values.max() == 0.0


class TestScenario:
    def test_run_twice_identical_hash(self):
        a = small_scenario(seed=1)
        b = small_scenario(seed=1)
        assert a.scenario_hash() == b.scenario_hash()

    def test_different_seed_differs(self):
        assert small_scenario(seed=1).scenario_hash() != \
            small_scenario(seed=2).scenario_hash()

    def test_cloudburst_exceeds_100mmh(self):
        scen = small_scenario(seed=6)
        peak = max(truth_step(scen, float(t)).rain.values.max()
                   for t in np.arange(0, scen.duration + 1e-9, 5.0))
        assert peak >= 100.0

    def test_infeasible_grid_rejected(self):
        with pytest.raises(ScenarioError):
            generate_scenario(WorldConfig(nx=16, ny=16), SensorConfig(),
                              CommunityConfig(), seed=1)


class TestSensors:
    def test_noiseless_unmasked_radar_equals_truth(self):
        scen = small_scenario(seed=7)
        suite = SensorSuite(shadow_mask=np.zeros((32, 32), dtype=bool),
                            gauge_cells=scen.sensors.gauge_cells,
                            radar_noise_sigma=0.0)
        frame = truth_step(scen, 60.0)
        obs = sense(frame.rain, suite, rng.stream(0, "x"))
        assert np.allclose(obs.radar.values, frame.rain.values)

    def test_shadow_cells_flagged_missing(self):
        scen = small_scenario(seed=7)
        obs = observe(scen, 60.0)
        assert np.isnan(obs.radar.values[scen.sensors.shadow_mask]).all()
        assert not np.isnan(obs.radar.values[~scen.sensors.shadow_mask]).any()

    def test_satellite_block_mean_of_uniform_region(self):
        vals = np.full((32, 32), 4.0)
        assert (block_mean(vals, 4) == 4.0).all()

    def test_satellite_consistency_invariant(self):
        scen = small_scenario(seed=8)
        frame = truth_step(scen, 60.0)
        obs = observe(scen, 60.0)
        expect = block_mean(frame.rain.values, scen.sensors.satellite_factor)
        assert np.allclose(obs.satellite.values, expect)

    def test_gauges_exact_with_latency(self):
        scen = small_scenario(seed=8)
        frame = truth_step(scen, 60.0)
        obs = observe(scen, 60.0)
        for g in obs.gauges:
            assert g.value == pytest.approx(frame.rain.values[g.y, g.x])
            assert g.available_at == 60.0 + scen.sensors.gauge_latency

    def test_replay_bit_exact(self):
        scen = small_scenario(seed=9)
        a, b = observe(scen, 30.0), observe(scen, 30.0)
        assert a.content_hash() == b.content_hash()

    def test_shadow_fraction_in_band(self):
        for seed in range(5):
            mask = make_shadow_mask(64, 64, rng.stream(seed, "m"), 0.10, 0.20)
            assert 0.08 <= mask.mean() <= 0.22


def brute_force_labels(scen, threshold, step=1.0):
    """Independent oracle: scan every frame, group consecutive wet minutes."""
    times = np.arange(0.0, scen.duration + 1e-9, step)
    wet_t = [float(t) for t in times
             if truth_step(scen, float(t)).rain.values.max() >= threshold]
    if not wet_t:
        return []
    groups = [[wet_t[0], wet_t[0]]]
    for t in wet_t[1:]:
        if t - groups[-1][1] <= step + 1e-9:
            groups[-1][1] = t
        else:
            groups.append([t, t])
    return groups


class TestLabels:
    def test_zero_rain_scenario_empty(self):
        scen = small_scenario(seed=10, storm_class="dry")
        assert label_events(scen) == []

    def test_single_cell_onset_matches_brute_force(self):
        cell = ConvectiveCell(center_y=16, center_x=16, peak_rate=120.0,
                              radius=4.0, vel_y=0.0, vel_x=0.0,
                              birth=30.0, decay=80.0)
        base = small_scenario(seed=11, storm_class="dry")
        scen = Scenario(seed=base.seed, world_cfg=base.world_cfg,
                        terrain=base.terrain, cells=(cell,),
                        sensors=base.sensors, community=base.community,
                        duration=base.duration)
        labels = label_events(scen)
        oracle = brute_force_labels(scen, scen.world_cfg.event_threshold)
        assert len(labels) == len(oracle) == 1
        assert labels[0].onset == oracle[0][0]
        assert labels[0].end == oracle[0][1]

    def test_two_disjoint_cells_two_labels(self):
        mk = lambda birth, decay: ConvectiveCell(
            center_y=16, center_x=16, peak_rate=120.0, radius=4.0,
            vel_y=0.0, vel_x=0.0, birth=birth, decay=decay, lead_in=5.0)
        base = small_scenario(seed=12, storm_class="dry", duration=240.0)
        scen = Scenario(seed=base.seed, world_cfg=base.world_cfg,
                        terrain=base.terrain, cells=(mk(20.0, 60.0), mk(150.0, 190.0)),
                        sensors=base.sensors, community=base.community,
                        duration=240.0)
        labels = label_events(scen)
        oracle = brute_force_labels(scen, scen.world_cfg.event_threshold)
        assert len(labels) == len(oracle) == 2
        for lab, (onset, end) in zip(labels, oracle):
            assert lab.onset == onset and lab.end == end

    def test_labels_partition_wet_minutes(self):
        scen = small_scenario(seed=13)
        labels = label_events(scen)
        thr = scen.world_cfg.event_threshold
        for i in range(1, len(labels)):
            assert labels[i].onset > labels[i - 1].end
        for t in np.arange(0.0, scen.duration + 1e-9, 1.0):
            wet = truth_step(scen, float(t)).rain.values.max() >= thr
            covered = any(lab.onset <= t <= lab.end for lab in labels)
            if wet:
                assert covered
