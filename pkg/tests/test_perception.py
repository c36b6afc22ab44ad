"""Sensor fusion and initiation precursor detection."""

import numpy as np
import pytest

from cloudburst import rng
from cloudburst.config import CommunityConfig, SensorConfig, WorldConfig
from cloudburst.grids import GridField
from cloudburst.perception import (DIRECT, INFILLED, MISSING, STALE,
                                   AnalysisGrid, AvailableObs, detect_initiation,
                                   harmonize, phi_field)
from cloudburst.prediction import estimate_motion
from cloudburst.world import generate_scenario, observe
from cloudburst.world.cells import ConvectiveCell
from cloudburst.world.scenario import Scenario
from cloudburst.world.sensors import GaugeReading


def obs_from(vals, mask=None, gauges=(), t=0.0):
    vals = np.asarray(vals, dtype=float)
    mask = np.zeros(vals.shape, dtype=bool) if mask is None else mask
    radar = GridField(np.where(mask, np.nan, vals), t=t, variable="rain_radar")
    return AvailableObs(frame_t=t, radar=radar, radar_mask=mask, gauges=gauges)


class TestHarmonize:
    def test_noiseless_no_shadow_identity(self):
        vals = np.arange(64, dtype=float).reshape(8, 8)
        out = harmonize(obs_from(vals), prev=None)
        assert np.allclose(out.rain.values, vals)
        assert (out.quality == DIRECT).all()

    def test_gauge_overrides_radar(self):
        vals = np.full((8, 8), 40.0)
        g = GaugeReading(3, 3, 50.0, observed_at=0.0, available_at=0.0)
        out = harmonize(obs_from(vals, gauges=(g,)), prev=None)
        assert out.rain.values[3, 3] == 50.0
        assert out.quality[3, 3] == DIRECT

    def test_shadow_infill_of_constant_field(self):
        vals = np.full((8, 8), 10.0)
        mask = np.zeros((8, 8), dtype=bool)
        mask[4, 4] = True
        out = harmonize(obs_from(vals, mask=mask), prev=None)
        assert out.rain.values[4, 4] == pytest.approx(10.0)
        assert out.quality[4, 4] == INFILLED

    def test_infill_bounded_by_neighbors(self):
        gen = rng.stream(5, "infill")
        for _ in range(20):
            vals = gen.uniform(0, 30, (12, 12))
            mask = gen.random((12, 12)) < 0.2
            if mask.all() or not mask.any():
                continue
            out = harmonize(obs_from(vals, mask=mask), prev=None)
            lo, hi = vals[~mask].min(), vals[~mask].max()
            filled = out.rain.values[mask]
            assert (filled >= lo - 1e-9).all() and (filled <= hi + 1e-9).all()

    def test_all_missing_carries_prev_as_stale(self):
        vals = np.full((8, 8), 7.0)
        prev = harmonize(obs_from(vals, t=0.0), prev=None)
        out = harmonize(AvailableObs(frame_t=5.0), prev=prev)
        assert np.allclose(out.rain.values, 7.0)
        assert (out.quality == STALE).all()
        assert out.t == 5.0
        # repeated starvation decays to missing
        out2 = harmonize(AvailableObs(frame_t=10.0), prev=out)
        out3 = harmonize(AvailableObs(frame_t=15.0), prev=out2)
        assert (out3.quality >= STALE).all()
        assert (harmonize(AvailableObs(frame_t=20.0), prev=out3).quality
                == MISSING).all()

    def test_no_obs_no_prev_raises(self):
        with pytest.raises(ValueError):
            harmonize(AvailableObs(frame_t=0.0), prev=None)

    def test_flag_soundness_on_scenario(self):
        scen = generate_scenario(WorldConfig(nx=32, ny=32, duration_min=120.0),
                                 SensorConfig(n_gauges=4),
                                 CommunityConfig(n_districts=3), seed=21)
        obs = observe(scen, 60.0)
        av = AvailableObs(frame_t=60.0, radar=obs.radar,
                          radar_mask=obs.radar_mask, gauges=obs.gauges)
        out = harmonize(av, prev=None)
        direct = out.quality == DIRECT
        # every direct cell is unmasked radar or a same-tick gauge cell
        gauge_cells = {(g.y, g.x) for g in obs.gauges if g.observed_at == 60.0}
        for y, x in np.argwhere(direct):
            assert not obs.radar_mask[y, x] or (y, x) in gauge_cells
        assert (out.quality[obs.radar_mask] != DIRECT).all()


def analyses_from(fields, t0=0.0, cadence=5.0):
    out = []
    for i, f in enumerate(fields):
        t = t0 + i * cadence
        vals = np.asarray(f, dtype=float)
        out.append(AnalysisGrid(t, GridField(vals, t=t),
                                np.zeros(vals.shape, dtype=np.int8), cadence))
    return out


class TestInitiation:
    def test_uniform_static_field_no_candidates(self):
        hist = analyses_from([np.full((16, 16), 3.0)] * 3)
        elev = np.linspace(0, 100, 256).reshape(16, 16)
        assert detect_initiation(hist, elev, None, now=10.0) == []

    def test_unreachable_threshold_empty(self):
        gen = rng.stream(1, "x")
        hist = analyses_from([gen.uniform(0, 5, (16, 16)) for _ in range(3)])
        elev = np.linspace(0, 100, 256).reshape(16, 16)
        assert detect_initiation(hist, elev, None, now=10.0,
                                 theta_init=1.0 + 1e-9) == []

    def test_insufficient_history_empty(self):
        hist = analyses_from([np.zeros((16, 16))] * 2)
        elev = np.zeros((16, 16))
        assert detect_initiation(hist, elev, None, now=5.0) == []

    def test_growing_drizzle_detected_in_dry_fringe(self):
        ny = nx = 32
        yy, xx = np.mgrid[0:ny, 0:nx].astype(float)
        bump = np.exp(-0.5 * ((yy - 10) ** 2 + (xx - 20) ** 2) / 16.0)
        hist = analyses_from([2.0 * bump, 4.0 * bump, 6.0 * bump])
        elev = 100.0 * np.exp(-0.5 * ((yy - 10) ** 2 + (xx - 20) ** 2) / 100.0)
        cands = detect_initiation(hist, elev, None, now=10.0, dry_max_rain=5.0)
        assert cands
        assert all(abs(c.y - 10) + abs(c.x - 20) <= 20 for c in cands)
        assert all(c.expires_at > c.detected_at for c in cands)
        assert all(c.score >= 0.9 for c in cands)

    def test_phi_threshold_set_scale_invariant(self):
        gen = rng.stream(3, "scale")
        base = gen.uniform(0, 8, (16, 16))
        grow = base * 1.4
        elev = gen.uniform(0, 200, (16, 16))
        h1 = analyses_from([base, base * 1.2, grow])
        h2 = analyses_from([7 * base, 7 * base * 1.2, 7 * grow])
        m1 = estimate_motion(h1[-2].rain.values, h1[-1].rain.values,
                             block_size=8, cadence=5.0)
        m2 = estimate_motion(h2[-2].rain.values, h2[-1].rain.values,
                             block_size=8, cadence=5.0)
        phi1 = phi_field(h1, elev, m1)
        phi2 = phi_field(h2, elev, m2)
        assert ((phi1 >= 0.9) == (phi2 >= 0.9)).all()


class TestInitiationLeadTimeMonteCarlo:
    def test_ridge_cell_flagged_before_birth_in_80pct_of_seeds(self):
        """Monte-Carlo over 50 seeded scenarios: a cell scheduled at t=60
        on a ridge produces a nearby candidate before t=60."""
        hits = 0
        n_seeds = 50
        for seed in range(n_seeds):
            base = generate_scenario(
                WorldConfig(nx=32, ny=32, duration_min=120.0, storm_class="dry"),
                SensorConfig(n_gauges=6), CommunityConfig(n_districts=3),
                seed=1000 + seed)
            uplift = base.terrain.uplift
            cy, cx = np.unravel_index(np.argmax(uplift), uplift.shape)
            cy = int(np.clip(cy, 6, 25))
            cx = int(np.clip(cx, 6, 25))
            cell = ConvectiveCell(center_y=cy, center_x=cx, peak_rate=130.0,
                                  radius=4.0, vel_y=0.0, vel_x=0.0,
                                  birth=60.0, decay=110.0, lead_in=15.0)
            scen = Scenario(seed=base.seed, world_cfg=base.world_cfg,
                            terrain=base.terrain, cells=(cell,),
                            sensors=base.sensors, community=base.community,
                            duration=120.0)
            history = []
            prev = None
            found = False
            for t in np.arange(35.0, 60.0, 5.0):
                obs = observe(scen, float(t))
                av = AvailableObs(frame_t=float(t), radar=obs.radar,
                                  radar_mask=obs.radar_mask, gauges=obs.gauges)
                an = harmonize(av, prev=prev)
                prev = an
                history.append(an)
                if len(history) < 3:
                    continue
                motion = estimate_motion(history[-2].rain.values,
                                         history[-1].rain.values,
                                         block_size=8, cadence=5.0)
                cands = detect_initiation(history[-3:],
                                          scen.terrain.elevation.values,
                                          motion, now=float(t) + 5.0)
                if any(max(abs(c.y - cy), abs(c.x - cx)) <= 10 for c in cands):
                    found = True
                    break
            hits += found
        assert hits >= 0.8 * n_seeds, f"detected in only {hits}/{n_seeds} seeds"
