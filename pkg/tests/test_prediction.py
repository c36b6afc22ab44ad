"""Motion estimation, ensemble nowcasting, downscaling, probabilities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudburst import rng
from cloudburst.perception import InitiationCandidate
from cloudburst.prediction import (DownscaleError, ForecastError, advect,
                                   coarsen, downscale, estimate_motion,
                                   exceedance_probability, nowcast_ensemble)
from cloudburst.prediction.motion import MotionField


def blob(ny=32, nx=32, cy=12, cx=12, amp=20.0, r=3.0):
    yy, xx = np.mgrid[0:ny, 0:nx].astype(float)
    return amp * np.exp(-0.5 * ((yy - cy) ** 2 + (xx - cx) ** 2) / r ** 2)


def zero_motion(ny=32, nx=32, b=16):
    z = np.zeros((ny // b, nx // b))
    return MotionField(b, z, z.copy(), z.copy(), (ny, nx))


class TestMotion:
    def test_exact_east_shift_recovered(self):
        """Brute-force check: field moved one cell east between frames."""
        prev = blob()
        curr = np.zeros_like(prev)
        curr[:, 1:] = prev[:, :-1]
        m = estimate_motion(prev, curr, block_size=16, search_radius=3,
                            cadence=1.0)
        wet = m.quality > 0
        assert wet.any()
        assert np.allclose(m.vel_x[wet], 1.0)
        assert np.allclose(m.vel_y[wet], 0.0)

    def test_identical_frames_zero_velocity(self):
        f = blob()
        m = estimate_motion(f, f, block_size=16, cadence=5.0)
        assert np.allclose(m.vel_x, 0.0) and np.allclose(m.vel_y, 0.0)

    def test_all_dry_zero_field(self):
        z = np.zeros((32, 32))
        m = estimate_motion(z, z, block_size=16, cadence=5.0)
        assert np.allclose(m.vel_x, 0.0) and np.allclose(m.vel_y, 0.0)

    def test_dry_blocks_inherit_wet_median(self):
        prev = blob(cy=8, cx=8)
        curr = np.zeros_like(prev)
        curr[1:, :] = prev[:-1, :]       # south shift by 1
        m = estimate_motion(prev, curr, block_size=16, search_radius=3,
                            cadence=1.0)
        dry = m.quality == 0
        if dry.any():
            assert np.allclose(m.vel_y[dry], 1.0)


class TestAdvection:
    def test_integer_shift_equals_array_shift_oracle(self):
        f = blob()
        vy = np.zeros_like(f)
        vx = np.ones_like(f)             # 1 cell/min east
        out = advect(f, vy, vx, lead=1.0)
        oracle = np.zeros_like(f)
        oracle[:, 1:] = f[:, :-1]        # independent shift
        assert np.allclose(out, oracle)

    def test_boundary_inflow_zero(self):
        f = np.full((8, 8), 5.0)
        out = advect(f, np.zeros_like(f), np.ones_like(f), lead=2.0)
        assert (out[:, :2] == 0).all()
        assert (out[:, 2:] == 5.0).all()


class TestEnsemble:
    def test_zero_motion_zero_perturbation_stationary(self):
        f = blob()
        ens = nowcast_ensemble(f, zero_motion(), [], m=4, horizon=30.0,
                               cadence=5.0, seed=1, issued_at=0.0, frame_t=0.0,
                               sigma_vel=0.0, sigma_int=0.0)
        for li in range(ens.members.shape[1]):
            assert np.allclose(ens.members[0, li], f)

    def test_uniform_motion_member0_is_pure_advection(self):
        f = blob()
        b = 16
        vy = np.zeros((2, 2))
        vx = np.full((2, 2), 0.2)        # 1 cell per 5-min tick
        motion = MotionField(b, vy, vx, np.ones((2, 2)), (32, 32))
        ens = nowcast_ensemble(f, motion, [], m=4, horizon=30.0, cadence=5.0,
                               seed=1, issued_at=0.0, frame_t=0.0)
        oracle = np.zeros_like(f)
        oracle[:, 1:] = f[:, :-1]
        assert np.allclose(ens.members[0, 0], oracle)

    def test_phi_one_candidate_in_all_members(self):
        f = np.zeros((32, 32))
        c = InitiationCandidate(10, 10, 1.0, 0.0, 30.0)
        ens = nowcast_ensemble(f, zero_motion(), [c], m=8, horizon=30.0,
                               cadence=5.0, seed=1, issued_at=0.0, frame_t=0.0)
        final = ens.members[:, -1]
        assert (final[:, 10, 10] > 0).all()

    def test_m1_rejected_unless_deterministic(self):
        f = blob()
        with pytest.raises(ForecastError):
            nowcast_ensemble(f, zero_motion(), [], m=1, horizon=30.0,
                             cadence=5.0, seed=1, issued_at=0.0, frame_t=0.0)
        ens = nowcast_ensemble(f, zero_motion(), [], m=1, horizon=30.0,
                               cadence=5.0, seed=1, issued_at=0.0, frame_t=0.0,
                               allow_deterministic=True)
        assert ens.m == 1

    def test_spread_monotone_in_inflation(self):
        f = blob(amp=30.0)
        def mean_pair_l1(infl, seed):
            ens = nowcast_ensemble(f, zero_motion(), [], m=8, horizon=15.0,
                                   cadence=5.0, seed=seed, issued_at=0.0,
                                   frame_t=0.0, spread_inflation=infl)
            mem = ens.members[:, -1].reshape(8, -1)
            d = 0.0
            n = 0
            for i in range(8):
                for j in range(i + 1, 8):
                    d += np.abs(mem[i] - mem[j]).mean()
                    n += 1
            return d / n
        lo = np.mean([mean_pair_l1(0.5, s) for s in range(6)])
        hi = np.mean([mean_pair_l1(2.0, s) for s in range(6)])
        assert hi >= lo

    def test_determinism(self):
        f = blob()
        a = nowcast_ensemble(f, zero_motion(), [], m=6, horizon=30.0,
                             cadence=5.0, seed=9, issued_at=0.0, frame_t=0.0)
        b = nowcast_ensemble(f, zero_motion(), [], m=6, horizon=30.0,
                             cadence=5.0, seed=9, issued_at=0.0, frame_t=0.0)
        assert np.array_equal(a.members, b.members)


class TestDownscale:
    def test_beta_zero_no_residual_uniform(self):
        coarse = np.array([[4.0]])
        uplift = np.zeros((2, 2))
        fine = downscale(coarse, uplift, 2, beta=0.0, residual_sigma=0.0)
        assert np.allclose(fine, 4.0)

    def test_flat_terrain_matches_beta_zero(self):
        coarse = np.arange(16, dtype=float).reshape(4, 4)
        uplift = np.full((16, 16), 0.37)
        a = downscale(coarse, uplift, 4, beta=5.0, residual_sigma=0.0)
        b = downscale(coarse, uplift, 4, beta=0.0, residual_sigma=0.0)
        assert np.allclose(a, b)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DownscaleError):
            downscale(np.ones((4, 4)), np.ones((9, 9)), 2)

    @settings(max_examples=60, deadline=None)
    @given(beta=st.floats(-6, 6), seed=st.integers(0, 10_000),
           res=st.floats(0, 0.4))
    def test_mass_conservation_property(self, beta, seed, res):
        gen = rng.stream(seed, "mc")
        coarse = gen.uniform(0, 50, (4, 4))
        uplift = gen.uniform(0, 1, (16, 16))
        fine = downscale(coarse, uplift, 4, beta=beta, residual_sigma=res,
                         member_seed=seed)
        assert (fine >= 0).all()
        assert np.abs(coarsen(fine, 4) - coarse).max() <= 1e-9

    def test_block_replication_mode(self):
        coarse = np.array([[1.0, 2.0], [3.0, 4.0]])
        fine = downscale(coarse, np.zeros((4, 4)), 2, block_replicate=True)
        assert np.allclose(fine[:2, :2], 1.0) and np.allclose(fine[2:, 2:], 4.0)


class TestExceedance:
    def make_ens(self, fields):
        members = np.array(fields)[:, None, :, :]
        from cloudburst.prediction.ensemble import EnsembleForecast
        return EnsembleForecast(issued_at=0.0, frame_t=0.0, horizon=5.0,
                                cadence=5.0, members=members,
                                member_seeds=tuple(range(len(fields))))

    def test_all_members_exceed(self):
        ens = self.make_ens([np.full((4, 4), 30.0)] * 5)
        p = exceedance_probability(ens, 20.0, 5.0)
        assert (p.p == 1.0).all() and not p.calibrated

    def test_counting_3_of_20(self):
        fields = [np.full((2, 2), 25.0)] * 3 + [np.zeros((2, 2))] * 17
        ens = self.make_ens(fields)
        p = exceedance_probability(ens, 20.0, 5.0)
        assert np.allclose(p.p, 0.15)

    def test_raw_multiples_of_1_over_m(self):
        gen = rng.stream(4, "p")
        fields = [gen.uniform(0, 40, (6, 6)) for _ in range(10)]
        p = exceedance_probability(self.make_ens(fields), 20.0, 5.0)
        assert np.allclose(np.mod(p.p * 10, 1.0), 0.0, atol=1e-12)

    def test_identity_calibration_is_noop(self):
        from cloudburst.learning import CalibrationMap
        gen = rng.stream(5, "p")
        fields = [gen.uniform(0, 40, (6, 6)) for _ in range(10)]
        ens = self.make_ens(fields)
        raw = exceedance_probability(ens, 20.0, 5.0)
        cal = exceedance_probability(ens, 20.0, 5.0,
                                     calibration=CalibrationMap.identity())
        assert np.allclose(raw.p, cal.p)
        assert cal.calibrated

    def test_lead_beyond_horizon_rejected(self):
        ens = self.make_ens([np.zeros((2, 2))] * 3)
        with pytest.raises(ForecastError):
            exceedance_probability(ens, 20.0, 10.0)
