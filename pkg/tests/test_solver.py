import math

import numpy as np
import pytest

from mixphase.fields import Grid2, MixedState, ModelConstants, equilibrium_state
from mixphase.solver import (
    MollifiedSystem,
    SimConfig,
    SolverAbort,
    choose_dt,
    integrate,
    make_initial_data,
    rhs_F_eps,
    source_terms,
    step,
)
from mixphase.spectral import SpectralOps

G16 = Grid2(16)
C = ModelConstants()


@pytest.fixture(scope="module")
def v0():
    return make_initial_data(G16, C, 0.05, 1)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"epsilon": -0.1}, {"dt": 0.0}, {"cfl": 1.5}, {"s_order": 2.0},
                                    {"lambda_cutoff": 1.0}, {"mode": "euler"}, {"record_every": 0},
                                    {"b_floor": 0.6}, {"sigma_frozen": "median"}, {"amplitude": -1.0}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)

    def test_replace(self):
        cfg = SimConfig().replace(epsilon=0.05)
        assert cfg.epsilon == 0.05 and cfg.grid.n == 64


class TestInitialData:
    def test_properties(self, v0):
        ops = SpectralOps(G16)
        vh = ops.forward(v0.as_array())
        assert math.sqrt(ops.hs_sq_hat(vh, 3.0)) == pytest.approx(0.05, rel=1e-12)
        assert np.abs(vh[:, 0, 0]).max() < 1e-17
        assert np.abs(ops.inverse(ops.div_hat(vh[1:3]))).max() < 1e-15
        assert v0.tilde

    def test_deterministic(self):
        a = make_initial_data(G16, C, 1e-3, 7).as_array()
        b = make_initial_data(G16, C, 1e-3, 7).as_array()
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, make_initial_data(G16, C, 1e-3, 8).as_array())

    def test_too_large(self):
        with pytest.raises(ValueError):
            make_initial_data(G16, C, 50.0, 0)


class TestRightHandSide:
    def test_equilibrium_is_fixed(self):
        zero = np.zeros((5, 16, 16))
        out = MollifiedSystem(SimConfig(grid=G16)).rhs(zero)
        assert np.abs(out).max() <= 1e-15

    def test_sources(self):
        c = ModelConstants()
        v = equilibrium_state(G16, c)
        assert np.abs(source_terms(v, c).as_array()).max() == 0.0
        v.B[:] = 0.25
        v.z[0] = 0.1
        out = source_terms(v, c)
        gB = 0.25 * (2 * 0.75 - 1)
        assert out.B[0, 0] == pytest.approx(gB)
        assert out.z[0, 0, 0] == pytest.approx(-0.1 * (1 + gB * 0.75) / (0.25 * 0.75))

    def test_sources_need_untranslated(self, v0):
        with pytest.raises(ValueError):
            source_terms(v0, C)

    def test_projection_keeps_w_divergence_free(self, v0):
        cfg = SimConfig(grid=G16, epsilon=0.2)
        F = rhs_F_eps(v0, cfg)
        ops = SpectralOps(G16)
        assert np.abs(ops.divergence_physical(F.w)).max() < 1e-15

    def test_gradient_forcing_is_invisible(self, v0):
        sys_ = MollifiedSystem(SimConfig(grid=G16))
        ops = sys_.ops
        vh = ops.forward(v0.as_array())
        x, y = G16.coords
        g = ops.grad_hat(ops.forward(np.sin(2 * x) * np.cos(y)))
        np.testing.assert_allclose(sys_.rhs_hat(vh, w_forcing_hat=g), sys_.rhs_hat(vh), atol=1e-15)

    def test_abort_outside_fraction_range(self):
        bad = np.zeros((5, 16, 16))
        bad[0] = 0.6
        with pytest.raises(SolverAbort):
            MollifiedSystem(SimConfig(grid=G16)).rhs(bad)


class TestStepping:
    @staticmethod
    def final(v0, mode, n, T=0.5):
        cfg = SimConfig(grid=G16, epsilon=0.2, mode=mode, t_end=T, dt=T / n)
        return integrate(v0, cfg, keep_states=True).states[-1]

    def test_rk4_fourth_order(self, v0):
        ref = self.final(v0, "rk4", 400)
        e = [np.abs(self.final(v0, "rk4", n) - ref).max() for n in (10, 20, 40)]
        assert all(14 <= a / b <= 18 for a, b in zip(e, e[1:]))

    def test_picard_second_order_and_close_to_rk4(self, v0):
        ref = self.final(v0, "rk4", 400)
        e = [np.abs(self.final(v0, "picard", n) - ref).max() for n in (10, 20, 40)]
        assert all(3.6 <= a / b <= 4.4 for a, b in zip(e, e[1:]))
        assert e[-1] < 1e-6

    def test_single_step_matches_integrate(self, v0):
        cfg = SimConfig(grid=G16, epsilon=0.2, dt=0.01, t_end=0.01)
        a = step(v0, cfg).as_array()
        b = integrate(v0, cfg, keep_states=True).states[-1]
        np.testing.assert_array_equal(a, b)

    def test_choose_dt_hits_end(self, v0):
        cfg = SimConfig(grid=G16, t_end=0.3)
        dt, n = choose_dt(cfg, v0.as_array())
        assert n * dt == pytest.approx(0.3, rel=1e-14)
        assert dt <= MollifiedSystem(cfg).max_dt(v0.as_array())


class TestIntegrate:
    def test_equilibrium_run(self):
        rec = integrate(np.zeros((5, 16, 16)), SimConfig(grid=G16, t_end=0.5))
        assert not rec.aborted
        assert max(rec.hs_norm) == 0.0 and rec.min_B[-1] == 0.5
        assert len(rec.rows()[0]) == len(rec.COLUMNS)

    def test_perturbed_run_diagnostics(self, v0):
        rec = integrate(v0, SimConfig(grid=G16, t_end=0.5, snapshot_every=2))
        assert not rec.aborted
        assert rec.times[-1] == pytest.approx(0.5)
        assert all(d <= 1e-10 * max(s, 1e-300) for d, s in zip(rec.div_w_max, rec.div_w_scale))
        assert all(e > 0 for e in rec.sigma_energy)
        assert len(rec.snapshots) == (len(rec.times) + 1) // 2
        assert rec.snapshots[0][1].shape == (5, 16, 16)

    def test_floor_aborts(self, v0):
        rec = integrate(v0, SimConfig(grid=G16, t_end=0.5, b_floor=0.4999999))
        assert rec.aborted and "floor" in rec.reason
        assert len(rec.times) >= 1

    def test_rejects_compressible_start(self):
        v = np.zeros((5, 16, 16))
        x, _ = G16.coords
        v[1] = 1e-3 * np.sin(x)
        with pytest.raises(ValueError, match="divergence"):
            integrate(v, SimConfig(grid=G16))

    def test_rejects_untranslated_state(self):
        with pytest.raises(ValueError):
            integrate(equilibrium_state(G16, C), SimConfig(grid=G16))

    def test_mean_frozen_energy(self, v0):
        rec = integrate(v0, SimConfig(grid=G16, t_end=0.1, sigma_frozen="mean"))
        assert np.all(np.isfinite(rec.sigma_energy))
        rec = integrate(v0, SimConfig(grid=G16, t_end=0.1, sigma_frozen="none"))
        assert np.all(np.isnan(rec.sigma_energy))

    def test_final_state_is_translated_array(self, v0):
        rec = integrate(v0, SimConfig(grid=G16, t_end=0.1), keep_states=True)
        st = MixedState.from_array(rec.final_state(), G16, tilde=True)
        assert st.validate() is st
