import math
from types import SimpleNamespace

import numpy as np
import pytest

from mixphase.energy import (
    SigmaOperator,
    epsilon_convergence_study,
    gronwall_fit,
    l2_norm,
    mean_frozen_point,
    norm_equivalence_constants,
    sigma_energy,
    sobolev_norm,
    symmetrizer_matrix,
)
from mixphase.fields import Grid2, MixedState, ModelConstants
from mixphase.solver import SimConfig, make_initial_data
from mixphase.spectral import SpectralOps

G = Grid2(16)
C = ModelConstants()


@pytest.fixture(scope="module")
def v0():
    return make_initial_data(G, C, 1e-2, 3)


def test_sobolev_norm_single_mode():
    x, _ = G.coords
    f = np.zeros((5, 16, 16))
    f[0] = np.sqrt(2) * 0.5 * np.cos(2 * x)
    v = MixedState.from_array(f, G, tilde=True)
    assert sobolev_norm(v, 2.0) == pytest.approx(0.5 * 5.0, rel=1e-13)
    assert l2_norm(v) == pytest.approx(0.5, rel=1e-13)
    with pytest.raises(ValueError):
        sobolev_norm(v, -1.0)


def test_symmetrizer_matrix_is_positive():
    S = symmetrizer_matrix(0.4, np.array([0.1, 0.0]), np.array([0.05, 0.1]), 1.0, (0.6, 0.8))
    np.testing.assert_allclose(S, S.conj().T, atol=1e-15)
    assert np.linalg.eigvalsh(S).min() > 0


class TestSigma:
    def test_identity_operator_gives_sobolev_energy(self, v0):
        ops = SpectralOps(G)
        op = SigmaOperator(ops, 0.5, np.zeros(2), np.zeros(2), 1.0, 3.0, 2.0, identity=True)
        vh = ops.forward(v0.as_array())
        assert op.energy(vh) == pytest.approx(sobolev_norm(v0, 3.0) ** 2, rel=1e-12)
        assert (op.c_lower, op.c_upper) == (1.0, 1.0)

    def test_norm_equivalence(self, v0):
        frozen = (0.5, np.zeros(2), np.zeros(2), 1.0)
        lo, hi = norm_equivalence_constants(frozen, 3.0, 2.0, G)
        assert 0 < lo <= 1.0 <= hi
        E = sigma_energy(v0, frozen, 3.0, 2.0)
        hs2 = sobolev_norm(v0, 3.0) ** 2
        assert lo * hs2 * (1 - 1e-12) <= E <= hi * hs2 * (1 + 1e-12)

    def test_low_modes_use_identity(self):
        ops = SpectralOps(G)
        op = SigmaOperator(ops, 0.5, np.zeros(2), np.zeros(2), 1.0, 3.0, 2.0)
        np.testing.assert_array_equal(op.sigma[0, 1], np.eye(5))
        assert not np.allclose(op.sigma[0, 5], np.eye(5))

    def test_mean_point(self, v0):
        B, w, z, g = mean_frozen_point(v0, 0.5, 1.0)
        assert B == pytest.approx(0.5, abs=1e-15) and np.abs(w).max() < 1e-15 and g == 1.0


class TestGronwall:
    @staticmethod
    def traj(t, N):
        return SimpleNamespace(times=list(t), hs_norm=list(N))

    def test_exact_exponential(self):
        t = np.linspace(0, 1, 21)
        fit = gronwall_fit(self.traj(t, 2.0 * np.exp(0.3 * t)))
        assert fit.c == pytest.approx(0.3, rel=1e-12)
        assert fit.residual < 1e-12 and not fit.flagged
        assert fit.M == 2.0 and fit.M_tilde == pytest.approx(2.0 * math.exp(0.3))
        assert fit.predicted_T == pytest.approx(1.0)

    def test_decay_is_flagged(self):
        t = np.linspace(0, 1, 21)
        fit = gronwall_fit(self.traj(t, np.exp(-t)))
        assert fit.flagged and math.isinf(fit.predicted_T) and fit.c < 0

    def test_envelope_covers_data(self):
        t = np.linspace(0, 1, 41)
        N = np.exp(0.2 * t + 0.05 * np.sin(9 * t))
        fit = gronwall_fit(self.traj(t, N))
        assert np.all(np.log(N) <= fit.c * t + 1e-15)

    def test_constant_norm(self):
        fit = gronwall_fit(self.traj(np.linspace(0, 1, 12), np.ones(12)))
        assert fit.flagged and fit.c == 0.0

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            gronwall_fit(self.traj(range(5), np.ones(5)))


class TestConvergenceStudy:
    def test_validation(self):
        cfg = SimConfig(grid=G, t_end=0.1)
        with pytest.raises(ValueError):
            epsilon_convergence_study(cfg, [0.2, 0.1])
        with pytest.raises(ValueError):
            epsilon_convergence_study(cfg, [0.2, 0.2, 0.1])

    def test_zero_amplitude(self):
        rows = epsilon_convergence_study(SimConfig(grid=G, t_end=0.1, amplitude=0.0), [0.4, 0.2, 0.1])
        assert [r.distance for r in rows] == [0.0, 0.0]
        assert all(math.isnan(r.order) for r in rows)

    def test_distances_shrink(self):
        h = G.spacing
        cfg = SimConfig(grid=G, t_end=0.2, amplitude=1e-2, seed=3)
        rows = epsilon_convergence_study(cfg, [h, h / 2, h / 4, h / 8])
        d = [r.distance for r in rows]
        assert d[0] > d[1] > d[2] > 0
        assert rows[-1].order > 1.0
