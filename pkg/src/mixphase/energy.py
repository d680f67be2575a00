"""Sobolev norms, the symmetrizer energy and the convergence studies.

Norms are domain averages: the L2 norm of a field is the root mean square
of its samples, so ``sqrt(2) a cos(k0 x)`` has L2 norm ``a`` and H^s norm
``a (1 + k0^2)^(s/2)``.

The symmetrizer energy quantizes the regularized Lax symmetrizer with
coefficients frozen at one state: per mode

    Sigma(k) = (1 - theta_lam(k))^2 (V^{-1})^* V^{-1}(k) + theta_lam(k)^2 I

and ``E = sum_k <Sigma(k) Lambda^s v(k), Lambda^s v(k)>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import MixedState
from .spectral import SpectralOps
from .symbols2p import FrozenPoint, eig_projected


def _state_array(v) -> np.ndarray:
    return v.as_array() if isinstance(v, MixedState) else np.asarray(v, dtype=float)


def sobolev_norm(v, s: float, ops: SpectralOps | None = None) -> float:
    """H^s norm over all components of a state (or any stack of fields)."""
    if s < 0:
        raise ValueError("Sobolev order must be >= 0")
    arr = _state_array(v)
    ops = ops or SpectralOps(v.grid)
    return math.sqrt(ops.hs_sq_hat(ops.forward(arr), s))


def l2_norm(v, ops: SpectralOps | None = None) -> float:
    return sobolev_norm(v, 0.0, ops)


def symmetrizer_matrix(B, w, z, gamma, xi) -> np.ndarray:
    """``(V^{-1})^* V^{-1}`` of the projected symbol at one frequency."""
    V_inv = eig_projected(FrozenPoint(xi, B, w, z, gamma)).V_inv
    return V_inv.conj().T @ V_inv


class SigmaOperator:
    """Frozen-coefficient symmetrizer on one grid.

    ``Sigma(k)`` is tabulated for every stored mode and for its mirror
    ``-k``; the half-complex storage then gives the exact full sum.
    """

    def __init__(self, ops: SpectralOps, B, w, z, gamma, s: float, lam: float, identity: bool = False):
        self.ops = ops
        self.s = s
        self.lam = lam
        theta = ops.theta(lam)
        shape = ops.kmag.shape
        eye = np.eye(5)
        sig = np.broadcast_to(eye, shape + (5, 5)).copy()
        mirror = sig.copy()
        lo, hi = math.inf, -math.inf
        if not identity:
            for iy, ix in zip(*np.nonzero(theta < 1.0)):
                kx, ky = ops.kx[0, ix], ops.ky[iy, 0]
                t = theta[iy, ix]
                for target, xi in ((sig, (kx, ky)), (mirror, (-kx, -ky))):
                    S = (1 - t) ** 2 * symmetrizer_matrix(B, w, z, gamma, xi) + t**2 * eye
                    target[iy, ix] = S
                    ev = np.linalg.eigvalsh(S)
                    lo, hi = min(lo, ev[0]), max(hi, ev[-1])
        if lo == math.inf:
            lo = hi = 1.0
        elif np.any(theta >= 1.0):
            lo, hi = min(lo, 1.0), max(hi, 1.0)
        self.c_lower, self.c_upper = float(lo), float(hi)
        # effective weight per stored mode: mirror modes fold into interior columns
        wts = ops.weights
        self.sigma = sig
        self.sigma_mirror = mirror
        self.eff = np.where((wts == 2.0)[..., None, None], sig + mirror, sig)
        self.lam_s = ops.lambda_s(s)

    def energy(self, vh) -> float:
        u = self.lam_s * vh
        u = np.moveaxis(u, 0, -1)
        val = np.einsum("yxi,yxij,yxj->", u.conj(), self.eff, u)
        return float(val.real)

    def min_eigenvalue(self) -> float:
        return self.c_lower


def _frozen_values(frozen):
    if isinstance(frozen, FrozenPoint):
        return frozen.B, frozen.w, frozen.z, frozen.gamma
    B, w, z, gamma = frozen
    return float(B), np.asarray(w, float), np.asarray(z, float), float(gamma)


def sigma_energy(v_tilde, frozen, s: float, lam: float, ops: SpectralOps | None = None) -> float:
    """Symmetrizer energy of a translated state.

    ``frozen`` is a :class:`FrozenPoint` (its frequency is ignored) or a
    tuple ``(B, w, z, gamma)``.
    """
    ops = ops or SpectralOps(v_tilde.grid)
    op = SigmaOperator(ops, *_frozen_values(frozen), s, lam)
    return op.energy(ops.forward(_state_array(v_tilde)))


def mean_frozen_point(v_tilde: MixedState, B_bar: float, gamma: float):
    """Spatial means of the untranslated coefficients, ``(B, w, z, gamma)``."""
    return (B_bar + float(v_tilde.B.mean()), v_tilde.w.mean(axis=(1, 2)), v_tilde.z.mean(axis=(1, 2)), gamma)


def norm_equivalence_constants(frozen, s: float, lam: float, grid) -> tuple[float, float]:
    """Extreme eigenvalues of ``Sigma(k)`` over all grid modes."""
    op = SigmaOperator(SpectralOps(grid), *_frozen_values(frozen), s, lam)
    return op.c_lower, op.c_upper


@dataclass
class GronwallFit:
    c: float
    predicted_T: float
    M: float
    M_tilde: float
    residual: float
    flagged: bool
    c_least_squares: float
    c_envelope: float


def gronwall_fit(traj) -> GronwallFit:
    """One-sided exponential envelope ``||v(t)||_s <= M exp(c t)``.

    ``c`` is the larger of the least-squares slope of ``log(N/M)`` through
    the origin and the smallest slope that keeps every sample below the
    envelope.  ``residual`` is the root-mean-square gap between the
    envelope and the data in log space, divided by the log range of the
    data.  When ``c <= 0`` or the norm is constant the predicted time is
    infinite and the fit is flagged.
    """
    t = np.asarray(traj.times, dtype=float)
    N = np.asarray(traj.hs_norm, dtype=float)
    if len(t) < 10:
        raise ValueError(f"need at least 10 records for a fit, got {len(t)}")
    M = float(N[0])
    M_tilde = float(N.max())
    if M <= 0 or np.all(N == N[0]):
        return GronwallFit(0.0, math.inf, M, M_tilde, 0.0, True, 0.0, 0.0)
    y = np.log(N / M)
    pos = t > 0
    c_ls = float(np.sum(t * y) / np.sum(t * t))
    c_env = float(np.max(y[pos] / t[pos]))
    c = max(c_ls, c_env)
    span = float(y.max() - y.min())
    resid = float(np.sqrt(np.mean((c * t - y) ** 2)) / span) if span > 0 else 0.0
    if c <= 0:
        return GronwallFit(c, math.inf, M, M_tilde, resid, True, c_ls, c_env)
    T = math.log(M_tilde / M) / c if M_tilde > M else math.inf
    return GronwallFit(c, T, M, M_tilde, resid, not math.isfinite(T), c_ls, c_env)


@dataclass
class ConvergenceRow:
    eps: float
    eps_next: float
    distance: float
    order: float


class StudyFailed(RuntimeError):
    def __init__(self, reason, rows):
        super().__init__(reason)
        self.reason = reason
        self.rows = rows


def epsilon_convergence_study(cfg, eps_list, v0=None) -> list[ConvergenceRow]:
    """Distances between trajectories at consecutive mollification widths.

    Every run starts from the same data and uses the same step.  The
    distance is ``max_t ||v^{eps_i}(t) - v^{eps_{i+1}}(t)||_{L2}`` over the
    common record times; the order compares consecutive distances,
    ``log(d_i / d_{i+1}) / log(eps_i / eps_{i+1})`` (NaN for the first row
    or when a distance vanishes).
    """
    from .solver import choose_dt, integrate, make_initial_data

    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("need at least three mollification widths")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])) or eps_list[-1] <= 0:
        raise ValueError("mollification widths must be positive and strictly decreasing")
    if v0 is None:
        v0 = make_initial_data(cfg.grid, cfg.constants, cfg.amplitude, cfg.seed, cfg.s_order)
    arr0 = _state_array(v0)
    dt, _ = choose_dt(cfg, arr0)
    ops = SpectralOps(cfg.grid)
    trajs = []
    rows: list[ConvergenceRow] = []
    for e in eps_list:
        tr = integrate(arr0, cfg.replace(epsilon=e, dt=dt, sigma_frozen="none"), keep_states=True)
        if tr.aborted:
            raise StudyFailed(f"run at eps={e} aborted: {tr.reason}", rows)
        trajs.append(tr)
    dists = []
    for a, b in zip(trajs, trajs[1:]):
        dists.append(max(math.sqrt(ops.l2_sq_hat(ops.forward(x - y))) for x, y in zip(a.states, b.states)))
    for i, d in enumerate(dists):
        order = math.nan
        if i > 0 and d > 0 and dists[i - 1] > 0:
            order = math.log(dists[i - 1] / d) / math.log(eps_list[i - 1] / eps_list[i])
        rows.append(ConvergenceRow(eps_list[i], eps_list[i + 1], d, order))
    return rows
