"""Hydrostatic pressure recovery and the momentum balance check.

The pressure solves

    Delta P = -sum_ij d_j w_i d_i w_j - div div (B (1-B) z z^T) - gamma Delta B

with zero mean.  Products are formed in physical space and truncated by
the 2/3 rule, so for band-limited inputs the identities below hold to
round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import MixedState, ModelConstants
from .spectral import SpectralField, SpectralOps


@dataclass
class PressureField:
    P: SpectralField
    gradP: np.ndarray


def _fields(v):
    if isinstance(v, MixedState):
        return v.B, v.w, v.z, v.grid
    raise TypeError("expected a MixedState")


def pressure_rhs(v: MixedState, gamma: float, ops: SpectralOps | None = None) -> SpectralField:
    """Right-hand side of the pressure Poisson equation (coefficients)."""
    B, w, z, grid = _fields(v)
    ops = ops or SpectralOps(grid)
    mask = ops.dealias_mask
    wh = ops.forward(w)
    dw = [[ops.inverse(1j * (ops.dkx if j == 0 else ops.dky) * wh[i]) for j in range(2)] for i in range(2)]
    quad = sum(dw[i][j] * dw[j][i] for i in range(2) for j in range(2))
    stress_hat = ops.forward(B * (1 - B) * z[:, None] * z[None, :]) * mask
    dk = (ops.dkx, ops.dky)
    divdiv = sum(-dk[i] * dk[j] * stress_hat[i, j] for i in range(2) for j in range(2))
    lap_B = -ops.k2 * ops.forward(B)
    rhs = -ops.forward(quad) * mask - divdiv - gamma * lap_B
    return SpectralField(rhs, grid)


def pressure_solve(v: MixedState, gamma: float, ops: SpectralOps | None = None) -> PressureField:
    """Zero-mean pressure and its spectral gradient."""
    ops = ops or SpectralOps(v.grid)
    rhs = pressure_rhs(v, gamma, ops)
    Ph = ops.inv_laplacian_hat(rhs.coeffs)
    return PressureField(SpectralField(Ph, v.grid), ops.inverse(ops.grad_hat(Ph)))


def momentum_flux(v: MixedState, gamma: float, ops: SpectralOps | None = None) -> np.ndarray:
    """Coefficients of ``w.grad w + div(B (1-B) z z^T) + gamma grad B``."""
    B, w, z, grid = _fields(v)
    ops = ops or SpectralOps(grid)
    mask = ops.dealias_mask
    wh = ops.forward(w)
    dx = ops.inverse(1j * ops.dkx * wh)
    dy = ops.inverse(1j * ops.dky * wh)
    adv = ops.forward(w[0] * dx + w[1] * dy) * mask
    stress_hat = ops.forward(B * (1 - B) * z[:, None] * z[None, :]) * mask
    div_stress = 1j * ops.dkx * stress_hat[:, 0] + 1j * ops.dky * stress_hat[:, 1]
    return adv + div_stress + gamma * ops.grad_hat(ops.forward(B))


def helmholtz_residual(u, ops: SpectralOps) -> float:
    """Relative gap in ``P u + grad lap^{-1} div u = u`` for a vector field."""
    uh = ops.forward(u)
    back = ops.leray_hat(uh) + ops.grad_hat(ops.inv_laplacian_hat(ops.div_hat(uh)))
    return math.sqrt(ops.l2_sq_hat(back - uh) / max(ops.l2_sq_hat(uh), 1e-300))


def poisson_roundtrip_residual(v: MixedState, gamma: float, ops: SpectralOps | None = None) -> float:
    """Relative gap between ``Delta P`` and the zero-mean right-hand side."""
    ops = ops or SpectralOps(v.grid)
    rhs = pressure_rhs(v, gamma, ops).coeffs.copy()
    rhs[0, 0] = 0.0
    P = ops.inv_laplacian_hat(rhs)
    lap = -ops.k2 * P
    return math.sqrt(ops.l2_sq_hat(lap - rhs) / max(ops.l2_sq_hat(rhs), 1e-300))


def momentum_residual(v_tilde: MixedState, constants: ModelConstants, epsilon: float,
                      rhs_from_solver=None, ops: SpectralOps | None = None) -> float:
    """L2 norm of ``d_t w + w.grad w + div(B(1-B) z z^T) + gamma grad B + grad P``.

    Every term except ``d_t w`` is evaluated at the mollified state
    ``J(v~) + v_bar``; ``d_t w`` is the w slot of the solver's right-hand
    side at the same ``epsilon`` unless supplied.
    """
    from .solver import MollifiedSystem, SimConfig

    if not v_tilde.tilde:
        raise ValueError("momentum_residual expects a translated state")
    cfg = SimConfig(constants=constants, grid=v_tilde.grid, epsilon=epsilon)
    sys_ = MollifiedSystem(cfg, ops)
    ops = sys_.ops
    vh = ops.forward(v_tilde.as_array())
    if rhs_from_solver is None:
        rhs_w_hat = sys_.rhs_hat(vh)[1:3]
    else:
        rhs_w_hat = ops.forward(np.asarray(rhs_from_solver, dtype=float))
    c = sys_.coefficients(vh)
    cs = MixedState.from_array(c, v_tilde.grid)
    N = momentum_flux(cs, constants.gamma, ops)
    P = pressure_solve(cs, constants.gamma, ops)
    R = rhs_w_hat + N + ops.grad_hat(P.P.coeffs)
    return math.sqrt(ops.l2_sq_hat(R))


def z_rhs_pressure_gap(v_tilde: MixedState, cfg, phi) -> tuple[float, float]:
    """Change in the z and w slots of the right-hand side when ``grad phi`` is injected.

    The gradient is added to the w slot before projection, which is where
    a pressure gradient would enter.  Both returned gaps are relative.
    """
    from .solver import MollifiedSystem

    sys_ = MollifiedSystem(cfg)
    ops = sys_.ops
    vh = ops.forward(v_tilde.as_array())
    base = sys_.rhs_hat(vh)
    pert = sys_.rhs_hat(vh, w_forcing_hat=ops.grad_hat(ops.forward(phi)))
    scale = math.sqrt(max(ops.l2_sq_hat(base), 1e-300))
    dz = math.sqrt(ops.l2_sq_hat(pert[3:5] - base[3:5])) / scale
    dw = math.sqrt(ops.l2_sq_hat(pert[1:3] - base[1:3])) / scale
    return dz, dw
