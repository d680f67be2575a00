"""Matrix and symbol algebra of the two-phase system.

State ordering is ``(B, w1, w2, z1, z2)`` in mixed variables and
``(B, vS1, vS2, vL1, vL2)`` in primitive variables.  The symbol of the
first-order part is ``i (xi_1 A1 + xi_2 A2)``; eigenvalues are reported as
the real numbers ``lam`` with ``symbol v = i lam v``.

The projected symbol is always formed as the product of the block Leray
symbol with the unprojected symbol.  Closed forms for it and for its
eigenvectors are kept as cross-checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import mixing_jacobian


class DegenerateError(ValueError):
    """The frozen point lies outside the open hyperbolic region."""


def _as_vec(a, size=2):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape != (size,):
        raise ValueError(f"expected a {size}-vector, got shape {a.shape}")
    return a


def _check_B(B):
    if not 0.0 < B < 1.0:
        raise ValueError(f"B must lie in (0, 1), got {B}")


@dataclass(frozen=True)
class FrozenPoint:
    """Frequency and frozen coefficient values for symbol evaluation."""

    xi: np.ndarray
    B: float
    w: np.ndarray = field(default_factory=lambda: np.zeros(2))
    z: np.ndarray = field(default_factory=lambda: np.zeros(2))
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "xi", _as_vec(self.xi))
        object.__setattr__(self, "w", _as_vec(self.w))
        object.__setattr__(self, "z", _as_vec(self.z))
        object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not np.linalg.norm(self.xi) > 0:
            raise ValueError("frequency xi must be nonzero")
        _check_B(self.B)
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def norm_xi(self) -> float:
        return float(np.hypot(*self.xi))

    def with_xi(self, xi) -> FrozenPoint:
        return FrozenPoint(xi, self.B, self.w, self.z, self.gamma)


# flux matrices ---------------------------------------------------------------

def flux_primitive(B, v_S, v_L, gamma):
    """Coefficient matrices of the primitive system, ``(A1, A2)``."""
    _check_B(B)
    v_S, v_L = _as_vec(v_S), _as_vec(v_L)
    out = []
    for j in range(2):
        A = np.diag([v_S[j], v_S[j], v_S[j], v_L[j], v_L[j]]).astype(float)
        A[0, 1 + j] = B
        A[1 + j, 0] = gamma / B
        out.append(A)
    return tuple(out)


def friedrichs_symmetrizer(B, gamma) -> np.ndarray:
    """Diagonal symmetrizer ``diag(gamma/B, B, B, 1-B, 1-B)``."""
    _check_B(B)
    return np.diag([gamma / B, B, B, 1.0 - B, 1.0 - B])


def flux_mixed_entries(B, w1, w2, z1, z2, gamma):
    """Mixed-variable flux matrices with broadcasting over array inputs.

    Returns two arrays of shape ``(5, 5) + shape`` for fields of a given
    shape, or ``(5, 5)`` for scalars.
    """
    B, w1, w2, z1, z2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (B, w1, w2, z1, z2)))
    zero = np.zeros_like(B)
    g = gamma + zero
    c = 1.0 - 2.0 * B
    bl = B * (1.0 - B)
    d1 = w1 + z1 * c
    d2 = w2 + z2 * c
    A1 = [
        [d1, B, zero, bl, zero],
        [g + z1**2 * c, w1 + B * z1, zero, 2 * bl * z1, zero],
        [z1 * z2 * c, B * z2, w1, bl * z2, bl * z1],
        [g / B - z1**2, z1, zero, d1, zero],
        [-z1 * z2, zero, z1, zero, d1],
    ]
    A2 = [
        [d2, zero, B, zero, bl],
        [z1 * z2 * c, w2, B * z1, bl * z2, bl * z1],
        [g + z2**2 * c, zero, w2 + B * z2, zero, 2 * bl * z2],
        [-z1 * z2, z2, zero, d2, zero],
        [g / B - z2**2, zero, z2, zero, d2],
    ]
    return np.array(A1), np.array(A2)


def flux_mixed(p: FrozenPoint):
    """The two 5x5 mixed-variable flux matrices at a point."""
    return flux_mixed_entries(p.B, p.w[0], p.w[1], p.z[0], p.z[1], p.gamma)


def flux_mixed_conjugated(p: FrozenPoint):
    """Mixed flux matrices obtained as ``J A_j J^{-1}`` from the primitive ones.

    ``J`` is the Jacobian of the change of variables; this is an independent
    construction used to guard the transcribed matrices.
    """
    v_S = p.w + (1.0 - p.B) * p.z
    v_L = p.w - p.B * p.z
    J = mixing_jacobian(p.B, v_S, v_L)
    Jinv = np.linalg.inv(J)
    return tuple(J @ A @ Jinv for A in flux_primitive(p.B, v_S, v_L, p.gamma))


def classical_symmetrizer_mixed(p: FrozenPoint) -> np.ndarray:
    """Friedrichs symmetrizer of the mixed-variable flux matrices."""
    B, z, g = p.B, p.z, p.gamma
    A0 = np.zeros((5, 5))
    A0[0, 0] = g / B + z @ z
    A0[0, 1:3] = A0[1:3, 0] = -z
    A0[1, 1] = A0[2, 2] = 1.0
    A0[3, 3] = A0[4, 4] = B * (1.0 - B)
    return A0


def xi_flux(p: FrozenPoint) -> np.ndarray:
    """Real contraction ``xi_1 A1 + xi_2 A2``."""
    A1, A2 = flux_mixed(p)
    return p.xi[0] * A1 + p.xi[1] * A2


def symbol_A(p: FrozenPoint) -> np.ndarray:
    """Principal symbol ``i (xi_1 A1 + xi_2 A2)``."""
    return 1j * xi_flux(p)


# unprojected eigenstructure ---------------------------------------------------

def eigenvalues_unprojected(p: FrozenPoint) -> np.ndarray:
    xi, w, z, B = p.xi, p.w, p.z, p.B
    slow = (w - B * z) @ xi
    fast = (w + (1.0 - B) * z) @ xi
    c = np.sqrt(p.gamma) * p.norm_xi
    return np.array([slow, slow, fast, fast - c, fast + c])


def eig_unprojected(p: FrozenPoint):
    """Eigenvalues, right eigenvector matrix ``U`` and its inverse.

    Column ``k`` of ``U`` and row ``k`` of ``U_inv`` belong to
    ``eigvals[k]``.
    """
    xi, B, g = p.xi, p.B, p.gamma
    n = p.norm_xi
    x1, x2 = xi
    z1, z2 = p.z
    sg = np.sqrt(g)
    U = np.array([
        [0, 0, 0, -B / sg, B / sg],
        [-(1 - B), 0, -B * x2 / n, B * (g * x1 - z1 * sg * n) / (g * n), B * (g * x1 + z1 * sg * n) / (g * n)],
        [0, -(1 - B), B * x1 / n, B * (g * x2 - z2 * sg * n) / (g * n), B * (g * x2 + z2 * sg * n) / (g * n)],
        [1, 0, -x2 / n, x1 / n, x1 / n],
        [0, 1, x1 / n, x2 / n, x2 / n],
    ], dtype=float)
    zx = p.z @ xi
    U_inv = np.array([
        [z1, -1, 0, B, 0],
        [z2, 0, -1, 0, B],
        [(x2 * z1 - x1 * z2) / n, -x2 / n, x1 / n, -(1 - B) * x2 / n, (1 - B) * x1 / n],
        [-(sg * n + B * zx) / (2 * B * n), x1 / (2 * n), x2 / (2 * n), (1 - B) * x1 / (2 * n), (1 - B) * x2 / (2 * n)],
        [(sg * n - B * zx) / (2 * B * n), x1 / (2 * n), x2 / (2 * n), (1 - B) * x1 / (2 * n), (1 - B) * x2 / (2 * n)],
    ], dtype=float)
    return eigenvalues_unprojected(p), U, U_inv


def lax_symmetrizer_unprojected(p: FrozenPoint) -> np.ndarray:
    """Gram matrix ``(U^{-1})^* U^{-1}``, Hermitian positive definite."""
    _, _, U_inv = eig_unprojected(p)
    return U_inv.conj().T @ U_inv


# projection --------------------------------------------------------------------

def leray_symbol(xi) -> np.ndarray:
    """Block projector: 1 on B, ``I - xi xi^T/|xi|^2`` on w, identity on z."""
    xi = _as_vec(xi)
    n2 = xi @ xi
    if not n2 > 0:
        raise ValueError("the projector symbol is undefined at xi = 0")
    P = np.eye(5)
    P[1:3, 1:3] -= np.outer(xi, xi) / n2
    return P


def projected_flux(p: FrozenPoint) -> np.ndarray:
    """Real matrix ``P(xi) (xi_1 A1 + xi_2 A2)``."""
    return leray_symbol(p.xi) @ xi_flux(p)


def projected_symbol(p: FrozenPoint) -> np.ndarray:
    """Projected principal symbol ``P(xi) i (xi_1 A1 + xi_2 A2)``."""
    return 1j * projected_flux(p)


def projected_symbol_closed_form(p: FrozenPoint, corrected: bool = True) -> np.ndarray:
    """Entrywise closed form of the projected symbol.

    With ``corrected=False`` the transcription is literal: the coefficient
    of the cross term in the third auxiliary polynomial enters with a plus
    sign and the (4,4) entry lacks the slip velocity.  ``corrected=True``
    flips that sign and restores ``z`` in the (4,4) drift, which makes the
    closed form agree with the matrix product.
    """
    B, g = p.B, p.gamma
    x1, x2 = p.xi
    z1, z2 = p.z
    w, z, xi = p.w, p.z, p.xi
    n2 = xi @ xi
    zx, wx = z @ xi, w @ xi
    cr = x2 * z1 - x1 * z2
    mu1 = zx * cr
    mu2 = wx * x2 + B * x1 * cr
    mu3 = wx * x1 + (-1.0 if corrected else 1.0) * B * x2 * cr
    mu4 = z2 * (x2**2 - x1**2) + 2 * z1 * x1 * x2
    mu5 = z1 * (x1**2 - x2**2) + 2 * z2 * x1 * x2
    drift = (w + (1 - 2 * B) * z) @ xi
    drift44 = drift if corrected else (w + (1 - 2 * B)) @ xi
    bl = B * (1 - B)
    M = np.array([
        [drift, B * x1, B * x2, bl * x1, bl * x2],
        [x2 * (1 - 2 * B) * mu1 / n2, x2 * mu2 / n2, -x2 * mu3 / n2, bl * x2 * mu4 / n2, -bl * x2 * mu5 / n2],
        [-x1 * (1 - 2 * B) * mu1 / n2, -x1 * mu2 / n2, x1 * mu3 / n2, -bl * x1 * mu4 / n2, bl * x1 * mu5 / n2],
        [g * x1 / B - z1 * zx, zx, 0, drift44, 0],
        [g * x2 / B - z2 * zx, 0, zx, 0, drift],
    ])
    return 1j * M


# deltas and hyperbolicity ------------------------------------------------------

def deltas(p: FrozenPoint):
    """The three quadratic forms controlling the projected eigenstructure."""
    B, g = p.B, p.gamma
    n2 = p.xi @ p.xi
    zx, wx = p.z @ p.xi, p.w @ p.xi
    d1 = (1 - B) * zx**2 - g * n2 + wx * zx
    d2 = g * n2 - B * zx**2
    d3 = (1 - 3 * B * (1 - B)) * zx**2 + wx**2 - g * (1 - B) * n2 + 2 * (1 - 2 * B) * wx * zx
    return d1, d2, d3


def delta_scale(p: FrozenPoint) -> float:
    n2 = p.xi @ p.xi
    return float(p.gamma * n2 + (p.w @ p.w) * n2 + (p.z @ p.z) * n2)


def eigenvalues_projected(p: FrozenPoint) -> np.ndarray:
    """Real eigenvalues in eigenvector-column order.

    Order is ``[0, (w-Bz).xi, (w+(1-B)z).xi, drift - r, drift + r]`` with
    ``drift = (w+(1-2B)z).xi`` and ``r = sqrt((1-B) Delta_2)``.
    """
    B = p.B
    _, d2, _ = deltas(p)
    drift = (p.w + (1 - 2 * B) * p.z) @ p.xi
    r = np.sqrt((1 - B) * d2) if d2 >= 0 else np.nan
    return np.array([0.0, (p.w - B * p.z) @ p.xi, (p.w + (1 - B) * p.z) @ p.xi, drift - r, drift + r])


@dataclass
class ConditionSlack:
    index: int
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.lhs > self.rhs

    def as_dict(self):
        return {"index": self.index, "lhs": float(self.lhs), "rhs": float(self.rhs),
                "slack": float(self.slack), "holds": bool(self.holds)}


def sufficient_conditions(B, w, z, gamma) -> list[ConditionSlack]:
    """Six frequency-free inequalities guaranteeing the pointwise conditions.

    They are trace and determinant tests for the quadratic forms in xi
    behind ``-Delta_1``, ``Delta_2`` and ``-Delta_3``.  The second one is
    evaluated in its published form; see :func:`exact_delta1_determinant`
    for the exact determinant.
    """
    w, z = _as_vec(w), _as_vec(z)
    g = gamma
    w1, w2 = w
    z1, z2 = z
    zz, wz, ww = z @ z, w @ z, w @ w
    a = 1 - 3 * B * (1 - B)
    c = 1 - 2 * B
    n11 = a * z1**2 + 2 * w1 * z1 * c + w1**2
    n22 = a * z2**2 + 2 * w2 * z2 * c + w2**2
    n12 = a * z1 * z2 + c * (w1 * z2 + w2 * z1) + w1 * w2
    trN = a * zz + ww + 2 * c * wz
    return [
        ConditionSlack(1, 2 * g, (1 - B) * zz + wz),
        ConditionSlack(2, g**2, g * (1 - B) * zz + g * wz + w1 * z2**2 / 4 + w2 * z1**2 / 4),
        ConditionSlack(3, g, B * zz),
        ConditionSlack(4, 2 * g, B * zz),
        ConditionSlack(5, 2 * g * (1 - B), trN),
        ConditionSlack(6, g**2 * (1 - B) ** 2, g * (1 - B) * trN - n11 * n22 + n12**2),
    ]


def exact_delta1_determinant(B, w, z, gamma) -> float:
    """Determinant of the 2x2 form ``-Delta_1(xi) = xi^T Q xi``.

    ``Q = gamma I - (1-B) z z^T - (w z^T + z w^T)/2``; together with a
    positive trace, a positive value means ``Delta_1 < 0`` for every xi.
    """
    w, z = _as_vec(w), _as_vec(z)
    return float(gamma**2 - gamma * ((1 - B) * (z @ z) + w @ z) - (w[0] * z[1] - w[1] * z[0]) ** 2 / 4)


@dataclass
class HyperbolicityReport:
    verdict: str
    pointwise_verdict: str | None
    uniform_verdict: str
    deltas: tuple | None
    pointwise: dict | None
    conditions: list[ConditionSlack]
    exact_delta1_det: float

    @property
    def failing_conditions(self) -> list[int]:
        return [c.index for c in self.conditions if not c.holds]

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "pointwise_verdict": self.pointwise_verdict,
            "uniform_verdict": self.uniform_verdict,
            "deltas": None if self.deltas is None else [float(d) for d in self.deltas],
            "pointwise": self.pointwise,
            "conditions": [c.as_dict() for c in self.conditions],
            "failing_conditions": self.failing_conditions,
            "exact_delta1_determinant": self.exact_delta1_det,
        }


_RANK = {"interior": 0, "boundary": 1, "violated": 2}
BOUNDARY_TOL = 1e-12


def pointwise_classification(p: FrozenPoint):
    d1, d2, d3 = deltas(p)
    tol = BOUNDARY_TOL * delta_scale(p)
    flags = {
        "delta1_nonzero": bool(abs(d1) > tol),
        "delta2_positive": bool(d2 > tol),
        "delta3_nonzero": bool(abs(d3) > tol),
    }
    if all(flags.values()):
        verdict = "interior"
    elif d2 < -tol:
        verdict = "violated"
    else:
        verdict = "boundary"
    return (d1, d2, d3), flags, verdict


def hyperbolicity_region(B, w, z, gamma, xi=None) -> HyperbolicityReport:
    """Classify a frozen state, optionally at a particular frequency.

    The uniform verdict comes from the six frequency-free inequalities; a
    condition whose slack is within ``1e-12`` of zero counts as boundary.
    The overall verdict is the worse of the two.
    """
    conds = sufficient_conditions(B, w, z, gamma)
    scale = max(1.0, max(abs(c.lhs) + abs(c.rhs) for c in conds))
    if all(c.slack > BOUNDARY_TOL * scale for c in conds):
        uniform = "interior"
    elif all(c.slack >= -BOUNDARY_TOL * scale for c in conds):
        uniform = "boundary"
    else:
        uniform = "violated"
    dl = flags = pv = None
    verdict = uniform
    if xi is not None:
        p = FrozenPoint(xi, B, w, z, gamma)
        dl, flags, pv = pointwise_classification(p)
        verdict = max(uniform, pv, key=_RANK.__getitem__)
    return HyperbolicityReport(verdict, pv, uniform, dl, flags, conds, exact_delta1_determinant(B, w, z, gamma))


# projected eigenstructure --------------------------------------------------------

@dataclass
class ProjectedEigen:
    """Eigen data of the projected symbol at one frozen point.

    ``eigvals[k]`` belongs to column ``k`` of ``V`` and row ``k`` of
    ``V_inv``.  ``p1, p2`` and ``q1, q2`` are the reconstructed values of
    the polynomial entries that have no closed form.
    """

    eigvals: np.ndarray
    V: np.ndarray
    V_inv: np.ndarray
    p1: float
    p2: float
    q1: float
    q2: float


def _closed_form_V(p: FrozenPoint, d1, d2):
    B = p.B
    x1, x2 = p.xi
    n = p.norm_xi
    s1 = np.sqrt(1 - B)
    sd = np.sqrt(d2)
    cr = x1 * p.z[1] - x2 * p.z[0]
    V = np.array([
        [B * n * ((p.w - B * p.z) @ p.xi) / d1, 0, 0, -B * n * s1 / sd, B * n * s1 / sd],
        [0, (1 - B) * x2 / n, -B * x2 / n, B * x2 * cr * s1 / (n * sd), -B * x2 * cr * s1 / (n * sd)],
        [0, -(1 - B) * x1 / n, B * x1 / n, -B * x1 * cr * s1 / (n * sd), B * x1 * cr * s1 / (n * sd)],
        [x1 / n, -x2 / n, -x2 / n, x1 / n, x1 / n],
        [x2 / n, x1 / n, x1 / n, x2 / n, x2 / n],
    ])
    return V


def _closed_form_V_inv(p: FrozenPoint, d1, d2, d3):
    B = p.B
    x1, x2 = p.xi
    n = p.norm_xi
    s1 = np.sqrt(1 - B)
    sd = np.sqrt(d2)
    cr = x1 * p.z[1] - x2 * p.z[0]
    return np.array([
        [0, -x1 * d1 / (n * d3), -x2 * d1 / (n * d3), 0, 0],
        [cr / n, x2 / n, -x1 / n, -B * x2 / n, B * x1 / n],
        [-cr / n, -x2 / n, x1 / n, -(1 - B) * x2 / n, (1 - B) * x1 / n],
        [-sd / (2 * B * n * s1), 0, 0, x1 / (2 * n), x2 / (2 * n)],
        [sd / (2 * B * n * s1), 0, 0, x1 / (2 * n), x2 / (2 * n)],
    ])


def closed_form_V_inv_rows(p: FrozenPoint) -> np.ndarray:
    """Rows 1 to 3 of the inverse eigenvector matrix, fully explicit."""
    d1, d2, d3 = deltas(p)
    return _closed_form_V_inv(p, d1, d2, d3)[:3]


def closed_form_V_columns(p: FrozenPoint) -> np.ndarray:
    """Columns 2 to 5 of the eigenvector matrix, fully explicit."""
    d1, d2, _ = deltas(p)
    return _closed_form_V(p, d1, d2)[:, 1:]


def eig_projected(p: FrozenPoint) -> ProjectedEigen:
    """Eigenvalues and eigenvectors of the projected symbol.

    Explicit entries come from closed forms.  The w-entries of the first
    column and the w-entries of the last two inverse rows are solved from
    the eigenvector equations.  Raises :class:`DegenerateError` outside
    the open hyperbolic region.
    """
    (d1, d2, d3), flags, verdict = pointwise_classification(p)
    if verdict != "interior":
        bad = [k for k, ok in flags.items() if not ok]
        raise DegenerateError(
            f"frozen point is {verdict} (failed: {', '.join(bad)}; "
            f"deltas = {d1:.6g}, {d2:.6g}, {d3:.6g})"
        )
    PA = projected_flux(p)
    lam = eigenvalues_projected(p)
    n = p.norm_xi
    V = _closed_form_V(p, d1, d2)
    # first column: kernel vector with the closed-form B and z entries
    known = V[:, 0].copy()
    sol = np.linalg.lstsq(PA[:, 1:3], -(PA @ known), rcond=None)[0]
    V[1:3, 0] = sol
    p1, p2 = sol * n * d1
    V_inv = _closed_form_V_inv(p, d1, d2, d3)
    nh = np.array([0.0, p.xi[0] / n, p.xi[1] / n, 0.0, 0.0])
    # rows 4-5: add the multiple of (0, xi/|xi|, 0) that makes them left eigenvectors.
    # xi-directed w rows are annihilated by P, so the multiple is explicit.
    qs = []
    for k in (3, 4):
        row = V_inv[k]
        resid = row @ PA - lam[k] * row
        alpha = (resid @ nh) / lam[k]
        row += alpha * nh
        qs.append(2 * d3 * np.sqrt((1 - p.B) * d2) * alpha)
    return ProjectedEigen(lam, V, V_inv, float(p1), float(p2), float(qs[0]), float(qs[1]))


def skew_check(p: FrozenPoint, symmetrizer: np.ndarray | None = None) -> float:
    """Relative Hermitian part of ``S_P (P i A)`` with ``S_P = (V^{-1})^* V^{-1}``.

    Zero means ``S_P`` symmetrizes the projected symbol.  Passing
    ``symmetrizer`` replaces ``S_P``, which is useful as a control.
    """
    if symmetrizer is None:
        V_inv = eig_projected(p).V_inv
        symmetrizer = V_inv.conj().T @ V_inv
    M = symmetrizer @ projected_symbol(p)
    return float(np.linalg.norm(M + M.conj().T) / np.linalg.norm(M))


# bundles and comparisons ------------------------------------------------------------

@dataclass
class SymbolBundle:
    A_tilde: np.ndarray
    P_sym: np.ndarray
    PA: np.ndarray
    eigvals: np.ndarray
    V: np.ndarray | None
    V_inv: np.ndarray | None
    deltas: tuple


def symbol_bundle(p: FrozenPoint) -> SymbolBundle:
    try:
        eig = eig_projected(p)
        V, V_inv = eig.V, eig.V_inv
    except DegenerateError:
        V = V_inv = None
    return SymbolBundle(symbol_A(p), leray_symbol(p.xi), projected_symbol(p),
                        eigenvalues_projected(p), V, V_inv, deltas(p))


def match_eigenvalues(analytic, numeric) -> np.ndarray:
    """Greedy nearest matching; returns ``numeric`` reordered to ``analytic``.

    Analytic values are visited in sorted order and each takes the closest
    unused numeric value, so clustered (multiple) eigenvalues are matched
    as a block.
    """
    analytic = np.asarray(analytic)
    numeric = list(np.asarray(numeric))
    out = np.empty(len(analytic), dtype=np.result_type(analytic, np.asarray(numeric)))
    for k in np.argsort(analytic.real, kind="stable"):
        j = int(np.argmin([abs(analytic[k] - v) for v in numeric]))
        out[k] = numeric.pop(j)
    return out


def eigenvalue_mismatch(p: FrozenPoint) -> float:
    """Relative gap between analytic eigenvalues and a dense eigensolve."""
    lam = eigenvalues_projected(p)
    num = np.linalg.eigvals(projected_symbol(p)) / 1j
    m = match_eigenvalues(lam, num)
    return float(np.max(np.abs(m - lam)) / (np.max(np.abs(lam)) + p.norm_xi))
