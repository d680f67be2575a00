"""Four-phase (B, D, E, L) symbols in 2D and the two-phase symbol in 3D.

Four-phase state ordering is ``(B, D, E, w1, w2, z1, z2)`` with the solid
fraction ``nu = B + D + E``, ``w = nu v_S + (1-nu) v_L`` and
``z = v_S - v_L``.  Primitive ordering is ``(B, D, E, vS1, vS2, vL1, vL2)``.

The 3D symbol is only built at the equilibrium ``w = z = 0`` with state
ordering ``(B, w1, w2, w3, z1, z2, z3)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import symbols2p as s2
from .symbols2p import DegenerateError


def _vec(a, size):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape != (size,):
        raise ValueError(f"expected a {size}-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class BdelPoint:
    xi: np.ndarray
    B: float
    D: float
    E: float
    w: np.ndarray = field(default_factory=lambda: np.zeros(2))
    z: np.ndarray = field(default_factory=lambda: np.zeros(2))
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("xi", "w", "z"):
            object.__setattr__(self, name, _vec(getattr(self, name), 2))
        for name in ("B", "D", "E", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not np.hypot(*self.xi) > 0:
            raise ValueError("frequency xi must be nonzero")
        if self.B <= 0 or self.D < 0 or self.E < 0:
            raise ValueError(f"need B > 0 and D, E >= 0, got B={self.B}, D={self.D}, E={self.E}")
        if not 0 < self.nu < 1:
            raise ValueError(f"solid fraction B+D+E must lie in (0, 1), got {self.nu}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def nu(self) -> float:
        return self.B + self.D + self.E

    @property
    def norm_xi(self) -> float:
        return float(np.hypot(*self.xi))

    @property
    def v_S(self) -> np.ndarray:
        return self.w + (1 - self.nu) * self.z

    @property
    def v_L(self) -> np.ndarray:
        return self.w - self.nu * self.z

    def two_phase(self) -> s2.FrozenPoint:
        """The two-phase point obtained by lumping the solid species."""
        return s2.FrozenPoint(self.xi, self.nu, self.w, self.z, self.gamma)


# four-phase flux ---------------------------------------------------------------

def bdel_flux_primitive(B, D, E, v_S, v_L, gamma):
    """Primitive coefficient matrices ``(A1, A2)``, each 7x7."""
    nu = B + D + E
    if not 0 < nu < 1:
        raise ValueError(f"solid fraction B+D+E must lie in (0, 1), got {nu}")
    v_S, v_L = _vec(v_S, 2), _vec(v_L, 2)
    out = []
    for j in range(2):
        A = np.diag([v_S[j]] * 5 + [v_L[j]] * 2).astype(float)
        for i, b in enumerate((B, D, E)):
            A[i, 3 + j] = b
        A[3 + j, 0:3] = gamma / nu
        out.append(A)
    return tuple(out)


def bdel_jacobian(B, D, E, v_S, v_L) -> np.ndarray:
    """Jacobian of ``(B, D, E, v_S, v_L) -> (B, D, E, w, z)``."""
    nu = B + D + E
    z = _vec(v_S, 2) - _vec(v_L, 2)
    J = np.zeros((7, 7))
    J[0:3, 0:3] = np.eye(3)
    for j in range(2):
        J[3 + j, 0:3] = z[j]
        J[3 + j, 3 + j] = nu
        J[3 + j, 5 + j] = 1 - nu
        J[5 + j, 3 + j] = 1.0
        J[5 + j, 5 + j] = -1.0
    return J


def bdel_leray_symbol(xi) -> np.ndarray:
    xi = _vec(xi, 2)
    P = np.eye(7)
    P[3:5, 3:5] -= np.outer(xi, xi) / (xi @ xi)
    return P


def bdel_flux_mixed(p: BdelPoint):
    """Mixed flux matrices by conjugation with the change-of-variables Jacobian."""
    J = bdel_jacobian(p.B, p.D, p.E, p.v_S, p.v_L)
    if abs(np.linalg.det(J)) < 1e-14:
        raise DegenerateError("change of variables is singular")
    Jinv = np.linalg.inv(J)
    return tuple(J @ A @ Jinv for A in bdel_flux_primitive(p.B, p.D, p.E, p.v_S, p.v_L, p.gamma))


def bdel_projected_flux(p: BdelPoint) -> np.ndarray:
    A1, A2 = bdel_flux_mixed(p)
    return bdel_leray_symbol(p.xi) @ (p.xi[0] * A1 + p.xi[1] * A2)


def bdel_projected_symbol(p: BdelPoint) -> np.ndarray:
    """Projected principal symbol ``P(xi) i (xi_1 A1 + xi_2 A2)``, 7x7."""
    return 1j * bdel_projected_flux(p)


def bdel_symmetrizer_diagonal(nu, gamma) -> np.ndarray:
    """The naive diagonal weight ``diag(gamma/nu x3, nu, nu, 1-nu, 1-nu)``."""
    return np.diag([gamma / nu] * 3 + [nu, nu, 1 - nu, 1 - nu])


def bdel_friedrichs_symmetrizer(B, D, E, gamma) -> np.ndarray:
    """Symmetric positive definite weight making each primitive ``A_j`` symmetric.

    The fraction block is ``(gamma/nu) 1 1^T + (I - b b^T/|b|^2)`` with
    ``b = (B, D, E)``; it maps ``b`` to ``gamma (1, 1, 1)``, which matches
    the pressure-like coupling in the momentum rows.
    """
    b = np.array([B, D, E], dtype=float)
    nu = b.sum()
    S = np.zeros((7, 7))
    S[0:3, 0:3] = gamma / nu * np.ones((3, 3)) + np.eye(3) - np.outer(b, b) / (b @ b)
    S[3, 3] = S[4, 4] = nu
    S[5, 5] = S[6, 6] = 1 - nu
    return S


def symmetry_residual(S, A) -> float:
    M = S @ A
    return float(np.abs(M - M.T).max() / max(np.abs(M).max(), 1e-300))


# four-phase eigenstructure ---------------------------------------------------------

def bdel_deltas(p: BdelPoint):
    """``(Delta_1, Delta_2, Delta_4, Delta_5)`` with the solid fraction nu."""
    nu, g = p.nu, p.gamma
    n2 = p.xi @ p.xi
    zx, wx = p.z @ p.xi, p.w @ p.xi
    d1 = (1 - nu) * zx**2 - g * n2 + wx * zx
    d2 = g * n2 - nu * zx**2
    d4 = np.sqrt((1 - nu) * d2) if d2 >= 0 else np.nan
    d5 = (p.xi[0] * p.z[1] - p.xi[1] * p.z[0]) * nu * d4
    return d1, d2, d4, d5


def bdel_eigenvalues(p: BdelPoint, fraction: str = "nu") -> np.ndarray:
    """Eigenvalues in eigenvector-column order.

    ``fraction="nu"`` uses the lumped solid fraction in every transport
    speed and the drift ``(w + (1-2 nu) z).xi`` for the acoustic pair.
    ``fraction="B"`` is the literal transcription: ``B`` in the transport
    speeds and drift ``(w + (1-B-nu) z).xi``.
    """
    nu = p.nu
    a = nu if fraction == "nu" else p.B
    if fraction not in ("nu", "B"):
        raise ValueError("fraction must be 'nu' or 'B'")
    _, _, d4, _ = bdel_deltas(p)
    slow = (p.w - a * p.z) @ p.xi
    fast = (p.w + (1 - a) * p.z) @ p.xi
    drift = (p.w + ((1 - 2 * nu) if fraction == "nu" else (1 - p.B - nu)) * p.z) @ p.xi
    return np.array([0.0, slow, fast, fast, fast, drift + d4, drift - d4])


def bdel_closed_form_V(p: BdelPoint) -> np.ndarray:
    """Eigenvector matrix with the first column, which has no closed form, left as zeros."""
    B, D, E, nu = p.B, p.D, p.E, p.nu
    x1, x2 = p.xi
    n = p.norm_xi
    _, d2, d4, d5 = bdel_deltas(p)
    c = n * d4 / d2
    V = np.zeros((7, 7))
    V[5, 0], V[6, 0] = x1 / n, x2 / n
    V[:, 1] = [0, 0, 0, (1 - nu) * x2 / n, -(1 - nu) * x1 / n, -x2 / n, x1 / n]
    V[:, 2] = [1, -1, 0, 0, 0, 0, 0]
    V[:, 3] = [-1, 0, 1, 0, 0, 0, 0]
    V[:, 4] = [0, 0, 0, -nu * x2 / n, nu * x1 / n, -x2 / n, x1 / n]
    e = d5 / (n * d2)
    V[:, 5] = [B * c, D * c, E * c, -x2 * e, x1 * e, x1 / n, x2 / n]
    V[:, 6] = [-B * c, -D * c, -E * c, x2 * e, -x1 * e, x1 / n, x2 / n]
    return V


def bdel_closed_form_V_inv(p: BdelPoint) -> np.ndarray:
    B, D, E, nu, g = p.B, p.D, p.E, p.nu, p.gamma
    x1, x2 = p.xi
    n = p.norm_xi
    s = np.sqrt(1 - nu)
    a = np.sqrt(g) / (2 * nu * s)
    return np.array([
        [0, 0, 0, -x1 / (n * s), -x2 / (n * s), 0, 0],
        [0, 0, 0, x2 / n, -x1 / n, -x2 * nu / n, x1 * nu / n],
        [-D / nu, (B + E) / nu, -D / nu, 0, 0, 0, 0],
        [-E / nu, -E / nu, (B + D) / nu, 0, 0, 0, 0],
        [0, 0, 0, -x2 / n, x1 / n, -(1 - nu) * x2 / n, (1 - nu) * x1 / n],
        [a, a, a, x1 / (2 * n * (1 - nu)), x2 / (2 * n * (1 - nu)), x1 / (2 * n), x2 / (2 * n)],
        [-a, -a, -a, x1 / (2 * n * (1 - nu)), x2 / (2 * n * (1 - nu)), x1 / (2 * n), x2 / (2 * n)],
    ])


def _best_residual(vec, M, lams, left):
    """Smallest relative eigen-residual of ``vec`` over candidate eigenvalues."""
    scale = np.linalg.norm(vec) * max(np.linalg.norm(M, 2), 1e-300)
    best = (np.inf, np.nan)
    for lam in lams:
        r = (vec @ M - lam * vec) if left else (M @ vec - lam * vec)
        res = np.linalg.norm(r) / scale
        if res < best[0]:
            best = (float(res), float(lam))
    return best


BDEL_ROW_TOL = 1e-10


def _nearest_left_eigenvector(row, Vi_exact, lam_cols, lam, tol=1e-8):
    """Least-squares projection of ``row`` onto the left eigenspace of ``lam``."""
    basis = Vi_exact[np.abs(lam_cols - lam) <= tol * max(1.0, abs(lam))]
    coef = np.linalg.lstsq(basis.T, row, rcond=None)[0]
    return coef @ basis


def bdel_eigencheck(p: BdelPoint) -> dict:
    """Check the closed-form four-phase eigenvectors against the constructed symbol.

    Raises :class:`DegenerateError` unless ``Delta_2 > 0`` and
    ``Delta_1 != 0``.  Returns a JSON-ready report.
    """
    d1, d2, d4, d5 = bdel_deltas(p)
    n2 = p.xi @ p.xi
    scale = p.gamma * n2 + (p.w @ p.w + p.z @ p.z) * n2
    if not d2 > s2.BOUNDARY_TOL * scale or abs(d1) <= s2.BOUNDARY_TOL * scale:
        raise DegenerateError(f"four-phase point is not interior: Delta_1={d1:.6g}, Delta_2={d2:.6g}")
    M = bdel_projected_flux(p)
    numeric = np.linalg.eigvals(M)
    lam_nu = bdel_eigenvalues(p, "nu")
    lam_B = bdel_eigenvalues(p, "B")
    m_nu = s2.match_eigenvalues(lam_nu, numeric)
    m_B = s2.match_eigenvalues(lam_B, numeric)
    ref = np.max(np.abs(lam_nu)) + p.norm_xi
    V = bdel_closed_form_V(p)
    Vi = bdel_closed_form_V_inv(p)
    cols = []
    for k in range(1, 7):
        res, lam = _best_residual(V[:, k], M, numeric.real, left=False)
        cols.append({"column": k + 1, "residual": res, "eigenvalue": lam, "ok": bool(res <= BDEL_ROW_TOL)})
    # completed basis: first column solved from the kernel equation
    known = V[:, 0].copy()
    sol = np.linalg.lstsq(M[:, 0:5], -(M @ known), rcond=None)[0]
    Vfull = V.copy()
    Vfull[0:5, 0] = sol
    lam_full = np.array([_best_residual(Vfull[:, k], M, numeric.real, left=False)[1] for k in range(7)])
    try:
        Vi_exact = np.linalg.inv(Vfull)
    except np.linalg.LinAlgError:
        Vi_exact = None
    rows = []
    for k in range(7):
        res, lam = _best_residual(Vi[k], M, numeric.real, left=True)
        entry = {"row": k + 1, "residual": res, "eigenvalue": lam, "ok": bool(res <= BDEL_ROW_TOL)}
        if not entry["ok"]:
            entry["flag"] = "acoustic pair" if k >= 5 else "closed-form row is not a left eigenvector"
            if Vi_exact is not None:
                corrected = _nearest_left_eigenvector(Vi[k], Vi_exact, lam_full, lam)
                entry["corrected_row"] = corrected.tolist()
                entry["correction_max_entry"] = float(np.abs(corrected - Vi[k]).max())
        rows.append(entry)
    drift_nu = (p.w + (1 - 2 * p.nu) * p.z) @ p.xi
    drift_lit = (p.w + (1 - p.B - p.nu) * p.z) @ p.xi
    report = {
        "point": {"xi": p.xi.tolist(), "B": p.B, "D": p.D, "E": p.E, "nu": p.nu,
                  "w": p.w.tolist(), "z": p.z.tolist(), "gamma": p.gamma},
        "deltas": {"delta1": float(d1), "delta2": float(d2), "delta4": float(d4), "delta5": float(d5)},
        "eigenvalues_numeric": sorted(float(v) for v in numeric.real),
        "eigenvalues_nu": lam_nu.tolist(),
        "transport_mismatch_nu": float(np.max(np.abs(m_nu[:5] - lam_nu[:5])) / ref),
        "transport_mismatch_B": float(np.max(np.abs(m_B[:5] - lam_B[:5])) / ref),
        "acoustic_mismatch_nu": float(np.max(np.abs(m_nu[5:] - lam_nu[5:])) / ref),
        "acoustic_mismatch_literal": float(np.max(np.abs(m_B[5:] - lam_B[5:])) / ref),
        "acoustic_drift_nu": float(drift_nu),
        "acoustic_drift_literal": float(drift_lit),
        "max_imag_part": float(np.abs(numeric.imag).max()),
        "columns": cols,
        "rows": rows,
        "two_phase_reduction": p.D == 0 and p.E == 0,
    }
    if report["two_phase_reduction"]:
        report["two_phase_block_gap"] = bdel_reduction_gap(p)
    return report


TWO_PHASE_SLOTS = [0, 3, 4, 5, 6]


def bdel_reduction_gap(p: BdelPoint) -> float:
    """Max entry gap between the embedded 5x5 block and the two-phase symbol."""
    M = bdel_projected_symbol(p)[np.ix_(TWO_PHASE_SLOTS, TWO_PHASE_SLOTS)]
    return float(np.abs(M - s2.projected_symbol(p.two_phase())).max())


# three dimensions ---------------------------------------------------------------------

@dataclass(frozen=True)
class Frozen3DPoint:
    xi: np.ndarray
    B: float
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "xi", _vec(self.xi, 3))
        if not np.linalg.norm(self.xi) > 0:
            raise ValueError("frequency xi must be nonzero")
        if not 0 < self.B < 1:
            raise ValueError(f"B must lie in (0, 1), got {self.B}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def threeD_flux(p: Frozen3DPoint) -> np.ndarray:
    """Contraction ``sum_j xi_j A_j`` of the 3D mixed flux at ``w = z = 0``."""
    B, g, xi = p.B, p.gamma, p.xi
    A = np.zeros((7, 7))
    A[0, 1:4] = B * xi
    A[0, 4:7] = B * (1 - B) * xi
    A[1:4, 0] = g * xi
    A[4:7, 0] = g / B * xi
    return A


def threeD_leray_symbol(xi) -> np.ndarray:
    xi = _vec(xi, 3)
    P = np.eye(7)
    P[1:4, 1:4] -= np.outer(xi, xi) / (xi @ xi)
    return P


def threeD_symbol(p: Frozen3DPoint) -> np.ndarray:
    """Projected 3D symbol ``P(xi) i sum_j xi_j A_j`` at equilibrium."""
    return 1j * threeD_leray_symbol(p.xi) @ threeD_flux(p)


def threeD_eigenvalues(p: Frozen3DPoint) -> np.ndarray:
    c = np.sqrt((1 - p.B) * p.gamma) * np.linalg.norm(p.xi)
    return np.array([0.0] * 5 + [c, -c])


def threeD_closed_form_V(p: Frozen3DPoint) -> np.ndarray:
    """The closed-form 7x7 eigenvector matrix at equilibrium."""
    x1, x2, x3 = p.xi
    B = p.B
    n = np.linalg.norm(p.xi)
    a = B * np.sqrt((1 - B) / p.gamma) * n
    V = np.array([
        [0, 0, 0, 0, 0, a, -a],
        [-(1 - B) * x1, x2 * (1 - B), x3 * (1 - B), -B * x2, -B * x3, 0, 0],
        [-(1 - B) * x2, -(1 - B) * x1, 0, B * x1, 0, 0, 0],
        [-(1 - B) * x3, 0, -(1 - B) * x1, 0, B * x1, 0, 0],
        [x1, -x2, -x3, -x2, -x3, x1, x1],
        [x2, x1, 0, x1, 0, x2, x2],
        [x3, 0, x1, 0, x1, x3, x3],
    ])
    return V / n


def column_normalized_sigma_min(V) -> float:
    """Smallest singular value after scaling nonzero columns to unit length."""
    norms = np.linalg.norm(V, axis=0)
    W = V.astype(float).copy()
    nz = norms > 0
    W[:, nz] /= norms[nz]
    return float(np.linalg.svd(W, compute_uv=False).min())


def threeD_degeneracy_scan(B, gamma, path) -> list[tuple[float, float, float, float]]:
    """``(xi1, xi2, xi3, sigma_min)`` for each frequency on the path."""
    out = []
    for xi in path:
        p = Frozen3DPoint(xi, B, gamma)
        out.append((*map(float, p.xi), column_normalized_sigma_min(threeD_closed_form_V(p))))
    return out
