"""Grids, two-phase states and the change of variables between them.

A state lives on a periodic square grid of ``n x n`` samples.  Arrays are
indexed ``[..., iy, ix]`` so that x is the fastest (last) axis.  Vector
fields carry their component axis first: ``w[0]`` is the x component.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class StateError(ValueError):
    """Raised when a state leaves the admissible region 0 < B < 1."""


@dataclass(frozen=True)
class Grid2:
    """Uniform periodic grid on the square ``[0, length)^2``."""

    n: int
    length: float = TWO_PI

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample coordinates ``(x, y)`` as 2D arrays."""
        x = np.arange(self.n) * self.spacing
        return np.meshgrid(x, x, indexing="xy")

    @property
    def fundamental(self) -> float:
        """Smallest nonzero wavenumber 2*pi/length."""
        return TWO_PI / self.length

    @property
    def max_wavenumber(self) -> float:
        """Largest wavenumber per axis (the Nyquist wavenumber)."""
        return self.fundamental * self.n / 2


@dataclass(frozen=True)
class ModelConstants:
    """Physical constants of the two-phase model.

    gamma is the excess-stress coefficient, k_B and k_D the birth and death
    rates of the solid phase and M the interphase friction.
    """

    gamma: float = 1.0
    k_B: float = 2.0
    k_D: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.k_D < self.k_B:
            raise ValueError(f"need 0 < k_D < k_B, got k_D={self.k_D}, k_B={self.k_B}")
        if not self.M >= 0:
            raise ValueError(f"friction M must be non-negative, got {self.M}")

    @property
    def B_bar(self) -> float:
        """Equilibrium volume fraction, where the growth term vanishes."""
        return 1.0 - self.k_D / self.k_B


@dataclass(frozen=True)
class BdelConstants(ModelConstants):
    """Extra reaction constants of the four-phase biofilm model.

    ``eps_reaction`` is the EPS decay rate; it is unrelated to the
    mollification width.
    """

    k_E: float = 1.0
    k_N: float = 1.0
    alpha: float = 0.5
    eps_reaction: float = 0.1


def _check_fraction(B, what="B"):
    B = np.asarray(B)
    if not np.all(np.isfinite(B)):
        raise StateError(f"{what} contains non-finite samples")
    lo, hi = float(B.min()), float(B.max())
    if lo <= 0.0 or hi >= 1.0:
        raise StateError(f"{what} must lie strictly inside (0, 1); got range [{lo:.6g}, {hi:.6g}]")


@dataclass
class PrimitiveState:
    """Volume fraction and the two phase velocities, ``u = (B, v_S, v_L)``."""

    B: np.ndarray
    v_S: np.ndarray
    v_L: np.ndarray
    grid: Grid2 = field(repr=False)

    def validate(self) -> PrimitiveState:
        _check_fraction(self.B)
        for name in ("v_S", "v_L"):
            a = getattr(self, name)
            if a.shape != (2,) + self.grid.shape:
                raise StateError(f"{name} has shape {a.shape}, expected {(2,) + self.grid.shape}")
            if not np.all(np.isfinite(a)):
                raise StateError(f"{name} contains non-finite samples")
        return self


@dataclass
class MixedState:
    """Volume fraction, average velocity and slip velocity, ``v = (B, w, z)``.

    With ``tilde=True`` the state is a perturbation of the equilibrium and
    ``B`` holds ``B - B_bar``, which may take any sign.
    """

    B: np.ndarray
    w: np.ndarray
    z: np.ndarray
    grid: Grid2 = field(repr=False)
    tilde: bool = False

    def validate(self) -> MixedState:
        if not self.tilde:
            _check_fraction(self.B)
        for name in ("w", "z"):
            a = getattr(self, name)
            if a.shape != (2,) + self.grid.shape:
                raise StateError(f"{name} has shape {a.shape}, expected {(2,) + self.grid.shape}")
            if not np.all(np.isfinite(a)):
                raise StateError(f"{name} contains non-finite samples")
        return self

    def as_array(self) -> np.ndarray:
        """Stack into a ``(5, n, n)`` array ordered ``B, w1, w2, z1, z2``."""
        return np.concatenate([self.B[None], self.w, self.z])

    @classmethod
    def from_array(cls, arr, grid, tilde=False) -> MixedState:
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0].copy(), arr[1:3].copy(), arr[3:5].copy(), grid, tilde)

    def copy(self) -> MixedState:
        return dataclasses.replace(self, B=self.B.copy(), w=self.w.copy(), z=self.z.copy())


def primitive_to_mixed(u: PrimitiveState) -> MixedState:
    """Map ``(B, v_S, v_L)`` to ``(B, B v_S + (1-B) v_L, v_S - v_L)``."""
    u.validate()
    B = u.B
    w = B * u.v_S + (1.0 - B) * u.v_L
    z = u.v_S - u.v_L
    return MixedState(B.copy(), w, z, u.grid)


def mixed_to_primitive(v: MixedState) -> PrimitiveState:
    """Inverse change of variables: ``v_S = w + (1-B) z``, ``v_L = w - B z``."""
    if v.tilde:
        raise StateError("translate the state back before converting to primitive variables")
    v.validate()
    B = v.B
    v_S = v.w + (1.0 - B) * v.z
    v_L = v.w - B * v.z
    return PrimitiveState(B.copy(), v_S, v_L, v.grid)


def mixing_jacobian(B, v_S, v_L) -> np.ndarray:
    """Jacobian of the change of variables at one point, a 5x5 matrix.

    Rows are ``(B, w1, w2, z1, z2)``, columns ``(B, vS1, vS2, vL1, vL2)``.
    """
    J = np.zeros((5, 5))
    J[0, 0] = 1.0
    for j in range(2):
        J[1 + j, 0] = v_S[j] - v_L[j]
        J[1 + j, 1 + j] = B
        J[1 + j, 3 + j] = 1.0 - B
        J[3 + j, 1 + j] = 1.0
        J[3 + j, 3 + j] = -1.0
    return J


def translate_equilibrium(v: MixedState, c: ModelConstants, direction: str) -> MixedState:
    """Shift a state by the equilibrium ``(B_bar, 0, 0)``.

    ``direction="to_tilde"`` subtracts it, ``"from_tilde"`` adds it back.
    """
    if direction == "to_tilde":
        if v.tilde:
            raise ValueError("state is already translated")
        return MixedState(v.B - c.B_bar, v.w.copy(), v.z.copy(), v.grid, tilde=True)
    if direction == "from_tilde":
        if not v.tilde:
            raise ValueError("state is not translated")
        return MixedState(v.B + c.B_bar, v.w.copy(), v.z.copy(), v.grid, tilde=False)
    raise ValueError(f"direction must be 'to_tilde' or 'from_tilde', got {direction!r}")


def equilibrium_state(grid: Grid2, c: ModelConstants) -> MixedState:
    n = grid.n
    return MixedState(np.full((n, n), c.B_bar), np.zeros((2, n, n)), np.zeros((2, n, n)), grid)


def check_incompressibility_primitive(u: PrimitiveState) -> float:
    """Max over the grid of ``|div(B v_S + (1-B) v_L)|``, computed spectrally."""
    from .spectral import SpectralOps

    v = primitive_to_mixed(u)
    ops = SpectralOps(u.grid)
    return float(np.abs(ops.divergence_physical(v.w)).max())
