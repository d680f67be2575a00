"""Fourier-side operators on the periodic grid.

Coefficients are stored in the half-complex layout returned by
``scipy.fft.rfft2`` with ``norm="forward"``, so ``coeffs[..., 0, 0]`` is the
mean of the field and a unit-amplitude ``cos(k x)`` has coefficients 1/2 at
``+k`` and ``-k``.  The x wavenumber runs along the last axis.

First-derivative symbols vanish on the Nyquist row and column (a real
field cannot carry an odd derivative there).  The Laplacian, the Leray
projector and the inverse Laplacian are built from those same derivative
symbols so that the Helmholtz decomposition closes exactly.  Radial
multipliers (mollifier, Sobolev weight, cutoff) use the true wavenumber.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .fields import Grid2


def fft_workers() -> int:
    """Worker count for FFTs, read from ``MIXPHASE_THREADS`` (default 1)."""
    raw = os.environ.get("MIXPHASE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        val = int(raw)
    except ValueError:
        raise ValueError(f"MIXPHASE_THREADS must be a positive integer, got {raw!r}") from None
    if val < 1:
        raise ValueError(f"MIXPHASE_THREADS must be a positive integer, got {raw!r}")
    return val


def smooth_step(r):
    """C-infinity radial cutoff: 1 for ``r <= 1``, 0 for ``r >= 2``.

    Uses the ratio ``f(2-r) / (f(2-r) + f(r-1))`` with ``f(t) = exp(-1/t)``
    for ``t > 0`` and 0 otherwise, which is smooth at both ends and
    monotone in between.
    """
    r = np.asarray(r, dtype=float)

    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a = f(2.0 - r)
    b = f(r - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class MultiplierSpec:
    """A real radial or directional Fourier multiplier.

    kind is one of ``"mollifier"`` (param eps), ``"lambda_s"`` (param s),
    ``"theta"`` (param lam), ``"derivative"`` (param axis, 0 for x) or
    ``"inverse_laplacian"`` (no param).
    """

    kind: str
    param: float | int | None = None

    _KINDS = ("mollifier", "lambda_s", "theta", "derivative", "inverse_laplacian")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}; expected one of {self._KINDS}")
        if self.kind == "mollifier" and not (self.param is not None and self.param >= 0):
            raise ValueError("mollifier needs eps >= 0")
        if self.kind == "theta" and not (self.param is not None and self.param > 0):
            raise ValueError("theta needs lam > 0")
        if self.kind == "lambda_s" and self.param is None:
            raise ValueError("lambda_s needs an order s")
        if self.kind == "derivative" and self.param not in (0, 1):
            raise ValueError("derivative needs axis 0 (x) or 1 (y)")


@dataclass
class SpectralField:
    """Half-complex Fourier coefficients of a real scalar or vector field."""

    coeffs: np.ndarray
    grid: Grid2

    def to_physical(self) -> np.ndarray:
        return SpectralOps(self.grid).inverse(self.coeffs)

    @classmethod
    def from_physical(cls, f, grid: Grid2) -> SpectralField:
        return cls(SpectralOps(grid).forward(f), grid)


class SpectralOps:
    """Transforms and Fourier multipliers for one grid.

    All arrays built here are read-only after construction, so one
    instance may be shared between threads.
    """

    def __init__(self, grid: Grid2, workers: int | None = None):
        self.grid = grid
        self.workers = fft_workers() if workers is None else int(workers)
        n = grid.n
        k0 = grid.fundamental
        self.mx = np.fft.rfftfreq(n, 1.0 / n)[None, :]
        self.my = np.fft.fftfreq(n, 1.0 / n)[:, None]
        self.kx = k0 * self.mx
        self.ky = k0 * self.my
        nyq = n // 2
        self.dkx = np.where(np.abs(self.mx) == nyq, 0.0, self.kx)
        self.dky = np.where(np.abs(self.my) == nyq, 0.0, self.ky)
        self.k2 = self.dkx**2 + self.dky**2
        self.kmag = np.sqrt(self.kx**2 + self.ky**2)
        cut = n // 3
        self.dealias_mask = ((np.abs(self.mx) <= cut) & (np.abs(self.my) <= cut)).astype(float)
        # Parseval weights for the half-complex layout.
        wts = np.full(self.mx.shape, 2.0)
        wts[0, 0] = 1.0
        if n % 2 == 0:
            wts[0, -1] = 1.0
        self.weights = np.broadcast_to(wts, (n, n // 2 + 1))
        with np.errstate(divide="ignore"):
            self.inv_k2 = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        for a in (self.mx, self.my, self.kx, self.ky, self.dkx, self.dky, self.k2, self.kmag,
                  self.dealias_mask, self.inv_k2):
            a.setflags(write=False)

    # transforms
    def forward(self, f) -> np.ndarray:
        return scipy.fft.rfft2(np.asarray(f, dtype=float), norm="forward", workers=self.workers)

    def inverse(self, fh) -> np.ndarray:
        n = self.grid.n
        return scipy.fft.irfft2(fh, s=(n, n), norm="forward", workers=self.workers)

    # multipliers
    def mollifier(self, eps: float) -> np.ndarray:
        """Gaussian smoothing symbol ``exp(-(eps |k|)^2)``."""
        return np.exp(-((eps * self.kmag) ** 2))

    def lambda_s(self, s: float) -> np.ndarray:
        """Bessel-potential weight ``(1 + |k|^2)^(s/2)``."""
        return (1.0 + self.kmag**2) ** (0.5 * s)

    def theta(self, lam: float) -> np.ndarray:
        """Low-frequency cutoff ``theta(|k| / lam)``."""
        return smooth_step(self.kmag / lam)

    def multiplier(self, spec: MultiplierSpec) -> np.ndarray:
        if spec.kind == "mollifier":
            return self.mollifier(spec.param)
        if spec.kind == "lambda_s":
            return self.lambda_s(spec.param)
        if spec.kind == "theta":
            return self.theta(spec.param)
        if spec.kind == "derivative":
            return 1j * (self.dkx if spec.param == 0 else self.dky)
        return -self.inv_k2

    # vector calculus on coefficients
    def grad_hat(self, fh) -> np.ndarray:
        return np.stack([1j * self.dkx * fh, 1j * self.dky * fh])

    def div_hat(self, vh) -> np.ndarray:
        return 1j * self.dkx * vh[0] + 1j * self.dky * vh[1]

    def leray_hat(self, vh) -> np.ndarray:
        """Project a vector field's coefficients onto divergence-free fields."""
        proj = (self.dkx * vh[0] + self.dky * vh[1]) * self.inv_k2
        return np.stack([vh[0] - self.dkx * proj, vh[1] - self.dky * proj])

    def inv_laplacian_hat(self, fh) -> np.ndarray:
        return -self.inv_k2 * fh

    def divergence_physical(self, v) -> np.ndarray:
        return self.inverse(self.div_hat(self.forward(v)))

    # norms
    def l2_sq_hat(self, fh) -> float:
        """Domain-averaged squared L2 norm, summed over leading axes."""
        return float(np.sum(self.weights * np.abs(fh) ** 2))

    def hs_sq_hat(self, fh, s: float) -> float:
        return float(np.sum(self.weights * (1.0 + self.kmag**2) ** s * np.abs(fh) ** 2))


def apply_multiplier(f: SpectralField, m: MultiplierSpec) -> SpectralField:
    """Coefficientwise product with a Fourier multiplier."""
    ops = SpectralOps(f.grid)
    return SpectralField(f.coeffs * ops.multiplier(m), f.grid)


def leray_project(w: SpectralField) -> SpectralField:
    """Per-mode ``(I - k k^T / |k|^2) w(k)``; the mean mode is left as is."""
    if w.coeffs.shape[0] != 2:
        raise ValueError("leray_project needs a 2-vector field")
    return SpectralField(SpectralOps(w.grid).leray_hat(w.coeffs), w.grid)


def divergence(w: SpectralField) -> SpectralField:
    if w.coeffs.shape[0] != 2:
        raise ValueError("divergence needs a 2-vector field")
    return SpectralField(SpectralOps(w.grid).div_hat(w.coeffs), w.grid)


def gradient(f: SpectralField) -> SpectralField:
    return SpectralField(SpectralOps(f.grid).grad_hat(f.coeffs), f.grid)


class InverseLaplacian:
    """Zero-mean inverse Laplacian that counts discarded nonzero means."""

    def __init__(self, tol: float = 1e-12):
        self.tol = tol
        self.discarded_means = 0

    def __call__(self, f: SpectralField) -> SpectralField:
        mean = f.coeffs[..., 0, 0]
        scale = max(float(np.abs(f.coeffs).max()), 1.0)
        if np.any(np.abs(mean) > self.tol * scale):
            self.discarded_means += 1
        return SpectralField(SpectralOps(f.grid).inv_laplacian_hat(f.coeffs), f.grid)


def inverse_laplacian_zero_mean(f: SpectralField) -> SpectralField:
    """Solve ``Delta u = f - mean(f)`` with ``mean(u) = 0``."""
    return InverseLaplacian()(f)
