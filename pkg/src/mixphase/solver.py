"""Method-of-lines integration of the mollified, projected two-phase system.

The evolved unknown is the perturbation ``v~ = v - (B_bar, 0, 0)`` stored
as a ``(5, n, n)`` array ordered ``B, w1, w2, z1, z2``.  The right-hand side
is

    F(v~) = -P J [ sum_j A_j(J(v~ + v_bar)) d_j J v~ ] + P J G(J(v~ + v_bar))

with ``J`` the Gaussian mollifier and ``P`` the Leray projector acting on
the w slot.  Products are formed in physical space and truncated by the
2/3 rule before the outer multipliers are applied.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Grid2, MixedState, ModelConstants
from .spectral import SpectralOps
from .symbols2p import flux_mixed_entries

COMPONENTS = ("B", "w1", "w2", "z1", "z2")


class SolverAbort(RuntimeError):
    """A trajectory left the admissible region or the step failed."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce a run.

    ``dt=None`` picks the largest step allowed by the CFL bound at the
    initial state, shortened so that ``t_end`` is hit exactly.
    ``epsilon=0`` switches the mollifier off.
    """

    constants: ModelConstants = field(default_factory=ModelConstants)
    grid: Grid2 = field(default_factory=lambda: Grid2(64))
    epsilon: float = 0.1
    dt: float | None = None
    t_end: float = 1.0
    cfl: float = 0.4
    s_order: float = 3.0
    lambda_cutoff: float = 2.0
    mode: str = "rk4"
    picard_tol: float = 1e-13
    picard_max_iters: int = 50
    seed: int = 0
    amplitude: float = 1e-3
    record_every: int = 1
    b_floor: float = 1e-3
    norm_ceiling: float = 1e6
    div_tol: float = 1e-10
    include_sources: bool = True
    sigma_frozen: str = "equilibrium"
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.s_order > 2:
            raise ValueError(f"Sobolev order must exceed 2, got {self.s_order}")
        if not self.lambda_cutoff >= 2:
            raise ValueError(f"cutoff parameter must be >= 2, got {self.lambda_cutoff}")
        if self.mode not in ("rk4", "picard"):
            raise ValueError(f"mode must be 'rk4' or 'picard', got {self.mode!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not 0 < self.b_floor < 0.5:
            raise ValueError("b_floor must lie in (0, 0.5)")
        if self.sigma_frozen not in ("equilibrium", "mean", "none"):
            raise ValueError("sigma_frozen must be 'equilibrium', 'mean' or 'none'")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be >= 0")

    def replace(self, **kw) -> SimConfig:
        return dataclasses.replace(self, **kw)


@dataclass
class TrajectoryRecord:
    times: list = field(default_factory=list)
    hs_norm: list = field(default_factory=list)
    l2_norm: list = field(default_factory=list)
    div_w_max: list = field(default_factory=list)
    div_w_scale: list = field(default_factory=list)
    min_B: list = field(default_factory=list)
    max_B: list = field(default_factory=list)
    sigma_energy: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    states: list = field(default_factory=list)
    steps: int = 0
    dt: float = float("nan")
    aborted: bool = False
    reason: str = ""

    COLUMNS = ("t", "hs_norm", "l2_norm", "div_w_max", "min_B", "max_B", "sigma_energy")

    def rows(self):
        return list(zip(self.times, self.hs_norm, self.l2_norm, self.div_w_max,
                        self.min_B, self.max_B, self.sigma_energy))

    def final_state(self):
        return self.states[-1] if self.states else None


class MollifiedSystem:
    """Right-hand side and diagnostics for one configuration."""

    def __init__(self, cfg: SimConfig, ops: SpectralOps | None = None):
        self.cfg = cfg
        self.ops = ops or SpectralOps(cfg.grid)
        self.c = cfg.constants
        self.B_bar = self.c.B_bar
        self.J = self.ops.mollifier(cfg.epsilon) if cfg.epsilon > 0 else np.ones_like(self.ops.kmag)
        self.mask = self.ops.dealias_mask
        self._sigma = None

    # pieces of the right-hand side
    def coefficients(self, vh):
        """Physical values of ``J(v~) + v_bar`` from the coefficients of ``v~``."""
        c = self.ops.inverse(self.J * vh)
        c[0] += self.B_bar
        return c

    def sources(self, c):
        B, z = c[0], c[3:5]
        k = self.c
        gB = B * (k.k_B * (1.0 - B) - k.k_D)
        out = np.zeros_like(c)
        out[0] = gB
        out[3:5] = -z * (k.M + gB * (1.0 - B)) / (B * (1.0 - B))
        return out

    def flux_term(self, c, vh):
        """Physical values of ``sum_j A_j(c) d_j J v~``."""
        Jv = self.J * vh
        dx = self.ops.inverse(1j * self.ops.dkx * Jv)
        dy = self.ops.inverse(1j * self.ops.dky * Jv)
        A1, A2 = flux_mixed_entries(c[0], c[1], c[2], c[3], c[4], self.c.gamma)
        return np.einsum("ij...,j...->i...", A1, dx) + np.einsum("ij...,j...->i...", A2, dy)

    def check_coefficients(self, c):
        if not np.all(np.isfinite(c)):
            raise SolverAbort("non-finite values in the state")
        lo, hi = float(c[0].min()), float(c[0].max())
        if lo <= 0.0 or hi >= 1.0:
            raise SolverAbort(f"volume fraction left (0, 1): range [{lo:.6g}, {hi:.6g}]")

    def rhs_hat(self, vh, w_forcing_hat=None):
        """Coefficients of ``F(v~)``.

        ``w_forcing_hat`` is added to the w slot just before projection; a
        gradient there must leave the result unchanged.
        """
        c = self.coefficients(vh)
        self.check_coefficients(c)
        total = -self.ops.forward(self.flux_term(c, vh))
        if self.cfg.include_sources:
            total += self.ops.forward(self.sources(c))
        total *= self.mask * self.J
        if w_forcing_hat is not None:
            total[1:3] += w_forcing_hat
        total[1:3] = self.ops.leray_hat(total[1:3])
        return total

    def rhs(self, v):
        return self.ops.inverse(self.rhs_hat(self.ops.forward(v)))

    # stepping
    def wave_speed(self, v) -> float:
        w, z = v[1:3], v[3:5]
        speed = float(np.max(np.hypot(w[0], w[1]) + np.hypot(z[0], z[1]))) + math.sqrt(self.c.gamma)
        if not math.isfinite(speed):
            raise SolverAbort("wave speed is not finite")
        return speed

    def max_dt(self, v) -> float:
        return self.cfg.cfl * self.cfg.grid.spacing / self.wave_speed(v)

    def rk4_step(self, vh, dt):
        f = self.rhs_hat
        k1 = f(vh)
        k2 = f(vh + 0.5 * dt * k1)
        k3 = f(vh + 0.5 * dt * k2)
        k4 = f(vh + dt * k3)
        return vh + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def picard_step(self, vh, dt):
        """Trapezoidal fixed-point step, halving the step on divergence."""
        for halvings in range(6):
            sub = 2**halvings
            h = dt / sub
            try:
                out = vh
                for _ in range(sub):
                    out = self._picard_once(out, h)
                return out
            except _PicardDiverged:
                continue
        raise SolverAbort("Picard iteration did not contract after 5 step halvings")

    def _picard_once(self, vh, h):
        f0 = self.rhs_hat(vh)
        cur = vh + h * f0
        growth = 0
        last = math.inf
        for _ in range(self.cfg.picard_max_iters):
            nxt = vh + 0.5 * h * (f0 + self.rhs_hat(cur))
            diff = math.sqrt(self.ops.l2_sq_hat(nxt - cur))
            cur = nxt
            if diff <= self.cfg.picard_tol:
                return cur
            growth = growth + 1 if diff > last else 0
            if growth >= 3:
                raise _PicardDiverged()
            last = diff
        raise SolverAbort(f"Picard iteration hit {self.cfg.picard_max_iters} iterations (last update {last:.3e})")

    def step_hat(self, vh, dt):
        v = self.ops.inverse(vh)
        limit = self.max_dt(v)
        if dt > limit * (1 + 1e-12):
            raise SolverAbort(f"time step {dt:.6g} exceeds the CFL limit {limit:.6g}")
        if self.cfg.mode == "rk4":
            return self.rk4_step(vh, dt)
        return self.picard_step(vh, dt)

    # diagnostics
    def sigma(self):
        if self._sigma is None and self.cfg.sigma_frozen == "equilibrium":
            from .energy import SigmaOperator

            self._sigma = SigmaOperator(self.ops, self.B_bar, np.zeros(2), np.zeros(2), self.c.gamma,
                                        self.cfg.s_order, self.cfg.lambda_cutoff)
        return self._sigma

    def sigma_energy_hat(self, vh, v):
        mode = self.cfg.sigma_frozen
        if mode == "none":
            return float("nan")
        if mode == "equilibrium":
            return self.sigma().energy(vh)
        from .energy import SigmaOperator

        Bm = self.B_bar + float(v[0].mean())
        op = SigmaOperator(self.ops, Bm, v[1:3].mean(axis=(1, 2)), v[3:5].mean(axis=(1, 2)),
                           self.c.gamma, self.cfg.s_order, self.cfg.lambda_cutoff)
        return op.energy(vh)

    def diagnostics(self, vh):
        v = self.ops.inverse(vh)
        div = self.ops.inverse(self.ops.div_hat(vh[1:3]))
        wmax = float(np.max(np.hypot(v[1], v[2])))
        return {
            "hs_norm": math.sqrt(self.ops.hs_sq_hat(vh, self.cfg.s_order)),
            "l2_norm": math.sqrt(self.ops.l2_sq_hat(vh)),
            "div_w_max": float(np.abs(div).max()),
            "div_w_scale": wmax * self.cfg.grid.max_wavenumber,
            "min_B": float(v[0].min()) + self.B_bar,
            "max_B": float(v[0].max()) + self.B_bar,
            "sigma_energy": self.sigma_energy_hat(vh, v),
        }


class _PicardDiverged(Exception):
    pass


def _as_array(v_tilde) -> np.ndarray:
    if isinstance(v_tilde, MixedState):
        if not v_tilde.tilde:
            raise ValueError("the solver works on translated (tilde) states")
        return v_tilde.as_array()
    return np.asarray(v_tilde, dtype=float)


def source_terms(v: MixedState, c: ModelConstants) -> MixedState:
    """Pointwise reaction and friction terms in mixed variables.

    Returns ``(Gamma_B, 0, -z (M + Gamma_B (1-B)) / (B (1-B)))`` with
    ``Gamma_B = B (k_B (1-B) - k_D)``.  The input must be untranslated.
    """
    if v.tilde:
        raise ValueError("source terms need the untranslated state")
    v.validate()
    cfg = SimConfig(constants=c, grid=v.grid)
    out = MollifiedSystem(cfg).sources(v.as_array())
    return MixedState.from_array(out, v.grid, tilde=True)


def rhs_F_eps(v_tilde, cfg: SimConfig) -> MixedState:
    """Mollified projected right-hand side evaluated at a translated state."""
    sys_ = MollifiedSystem(cfg)
    out = sys_.rhs(_as_array(v_tilde))
    return MixedState.from_array(out, cfg.grid, tilde=True)


def step(v_tilde, cfg: SimConfig, dt: float | None = None) -> MixedState:
    """Advance one step with the configured integrator."""
    sys_ = MollifiedSystem(cfg)
    v = _as_array(v_tilde)
    dt = cfg.dt if dt is None else dt
    if dt is None:
        dt = sys_.max_dt(v)
    vh = sys_.step_hat(sys_.ops.forward(v), dt)
    return MixedState.from_array(sys_.ops.inverse(vh), cfg.grid, tilde=True)


def choose_dt(cfg: SimConfig, v) -> tuple[float, int]:
    """Step size and step count covering ``[0, t_end]`` exactly."""
    sys_ = MollifiedSystem(cfg)
    dt = cfg.dt if cfg.dt is not None else sys_.max_dt(v)
    if cfg.t_end == 0:
        return dt, 0
    nsteps = max(1, math.ceil(cfg.t_end / dt - 1e-9))
    return cfg.t_end / nsteps, nsteps


def integrate(v0_tilde, cfg: SimConfig, keep_states: bool = False,
              system: MollifiedSystem | None = None) -> TrajectoryRecord:
    """Integrate to ``t_end``, recording diagnostics every ``record_every`` steps.

    Aborts leave a partial record with ``aborted=True`` and a reason.
    Snapshots (every ``snapshot_every`` records) and, with ``keep_states``,
    every recorded state are stored as ``(5, n, n)`` arrays.
    """
    sys_ = system or MollifiedSystem(cfg)
    ops = sys_.ops
    v0 = _as_array(v0_tilde)
    rec = TrajectoryRecord()
    try:
        sys_.check_coefficients(v0 + np.array([sys_.B_bar, 0, 0, 0, 0])[:, None, None])
    except SolverAbort as exc:
        raise ValueError(f"invalid initial data: {exc.reason}") from None
    vh = ops.forward(v0)
    div0 = float(np.abs(ops.inverse(ops.div_hat(vh[1:3]))).max())
    scale0 = float(np.max(np.hypot(v0[1], v0[2]))) * cfg.grid.max_wavenumber
    if div0 > cfg.div_tol * max(scale0, 1e-300) and div0 > 0:
        raise ValueError(f"initial w is not divergence-free: max |div w| = {div0:.3e}")
    dt, nsteps = choose_dt(cfg, v0)
    rec.dt = dt
    n_rec = 0

    def record(t, vh):
        nonlocal n_rec
        d = sys_.diagnostics(vh)
        rec.times.append(t)
        for key in ("hs_norm", "l2_norm", "div_w_max", "div_w_scale", "min_B", "max_B", "sigma_energy"):
            getattr(rec, key).append(d[key])
        state = None
        if keep_states or (cfg.snapshot_every and n_rec % cfg.snapshot_every == 0):
            state = ops.inverse(vh)
        if keep_states:
            rec.states.append(state)
        if cfg.snapshot_every and n_rec % cfg.snapshot_every == 0:
            rec.snapshots.append((t, state))
        n_rec += 1
        return d

    d0 = record(0.0, vh)
    ceiling = cfg.norm_ceiling * d0["hs_norm"] if d0["hs_norm"] > 0 else math.inf
    lo, hi = cfg.b_floor, 1.0 - cfg.b_floor
    try:
        for k in range(1, nsteps + 1):
            vh = sys_.step_hat(vh, dt)
            rec.steps = k
            if k % cfg.record_every == 0 or k == nsteps:
                d = record(k * dt, vh)
                if not math.isfinite(d["hs_norm"]):
                    raise SolverAbort("non-finite norm")
                if d["min_B"] <= lo or d["max_B"] >= hi:
                    raise SolverAbort(f"volume fraction reached the floor: [{d['min_B']:.6g}, {d['max_B']:.6g}]")
                if d["hs_norm"] > ceiling:
                    raise SolverAbort(f"H^s norm {d['hs_norm']:.3e} exceeded the ceiling {ceiling:.3e}")
    except SolverAbort as exc:
        rec.aborted = True
        rec.reason = exc.reason
    return rec


def make_initial_data(grid: Grid2, constants: ModelConstants, amplitude: float, seed: int,
                      s: float = 3.0, kmax: float = 4.0, b_floor: float = 1e-3) -> MixedState:
    """Random smooth translated state with modes ``|m| <= kmax``.

    Coefficients are complex Gaussian with a decaying envelope
    ``exp(-|m|^2/8)``, the mean of every component is zero, w is projected
    onto divergence-free fields and the whole state is scaled to H^s norm
    ``amplitude``.  The result depends only on the arguments.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    ops = SpectralOps(grid, workers=1)
    n = grid.n
    if amplitude == 0:
        return MixedState(np.zeros((n, n)), np.zeros((2, n, n)), np.zeros((2, n, n)), grid, tilde=True)
    rng = np.random.default_rng(seed)
    shape = (5,) + ops.kmag.shape
    mm = np.hypot(ops.mx, ops.my)
    band = (mm <= kmax) & (mm > 0)
    coeffs = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.exp(-(mm**2) / 8.0) * band
    v = ops.inverse(coeffs)
    vh = ops.forward(v)
    vh[1:3] = ops.leray_hat(vh[1:3])
    norm = math.sqrt(ops.hs_sq_hat(vh, s))
    vh *= amplitude / norm
    v = ops.inverse(vh)
    B_bar = constants.B_bar
    lo, hi = B_bar + v[0].min(), B_bar + v[0].max()
    if lo <= b_floor or hi >= 1 - b_floor:
        raise ValueError(f"amplitude {amplitude} pushes the volume fraction to [{lo:.4g}, {hi:.4g}]")
    return MixedState.from_array(v, grid, tilde=True)
