"""Acceptance criteria 1 to 10.

Each test prints one ``criterion k PASS|FAIL: ...`` line (also collected in
the terminal summary) and then asserts the criterion at its stated
tolerance.
"""
import json
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from mixphase import cli
from mixphase.energy import epsilon_convergence_study, gronwall_fit
from mixphase.fields import Grid2, MixedState, ModelConstants
from mixphase.pressure import helmholtz_residual, momentum_residual, poisson_roundtrip_residual
from mixphase.solver import MollifiedSystem, SimConfig, integrate, make_initial_data
from mixphase.spectral import SpectralOps
from mixphase.symbols2p import (
    FrozenPoint,
    classical_symmetrizer_mixed,
    eig_projected,
    eig_unprojected,
    eigenvalue_mismatch,
    eigenvalues_projected,
    flux_mixed,
    flux_primitive,
    friedrichs_symmetrizer,
    pointwise_classification,
    closed_form_V_inv_rows,
    projected_flux,
    projected_symbol,
    skew_check,
    sufficient_conditions,
    xi_flux,
)
from mixphase.symbols_ext import (
    BdelPoint,
    bdel_eigencheck,
    bdel_eigenvalues,
    bdel_reduction_gap,
    threeD_degeneracy_scan,
)
from mixphase.symbols2p import eigenvalues_projected as two_phase_eigenvalues

C = ModelConstants()
G64 = Grid2(64)


@pytest.fixture
def report(acceptance_log):
    def _report(k, ok, detail):
        line = f"criterion {k} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        acceptance_log.append(line)
        assert ok, line

    return _report


def disk(rng, radius):
    r = radius * math.sqrt(rng.uniform())
    a = rng.uniform(0, 2 * math.pi)
    return np.array([r * math.cos(a), r * math.sin(a)])


def sample_points(rng, count):
    pts = []
    while len(pts) < count:
        th = rng.uniform(0, 2 * math.pi)
        p = FrozenPoint((math.cos(th), math.sin(th)), rng.uniform(0.1, 0.9), disk(rng, 0.2), disk(rng, 0.2),
                        rng.uniform(0.5, 2.0))
        if pointwise_classification(p)[2] == "interior":
            pts.append(p)
    return pts


def rel_left_residual(row, M, lam):
    return np.linalg.norm(row @ M - lam * row) / (np.linalg.norm(row) * np.linalg.norm(M, 2))


def rel_right_residual(col, M, lam):
    return np.linalg.norm(M @ col - lam * col) / (np.linalg.norm(col) * np.linalg.norm(M, 2))


def test_criterion_1_eigenstructure(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    eig_err = row_err = 0.0
    for p in sample_points(rng, 1000):
        eig_err = max(eig_err, eigenvalue_mismatch(p))
        M = projected_flux(p)
        lam = eigenvalues_projected(p)
        rows = np.vstack([closed_form_V_inv_rows(p), eig_projected(p).V_inv[3:]])
        row_err = max(row_err, max(rel_left_residual(rows[k], M, lam[k]) for k in range(5)))
    dt = time.perf_counter() - t0
    ok = eig_err <= 1e-10 and row_err <= 1e-10 and dt < 10
    report(1, ok, f"max eigenvalue gap {eig_err:.2e}, max left-row residual {row_err:.2e}, {dt:.2f} s")


def test_criterion_2_symmetrizers(report):
    rng = np.random.default_rng(1)
    worst = {"S0 A_j": 0.0, "A0 A_j": 0.0, "Lax": 0.0, "projected": 0.0}

    def asym(M):
        return np.abs(M - M.conj().T).max() / np.abs(M).max()

    for p in sample_points(rng, 200):
        vS, vL = p.w + (1 - p.B) * p.z, p.w - p.B * p.z
        S0 = friedrichs_symmetrizer(p.B, p.gamma)
        worst["S0 A_j"] = max([worst["S0 A_j"]] + [asym(S0 @ A) for A in flux_primitive(p.B, vS, vL, p.gamma)])
        A0 = classical_symmetrizer_mixed(p)
        worst["A0 A_j"] = max([worst["A0 A_j"]] + [asym(A0 @ A) for A in flux_mixed(p)])
        _, _, Ui = eig_unprojected(p)
        worst["Lax"] = max(worst["Lax"], asym(Ui.conj().T @ Ui @ xi_flux(p)))
        worst["projected"] = max(worst["projected"], skew_check(p))
    ok = worst["S0 A_j"] <= 1e-13 and worst["A0 A_j"] <= 1e-13 and worst["Lax"] <= 1e-12 and worst["projected"] <= 1e-10
    report(2, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " over 200 points")


def circle_signs(B, w, z, g, n=360):
    th = np.arange(n) * 2 * np.pi / n
    xi = np.stack([np.cos(th), np.sin(th)], axis=1)
    zx, wx = xi @ z, xi @ w
    d1 = (1 - B) * zx**2 - g + wx * zx
    d2 = g - B * zx**2
    d3 = (1 - 3 * B * (1 - B)) * zx**2 + wx**2 - g * (1 - B) + 2 * (1 - 2 * B) * wx * zx
    return bool(np.all(d1 < 0) and np.all(d2 > 0) and np.all(d3 < 0))


def test_criterion_3_hyperbolicity_region(report):
    t0 = time.perf_counter()
    zero = np.zeros(2)
    grid_ok = all(all(c.holds for c in sufficient_conditions(B, zero, zero, g))
                  for B in np.linspace(0.01, 0.99, 50) for g in np.linspace(0.1, 5.0, 50))
    rng = np.random.default_rng(0)
    passing, failing = [], []
    while len(passing) < 100 or len(failing) < 20:
        B, g = rng.uniform(0.05, 0.95), rng.uniform(0.1, 5.0)
        w, z = rng.uniform(-1.5, 1.5, 2), rng.uniform(-1.5, 1.5, 2)
        holds = all(c.holds for c in sufficient_conditions(B, w, z, g))
        target = passing if holds else failing
        if len(target) < (100 if holds else 20):
            target.append(circle_signs(B, w, z, g))
    confirmed = sum(passing)
    violated = sum(not s for s in failing)
    dt = time.perf_counter() - t0
    ok = grid_ok and confirmed == 100 and violated == 20 and dt < 5
    report(3, ok, f"2500-point rest grid {'all hold' if grid_ok else 'has failures'}; "
                  f"scan confirms {confirmed}/100 passing points, finds violations at {violated}/20 failing; {dt:.2f} s")


def test_criterion_4_simulator_invariants(report):
    t0 = time.perf_counter()
    h = G64.spacing
    base = SimConfig(constants=C, grid=G64, s_order=3.0, amplitude=1e-3, t_end=1.0)
    eq = integrate(np.zeros((5, 64, 64)), base.replace(epsilon=h), keep_states=True)
    eq_err = max(float(np.abs(s).max()) for s in eq.states)
    v0 = make_initial_data(G64, C, 1e-3, base.seed, 3.0)
    fits, div_ok = [], True
    for m in (4, 2, 1):
        rec = integrate(v0, base.replace(epsilon=m * h))
        div_ok &= not rec.aborted and all(d <= 1e-10 * s for d, s in zip(rec.div_w_max, rec.div_w_scale))
        fits.append(gronwall_fit(rec))
    cs = [f.c for f in fits]
    resid = [f.residual for f in fits]
    spread = (max(cs) - min(cs)) / max(abs(c) for c in cs)
    dt = time.perf_counter() - t0
    ok = eq_err <= 1e-12 and div_ok and max(resid) <= 0.05 and spread < 0.20 and dt < 120
    report(4, ok, f"equilibrium drift {eq_err:.1e}; div-free {'yes' if div_ok else 'no'}; "
                  f"fit c = {', '.join(f'{c:.3f}' for c in cs)} (spread {100 * spread:.0f}%); "
                  f"fit residuals {', '.join(f'{100 * r:.1f}%' for r in resid)}; {dt:.1f} s")


def test_criterion_5_epsilon_convergence(report):
    t0 = time.perf_counter()
    h = G64.spacing
    cfg = SimConfig(constants=C, grid=G64, amplitude=1e-3, t_end=1.0)
    rows = epsilon_convergence_study(cfg, [4 * h, 2 * h, h, h / 2])
    d = [r.distance for r in rows]
    orders = [r.order for r in rows[1:]]
    dt = time.perf_counter() - t0
    ok = all(a > b for a, b in zip(d, d[1:])) and all(o >= 1.0 for o in orders) and dt < 300
    report(5, ok, f"distances {', '.join(f'{x:.2e}' for x in d)}; orders {', '.join(f'{o:.2f}' for o in orders)}; {dt:.1f} s")


def test_criterion_6_pressure(report):
    ops = SpectralOps(G64)
    u = np.random.default_rng(2).standard_normal((2, 64, 64))
    helm = helmholtz_residual(u, ops)
    v0 = make_initial_data(G64, C, 1e-3, 0)
    arr = v0.as_array().copy()
    arr[0] += C.B_bar
    roundtrip = poisson_roundtrip_residual(MixedState.from_array(arr, G64), C.gamma, ops)
    h = G64.spacing
    eps = [2 * h / 2**k for k in range(4)]
    res = [momentum_residual(v0, C, e, ops=ops) for e in eps]
    orders = [math.log(a / b) / math.log(2) for a, b in zip(res, res[1:])]
    ok = helm <= 1e-12 and roundtrip <= 1e-12 and all(o >= 0.8 for o in orders)
    report(6, ok, f"Helmholtz {helm:.1e}; Poisson round trip {roundtrip:.1e}; "
                  f"momentum residual orders {', '.join(f'{o:.2f}' for o in orders)}")


def test_criterion_7_linear_propagator(report):
    t0 = time.perf_counter()
    g = Grid2(32)
    cfg = SimConfig(constants=C, grid=g, epsilon=0.0, include_sources=False, cfl=0.1)
    sys_ = MollifiedSystem(cfg)
    ops = sys_.ops
    v0 = make_initial_data(g, C, 1e-8, 0, kmax=g.n / 8).as_array()
    vh0 = ops.forward(v0)
    dt_max = sys_.max_dt(v0)
    k2 = np.rint(ops.k2).astype(int)
    worst = 0.0
    groups = sorted(set(k2[(k2 > 0) & (k2 <= (g.n // 8) ** 2)].ravel()))
    for q in groups:
        modes = list(zip(*np.nonzero(k2 == q)))
        iy, ix = modes[0]
        speed = np.abs(eigenvalues_projected(FrozenPoint((ops.kx[0, ix], ops.ky[iy, 0]), C.B_bar, gamma=C.gamma))).max()
        T = 2 * math.pi / speed
        n = math.ceil(T / dt_max)
        vh = vh0.copy()
        for _ in range(n):
            vh = sys_.rk4_step(vh, T / n)
        num = den = 0.0
        for iy, ix in modes:
            p = FrozenPoint((ops.kx[0, ix], ops.ky[iy, 0]), C.B_bar, gamma=C.gamma)
            ref = expm(-T * projected_symbol(p)) @ vh0[:, iy, ix]
            num += np.sum(np.abs(vh[:, iy, ix] - ref) ** 2)
            den += np.sum(np.abs(ref) ** 2)
        worst = max(worst, math.sqrt(num / den))
    dt = time.perf_counter() - t0
    report(7, worst <= 1e-6, f"{len(groups)} wavenumber shells |k| <= {g.n // 8} on a {g.n}^2 grid, "
                             f"worst relative one-period error {worst:.1e}; {dt:.1f} s")


def test_criterion_8_three_d_obstruction(report):
    t0 = time.perf_counter()
    at_zero = threeD_degeneracy_scan(0.5, 1.0, [(0, 1, 0)])[0][3]
    path = [r[3] for r in threeD_degeneracy_scan(0.5, 1.0, [(d, 1, 0) for d in (1e-1, 1e-2, 1e-3)])]
    ratios = [a / b for a, b in zip(path, path[1:])]
    diag = [r[3] for r in threeD_degeneracy_scan(0.5, 1.0, [(d, 1, 1) for d in (1e-1, 1e-2, 1e-3)])]
    dt = time.perf_counter() - t0
    ok = at_zero <= 1e-14 and all(8 <= r <= 12 for r in ratios) and dt < 1
    report(8, ok, f"sigma_min at xi1=0: {at_zero:.1e}; along (d,1,0): {', '.join(f'{s:.4g}' for s in path)} "
                  f"(ratios {', '.join(f'{r:.2f}' for r in ratios)}); along (d,1,1) for comparison: "
                  f"{', '.join(f'{s:.3g}' for s in diag)}")


def test_criterion_9_four_phase(report):
    rng = np.random.default_rng(3)
    reduction = 0.0
    for _ in range(20):
        th = rng.uniform(0, 2 * math.pi)
        p = BdelPoint((math.cos(th), math.sin(th)), rng.uniform(0.1, 0.9), 0.0, 0.0, disk(rng, 0.2),
                      disk(rng, 0.2), rng.uniform(0.5, 2.0))
        lam2 = two_phase_eigenvalues(p.two_phase())
        lam7 = bdel_eigenvalues(p)
        reduction = max(reduction, bdel_reduction_gap(p),
                        float(np.abs(np.sort(lam7[[0, 1, 2, 5, 6]]) - np.sort(lam2)).max()))
    transport = acoustic_nu = acoustic_literal = transport_literal = 0.0
    for _ in range(100):
        th = rng.uniform(0, 2 * math.pi)
        D, E = rng.uniform(0.02, 0.2, 2)
        p = BdelPoint((math.cos(th), math.sin(th)), rng.uniform(0.1, 0.5), D, E, disk(rng, 0.2), disk(rng, 0.2),
                      rng.uniform(0.5, 2.0))
        rep = bdel_eigencheck(p)
        transport = max(transport, rep["transport_mismatch_nu"])
        transport_literal = max(transport_literal, rep["transport_mismatch_B"])
        acoustic_nu = max(acoustic_nu, rep["acoustic_mismatch_nu"])
        acoustic_literal = max(acoustic_literal, rep["acoustic_mismatch_literal"])
    ok = reduction <= 1e-12 and transport <= 1e-10
    report(9, ok, f"two-phase reduction gap {reduction:.1e}; lambda_1..5 gap {transport:.1e} "
                  f"(with B read as the solid total; literal B gives {transport_literal:.1e}); "
                  f"lambda_6/7 closed-form drift gap {acoustic_literal:.1e} vs corrected {acoustic_nu:.1e}")


def test_criterion_10_determinism(report, tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"schema_version": 1, "grid_n": 32, "t_end": 0.2, "epsilon": 0.2,
                               "amplitude": 1e-3, "seed": 5, "snapshots": 2}))
    commands = {
        "symbol-report": ["--B", "0.3", "--w", "0.1,0", "--z", "0.05,0.1", "--xi", "0.6,0.8"],
        "simulate": ["--config", str(cfg)],
        "convergence": ["--config", str(cfg)],
        "degeneracy3d": ["--B", "0.5", "--path", "0,1,0;0.1,1,0;1,1,1"],
        "bdel-verify": ["--B", "0.3", "--D", "0.1", "--E", "0.1", "--z", "0.1,0.05", "--xi", "0.6,0.8"],
        "pressure-check": ["--config", str(cfg)],
    }
    differing = []
    for name, args in commands.items():
        outs = [tmp_path / f"{name}-{k}" for k in range(2)]
        for out in outs:
            cli.main([name, *args, "--out", str(out), "--quiet"])
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        other = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
        if files != other or not files:
            differing.append(f"{name}: file lists differ")
        differing += [f"{name}/{rel}" for rel in files if (outs[0] / rel).read_bytes() != (outs[1] / rel).read_bytes()]
        if cli.verify_manifest(outs[0]):
            differing.append(f"{name}: manifest hash mismatch")
    report(10, not differing, f"{len(commands)} commands re-run; "
                              + ("all outputs byte-identical" if not differing else "differences: " + ", ".join(differing)))
