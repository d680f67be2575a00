"""Command-line entry point.

Subcommands write their results into ``--out`` (default: current
directory) together with ``manifest.json``, which lists every produced
file with its SHA-256.  Exit codes: 0 success, 1 a numerical check in the
study failed, 2 usage or configuration error, 3 degenerate point, 4 run
aborted.

Data files depend only on the inputs.  The manifest also records start and
end times; set ``SOURCE_DATE_EPOCH`` to pin them.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .fields import Grid2, ModelConstants
from .solver import COMPONENTS, SimConfig, integrate, make_initial_data
from .symbols2p import DegenerateError, FrozenPoint, hyperbolicity_region, skew_check, symbol_bundle

log = logging.getLogger("mixphase")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_ABORT = 0, 1, 2, 3, 4
SCHEMA_VERSION = 1

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "k_B": {"type": "number", "exclusiveMinimum": 0},
        "k_D": {"type": "number", "exclusiveMinimum": 0},
        "M": {"type": "number", "exclusiveMinimum": 0},
        "grid_n": {"type": "integer", "minimum": 8},
        "length": {"type": "number", "exclusiveMinimum": 0},
        "epsilon": {"type": "number", "minimum": 0},
        "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "t_end": {"type": "number", "minimum": 0},
        "s_order": {"type": "number", "exclusiveMinimum": 2},
        "lambda_cutoff": {"type": "number", "minimum": 2},
        "mode": {"enum": ["rk4", "picard"]},
        "amplitude": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "record_every": {"type": "integer", "minimum": 1},
        "snapshots": {"type": "integer", "minimum": 0},
        "eps_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
    },
}


class UsageError(Exception):
    pass


# small helpers ---------------------------------------------------------------------

def fmt(x) -> str:
    """Locale-free float text with 17 significant digits; NaN as ``nan``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, complex) or isinstance(obj, np.complexfloating):
        return {"re": _json_ready(obj.real), "im": _json_ready(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def _matrix(M) -> dict | list | None:
    if M is None:
        return None
    M = np.asarray(M)
    if np.iscomplexobj(M):
        return {"re": M.real.tolist(), "im": M.imag.tolist()}
    return M.tolist()


def _dump_json(obj) -> str:
    return json.dumps(_json_ready(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _timestamp() -> str:
    fixed = os.environ.get("SOURCE_DATE_EPOCH")
    if fixed:
        t = _dt.datetime.fromtimestamp(int(fixed), tz=_dt.timezone.utc)
    else:
        t = _dt.datetime.now(tz=_dt.timezone.utc)
    return t.isoformat(timespec="seconds")


def _vector(text: str, size: int, name: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"{name}: expected {size} comma-separated numbers, got {text!r}") from None
    if len(vals) != size or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{name}: expected {size} finite comma-separated numbers, got {text!r}")
    return np.array(vals)


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, out: Path, command: str, config: dict, seed):
        self.out = out
        self.command = command
        self.config = config
        self.seed = seed
        self.files: list[Path] = []
        self.started = _timestamp()

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        self.files.append(path)
        return path

    def write_csv(self, name: str, header, rows) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            wr = csv.writer(f, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([fmt(x) for x in row])
        self.files.append(path)
        return path

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.files.append(path)
        return path

    def finish(self, status: str, reason: str = "") -> Path:
        manifest = {
            "tool": "mixphase",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "started": self.started,
            "finished": _timestamp(),
            "status": status,
            "reason": reason,
            "files": [{"path": p.relative_to(self.out).as_posix(), "bytes": p.stat().st_size,
                       "sha256": _sha256(p)} for p in self.files],
        }
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / "manifest.json"
        path.write_text(_dump_json(manifest), encoding="utf-8")
        return path


def verify_manifest(out_dir) -> list[str]:
    """Names of listed files whose hash no longer matches."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
    return [e["path"] for e in manifest["files"] if _sha256(out_dir / e["path"]) != e["sha256"]]


# configuration -----------------------------------------------------------------------

def load_config(path: str | None, seed: int | None = None) -> dict:
    """Read and validate a JSON config; ``seed`` overrides the file."""
    cfg = {"schema_version": SCHEMA_VERSION}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"invalid config at {where}: {exc.message}") from None
    if seed is not None:
        cfg = dict(cfg, seed=seed)
    return cfg


def sim_config(cfg: dict) -> SimConfig:
    """Build a :class:`SimConfig` from a validated config document."""
    try:
        constants = ModelConstants(gamma=cfg.get("gamma", 1.0), k_B=cfg.get("k_B", 2.0),
                                   k_D=cfg.get("k_D", 1.0), M=cfg.get("M", 1.0))
        grid = Grid2(cfg.get("grid_n", 64), cfg.get("length", 2 * math.pi))
        defaults = SimConfig()
        return SimConfig(
            constants=constants, grid=grid,
            epsilon=cfg.get("epsilon", defaults.epsilon), dt=cfg.get("dt"),
            t_end=cfg.get("t_end", defaults.t_end), cfl=cfg.get("cfl", defaults.cfl),
            s_order=cfg.get("s_order", defaults.s_order),
            lambda_cutoff=cfg.get("lambda_cutoff", defaults.lambda_cutoff),
            mode=cfg.get("mode", defaults.mode), amplitude=cfg.get("amplitude", defaults.amplitude),
            seed=cfg.get("seed", defaults.seed), record_every=cfg.get("record_every", 1),
            snapshot_every=cfg.get("snapshots", 0),
        )
    except ValueError as exc:
        raise UsageError(f"invalid config: {exc}") from None


def _initial_data(sc: SimConfig):
    try:
        return make_initial_data(sc.grid, sc.constants, sc.amplitude, sc.seed, sc.s_order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _eps_list(args, cfg: dict, grid: Grid2, default_multiples) -> list[float]:
    if args.eps is not None:
        eps = [float(t) for t in args.eps.split(",") if t.strip()]
    elif "eps_list" in cfg:
        eps = [float(e) for e in cfg["eps_list"]]
    else:
        eps = [m * grid.spacing for m in default_multiples]
    if len(eps) < 3:
        raise UsageError(f"need at least three mollification widths, got {len(eps)}")
    if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise UsageError("mollification widths must be positive and strictly decreasing")
    return eps


# commands ----------------------------------------------------------------------------

def cmd_symbol_report(args) -> int:
    xi = _vector(args.xi, 2, "--xi")
    w, z = _vector(args.w, 2, "--w"), _vector(args.z, 2, "--z")
    try:
        p = FrozenPoint(xi, args.B, w, z, args.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    region = hyperbolicity_region(p.B, p.w, p.z, p.gamma, xi=p.xi)
    bundle = symbol_bundle(p)
    degenerate = bundle.V is None
    residuals = {}
    if not degenerate:
        PA = bundle.PA
        lam = bundle.eigvals
        residuals = {
            "right_eigenvectors": float(np.abs(PA @ bundle.V - 1j * bundle.V * lam).max()),
            "left_eigenvectors": float(np.abs(bundle.V_inv @ PA - 1j * lam[:, None] * bundle.V_inv).max()),
            "inverse": float(np.abs(bundle.V_inv @ bundle.V - np.eye(5)).max()),
            "skew_symmetrization": skew_check(p),
        }
    report = {
        "point": {"xi": p.xi, "B": p.B, "w": p.w, "z": p.z, "gamma": p.gamma},
        "A_tilde": _matrix(bundle.A_tilde),
        "leray": _matrix(bundle.P_sym),
        "projected_symbol": _matrix(bundle.PA),
        "eigenvalues": bundle.eigvals,
        "V": _matrix(bundle.V),
        "V_inv": _matrix(bundle.V_inv),
        "deltas": {"delta1": bundle.deltas[0], "delta2": bundle.deltas[1], "delta3": bundle.deltas[2]},
        "residuals": residuals,
        "hyperbolicity": region.as_dict(),
        "degenerate": degenerate,
    }
    run = Run(args.out, "symbol-report", vars_for_manifest(args), None)
    run.write_text("symbol_report.json", _dump_json(report))
    if not args.quiet:
        print(f"verdict: {region.verdict}; failing conditions: {region.failing_conditions}")
    if degenerate:
        run.finish("degenerate", "eigenbasis of the projected symbol is degenerate")
        return EXIT_DEGENERATE
    run.finish("ok")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.seed)
    sc = sim_config(cfg)
    v0 = _initial_data(sc)
    try:
        rec = integrate(v0, sc)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = Run(args.out, "simulate", cfg, sc.seed)
    run.write_csv("timeseries.csv", rec.COLUMNS, rec.rows())
    for k, (t, state) in enumerate(rec.snapshots):
        stem = f"snapshots/snapshot_{k:05d}"
        run.write_bytes(stem + ".bin", np.ascontiguousarray(state, dtype="<f8").tobytes(order="C"))
        run.write_text(stem + ".json", _dump_json({
            "grid_n": sc.grid.n, "length": sc.grid.length, "components": list(COMPONENTS),
            "shape": [5, sc.grid.n, sc.grid.n], "dtype": "<f8", "order": "row-major, x fastest",
            "translated": True, "B_bar": sc.constants.B_bar, "time": t,
        }))
    if rec.aborted:
        run.finish("aborted", rec.reason)
        log.error("run aborted: %s", rec.reason)
        return EXIT_ABORT
    run.finish("ok")
    if not args.quiet:
        print(f"{rec.steps} steps of dt={fmt(rec.dt)}; final H^s norm {fmt(rec.hs_norm[-1])}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    from .energy import StudyFailed, epsilon_convergence_study

    cfg = load_config(args.config, args.seed)
    sc = sim_config(cfg)
    eps = _eps_list(args, cfg, sc.grid, (4, 2, 1, 0.5))
    v0 = _initial_data(sc)
    run = Run(args.out, "convergence", dict(cfg, eps_list=eps), sc.seed)
    try:
        rows = epsilon_convergence_study(sc, eps, v0)
    except StudyFailed as exc:
        run.write_csv("convergence.csv", ("eps", "eps_next", "distance", "order"),
                      [(r.eps, r.eps_next, r.distance, r.order) for r in exc.rows])
        run.finish("aborted", exc.reason)
        log.error("%s", exc.reason)
        return EXIT_ABORT
    run.write_csv("convergence.csv", ("eps", "eps_next", "distance", "order"),
                  [(r.eps, r.eps_next, r.distance, r.order) for r in rows])
    orders = [r.order for r in rows[1:]]
    ok = bool(orders) and all(o >= 1.0 for o in orders)
    run.finish("ok" if ok else "order below 1", "" if ok else "observed orders: " + ", ".join(fmt(o) for o in orders))
    if not args.quiet:
        for r in rows:
            print(f"eps={fmt(r.eps)} distance={fmt(r.distance)} order={fmt(r.order)}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_degeneracy3d(args) -> int:
    from .symbols_ext import threeD_degeneracy_scan

    path = []
    for chunk in args.path.split(";"):
        if chunk.strip():
            path.append(_vector(chunk, 3, "--path"))
    if not path:
        raise UsageError("--path is empty")
    if any(not np.any(xi) for xi in path):
        raise UsageError("--path contains xi = 0")
    if not 0 < args.B < 1 or not args.gamma > 0:
        raise UsageError("need 0 < B < 1 and gamma > 0")
    rows = threeD_degeneracy_scan(args.B, args.gamma, path)
    run = Run(args.out, "degeneracy3d", vars_for_manifest(args), None)
    run.write_csv("degeneracy3d.csv", ("xi1", "xi2", "xi3", "sigma_min"), rows)
    run.finish("ok")
    if not args.quiet:
        for r in rows:
            print(" ".join(fmt(x) for x in r))
    return EXIT_OK


def cmd_bdel_verify(args) -> int:
    from .symbols_ext import BdelPoint, bdel_eigencheck

    xi = _vector(args.xi, 2, "--xi")
    w, z = _vector(args.w, 2, "--w"), _vector(args.z, 2, "--z")
    try:
        p = BdelPoint(xi, args.B, args.D, args.E, w, z, args.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = Run(args.out, "bdel-verify", vars_for_manifest(args), None)
    try:
        report = bdel_eigencheck(p)
    except DegenerateError as exc:
        run.write_text("bdel_report.json", _dump_json({"degenerate": True, "reason": str(exc)}))
        run.finish("degenerate", str(exc))
        log.error("%s", exc)
        return EXIT_DEGENERATE
    run.write_text("bdel_report.json", _dump_json(report))
    run.finish("ok")
    if not args.quiet:
        bad = [r["row"] for r in report["rows"] if not r["ok"]]
        print(f"transport mismatch {fmt(report['transport_mismatch_nu'])}; "
              f"acoustic mismatch (closed form) {fmt(report['acoustic_mismatch_literal'])}; rows off: {bad}")
    return EXIT_OK


def cmd_pressure_check(args) -> int:
    from .fields import MixedState
    from .pressure import helmholtz_residual, momentum_residual, poisson_roundtrip_residual
    from .spectral import SpectralOps

    cfg = load_config(args.config, args.seed)
    sc = sim_config(cfg)
    eps = _eps_list(args, cfg, sc.grid, (2, 1, 0.5, 0.25))
    v0 = _initial_data(sc)
    ops = SpectralOps(sc.grid)
    state = MixedState.from_array(v0.as_array() + np.array([sc.constants.B_bar, 0, 0, 0, 0])[:, None, None],
                                  sc.grid)
    res = [momentum_residual(v0, sc.constants, e, ops=ops) for e in eps]
    rows = []
    for i, (e, r) in enumerate(zip(eps, res)):
        order = math.nan
        if i > 0 and r > 0 and res[i - 1] > 0:
            order = math.log(res[i - 1] / r) / math.log(eps[i - 1] / e)
        rows.append((e, r, order))
    helm = helmholtz_residual(v0.w, ops)
    roundtrip = poisson_roundtrip_residual(state, sc.constants.gamma, ops)
    run = Run(args.out, "pressure-check", dict(cfg, eps_list=eps), sc.seed)
    run.write_csv("momentum_residual.csv", ("eps", "residual", "order"), rows)
    run.write_text("pressure_identities.json", _dump_json({"helmholtz": helm, "poisson_roundtrip": roundtrip}))
    orders = [r[2] for r in rows[1:]]
    ok = all(o >= 0.8 for o in orders) and helm <= 1e-12 and roundtrip <= 1e-12
    run.finish("ok" if ok else "check failed")
    if not args.quiet:
        for e, r, o in rows:
            print(f"eps={fmt(e)} residual={fmt(r)} order={fmt(o)}")
    return EXIT_OK if ok else EXIT_CHECK


def vars_for_manifest(args) -> dict:
    skip = {"func", "out", "quiet", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress the console summary")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    configured = argparse.ArgumentParser(add_help=False)
    configured.add_argument("--config", help="JSON configuration file")
    configured.add_argument("--seed", type=int, help="override the configured seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("symbol-report", parents=[common], help="eigenstructure and hyperbolicity at a point")
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--w", default="0,0")
    p.add_argument("--z", default="0,0")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--xi", default="1,0")
    p.set_defaults(func=cmd_symbol_report)

    p = sub.add_parser("simulate", parents=[common, configured], help="integrate the mollified system")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("convergence", parents=[common, configured], help="mollification-width study")
    p.add_argument("--eps", help="comma-separated decreasing widths")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("degeneracy3d", parents=[common], help="smallest singular value along a 3D path")
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--path", required=True, help="frequencies 'x1,x2,x3;x1,x2,x3;...'")
    p.set_defaults(func=cmd_degeneracy3d)

    p = sub.add_parser("bdel-verify", parents=[common], help="check the four-phase eigenvectors")
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--D", type=float, default=0.0)
    p.add_argument("--E", type=float, default=0.0)
    p.add_argument("--w", default="0,0")
    p.add_argument("--z", default="0,0")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--xi", default="1,0")
    p.set_defaults(func=cmd_bdel_verify)

    p = sub.add_parser("pressure-check", parents=[common, configured], help="momentum residual study")
    p.add_argument("--eps", help="comma-separated decreasing widths")
    p.set_defaults(func=cmd_pressure_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mixphase {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateError as exc:
        print(f"mixphase {args.command}: degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
