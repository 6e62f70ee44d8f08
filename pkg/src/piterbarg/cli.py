"""Command-line front end: ``piterbarg <command> ...``.

Exit codes: 0 ok, 2 usage or config error, 3 numeric failure, 4 acceptance failure.
Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harness, pickands
from .errors import PiterbargError
from .gp_sim import CorrelationModel, SimulationMesh, dump_paths_csv, sample_scalar_paths
from . import rng

OUTPUT_KEYS = ("dir", "stem", "formats", "plots")


class UsageError(Exception):
    exit_code = 2


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message, 2)
        sys.exit(2)


def _emit_error(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code},
                                sort_keys=True) + "\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _load_config(path) -> tuple[harness.ExperimentConfig, dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc
    cfg = harness.config_from_dict(doc)
    out = doc.get("output", {})
    extra = set(out) - set(OUTPUT_KEYS)
    if extra:
        raise UsageError(f"unknown keys in 'output': {sorted(extra)}")
    return cfg, out


# ------------------------------------------------------------------ commands

def cmd_constants(args) -> int:
    kind = args.kind
    need_d1 = kind in ("H_D", "H_xy", "H_D1D2", "H_x_z1z2")
    if need_d1 and args.d1 is None:
        raise UsageError(f"--kind {kind} needs --d1")
    if kind in ("H_D1D2", "H_x_z1z2") and args.d2 is None:
        raise UsageError(f"--kind {kind} needs --d2")
    common = dict(batch=None, method=args.method, workers=args.workers)
    lam, reps, seed = args.lam, args.reps, args.seed
    offsets = args.offsets_lattice or [0.0]
    rows = []
    if kind == "H":
        rows.append(pickands.estimate_H_alpha(args.alpha, lam, args.mesh, reps, seed, **common))
    elif kind == "H_D":
        rows.append(pickands.estimate_H_D(args.alpha, args.d1, lam, reps, seed,
                                          mesh=args.mesh, **common))
    else:
        supports = [pickands.CONTINUOUS] if kind != "H_D1D2" else []
        supports += [pickands.Grid(args.d1)]
        if kind in ("H_D1D2", "H_x_z1z2"):
            supports.append(pickands.Grid(args.d2))
        mesh = args.mesh or pickands.default_mesh(*[s.D for s in supports if isinstance(s, pickands.Grid)])
        batch = pickands.field_maxima(args.alpha, lam, mesh, supports, reps, seed,
                                      method=args.method, workers=args.workers)
        common["batch"] = batch
        for a in offsets:
            for b in offsets:
                if kind == "H_xy":
                    rows.append(pickands.estimate_H_xy(args.alpha, args.d1, a, b, lam, mesh,
                                                       reps, seed, **common))
                elif kind == "H_D1D2":
                    rows.append(pickands.estimate_H_D1D2(args.alpha, args.d1, args.d2, a, b,
                                                         lam, mesh, reps, seed, **common))
                else:
                    for c in offsets:
                        rows.append(pickands.estimate_H_x_z1z2(
                            args.alpha, args.d1, args.d2, a, b, c, lam, mesh, reps, seed,
                            **common))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            pickands.write_estimates_csv(rows, fh)
    else:
        pickands.write_estimates_csv(rows, sys.stdout)
    return 0


def cmd_simulate(args) -> int:
    model = CorrelationModel(args.alpha, args.c)
    mesh = SimulationMesh.covering(args.horizon, args.spacing)
    dump_paths_csv(sample_scalar_paths(model, mesh, args.reps, args.seed, args.workers), args.out)
    return 0


def _write_outputs(report, out: dict, default_dir: str | None) -> list[Path]:
    directory = Path(out.get("dir") or default_dir or ".")
    directory.mkdir(parents=True, exist_ok=True)
    stem = out.get("stem", "report")
    written = []
    for fmt in out.get("formats", ["json", "csv"]):
        if fmt not in ("json", "csv"):
            raise UsageError(f"unknown report format {fmt!r}")
        path = directory / f"{stem}.{fmt}"
        harness.export_report(report, fmt, path)
        written.append(path)
    if out.get("plots"):
        written += make_plots(report, directory)
    return written


def cmd_verify(args) -> int:
    cfg, out = _load_config(args.config)
    if args.dry_run:
        print(f"config ok hash={cfg.digest()}")
        return 0
    report = harness.run_experiment(cfg, args.workers)
    _write_outputs(report, out, args.out_dir)
    for r in report.results:
        print(f"T={r.T!r} sup_dist={r.sup_distance!r} reps={report.reps}")
    checks = harness.acceptance(cfg, report)
    return 0 if all(checks.values()) else 4


def cmd_sweep(args) -> int:
    cfg, out = _load_config(args.config)
    report = harness.run_experiment(cfg, args.workers)
    sweep = harness.convergence_sweep(cfg, report=report)
    _write_outputs(report, out, args.out_dir)
    for T, d in zip(sweep.T_values, sweep.distances):
        print(f"T={T!r} sup_dist={d!r} reps={report.reps}")
    print(f"trend={'ok' if sweep.trend_ok else 'fail'}")
    return 0 if sweep.passed else 4


def _read_report(path):
    try:
        return harness.load_report(path)
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise UsageError(f"malformed report {path}: {exc}") from exc


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "piterbarg"
    return plt


def distance_figure(report):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    lnT = [math.log(r.T) for r in report.results]
    ax.plot(lnT, report.distances, marker="o", linestyle="-" if len(lnT) > 1 else "none")
    ax.set_xlabel("ln T")
    ax.set_ylabel("sup distance")
    ax.set_ylim(bottom=0)
    return fig


def slice_figure(report):
    """Empirical vs limit CDF along the lattice diagonal (all coordinates equal)."""
    plt = _pyplot()
    pts = report.points
    diag = np.flatnonzero(np.all(pts == pts[:, :1], axis=1)) if len(pts) else []
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if len(diag):
        z = pts[diag, 0]
        ax.plot(z, report.results[-1].theoretical[diag], color="k", label="limit")
        for r in report.results:
            ax.errorbar(z, r.empirical[diag], yerr=r.stderr[diag], marker=".", capsize=2,
                        linestyle="none", label=f"ln T = {math.log(r.T):.3g}")
        ax.legend(fontsize=7)
    ax.set_xlabel("common argument")
    ax.set_ylabel("joint CDF")
    return fig


def make_plots(report, directory) -> list[Path]:
    plt = _pyplot()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, build in (("distance.svg", distance_figure), ("cdf_slice.svg", slice_figure)):
        fig = build(report)
        paths.append(directory / name)
        fig.savefig(paths[-1], format="svg", metadata={"Date": None})
        plt.close(fig)
    return paths


def cmd_plot(args) -> int:
    report = _read_report(args.report)
    for p in make_plots(report, args.out):
        print(p)
    return 0


def cmd_report(args) -> int:
    report = _read_report(args.report)
    harness.export_report(report, args.format, args.out)
    for r in report.results:
        print(f"T={r.T!r} sup_dist={r.sup_distance!r} reps={report.reps}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> Parser:
    p = Parser(prog="piterbarg", description="Joint maxima of Gaussian processes over "
               "continuous time and grids: constants, simulation and verification.")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $PITERBARG_WORKERS or 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    c = sub.add_parser("constants", help="estimate Pickands-type constants")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--kind", choices=("H", "H_D", "H_xy", "H_D1D2", "H_x_z1z2"), default="H")
    c.add_argument("--d1", type=float)
    c.add_argument("--d2", type=float)
    c.add_argument("--lambda", dest="lam", type=float, default=64.0)
    c.add_argument("--mesh", type=float)
    c.add_argument("--reps", type=int, default=20_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--offsets-lattice", type=_floats)
    c.add_argument("--method", choices=("stationary", "direct"), default="stationary")
    c.add_argument("--out")
    c.set_defaults(func=cmd_constants)

    s = sub.add_parser("simulate", help="dump sample paths as CSV")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--horizon", type=float, required=True)
    s.add_argument("--spacing", type=float, required=True)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    for name, fn, text in (("verify", cmd_verify, "run a verification experiment"),
                           ("sweep", cmd_sweep, "convergence sweep over the T ladder")):
        v = sub.add_parser(name, help=text)
        v.add_argument("config")
        v.add_argument("--out-dir")
        if name == "verify":
            v.add_argument("--dry-run", action="store_true")
        v.set_defaults(func=fn)

    pl = sub.add_parser("plot", help="SVG plots from a report")
    pl.add_argument("report")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)

    r = sub.add_parser("report", help="re-export a report as csv or json")
    r.add_argument("report")
    r.add_argument("--format", choices=("csv", "json"), required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is None:
        args.workers = rng.default_workers()
    try:
        return args.func(args)
    except (PiterbargError, UsageError) as exc:
        return _fail(exc, exc.exit_code)
    except (ValueError, OSError) as exc:
        return _fail(exc, 2)
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail(exc, 3)


def _fail(exc: Exception, code: int) -> int:
    _emit_error(type(exc).__name__, str(exc), code)
    return code


if __name__ == "__main__":
    sys.exit(main())
