"""Run a verification config end to end: report files, plots and a convergence summary.

    python3 scripts/desk_run.py scripts/configs/t21_i_desk.json --reps 2000
"""

import argparse
import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from piterbarg.cli import make_plots
from piterbarg.harness import config_from_dict, convergence_sweep, export_report, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--reps", type=int, help="override the replication count")
    ap.add_argument("--proxy", choices=("mesh", "bridge"), help="continuous-maximum proxy")
    ap.add_argument("--out", default="out/desk")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()

    cfg = config_from_dict(json.loads(Path(args.config).read_text()))
    if args.reps:
        cfg = replace(cfg, reps=args.reps)
    if args.proxy:
        cfg = replace(cfg, continuous_proxy=args.proxy)
    cfg.validate()

    t0 = time.perf_counter()
    report = run_experiment(cfg, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fmt in ("json", "csv"):
        export_report(report, fmt, out / f"report.{fmt}")
    make_plots(report, out)

    for r in report.results:
        worst = int(np.abs(r.empirical - r.theoretical).argmax())
        print(f"ln T={math.log(r.T):5.2f}  h={r.mesh_spacing:.5f}  "
              f"sup_dist={r.sup_distance:.4f}  worst point {report.points[worst].round(3)}")
    if len(cfg.T_values) >= 3:
        sweep = convergence_sweep(cfg, report=report)
        print(f"trend {'ok' if sweep.trend_ok else 'fail'}, passed={sweep.passed}")
    print(f"{time.perf_counter() - t0:.1f}s, config {cfg.digest()[:12]}")


if __name__ == "__main__":
    main()
