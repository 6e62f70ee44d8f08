"""Monte Carlo Pickands constants against the values known in closed form.

alpha = 2 gives 1/sqrt(pi), alpha = 1 gives 1; the discrete constant at alpha = 1
has a random-walk series (evaluated here with 2e5 terms).
"""

import argparse
import math

import numpy as np
from scipy.stats import norm

from piterbarg.pickands import estimate_H_alpha, estimate_H_D


def h_d1_series(D, terms=200_000):
    k = np.arange(1, terms + 1)
    return math.exp(-2 * np.sum(norm.sf(np.sqrt(k * D / 2)) / k)) / D


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=64.0)
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--method", choices=("stationary", "direct"), default="stationary")
    args = ap.parse_args()

    print(f"{'kind':<10}{'alpha':>6}{'D':>6}{'estimate':>11}{'stderr':>10}{'target':>10}")
    rows = [("H", 2.0, None, 1 / math.sqrt(math.pi)), ("H", 1.0, None, 1.0),
            ("H", 1.5, None, float("nan"))]
    rows += [("H_D", 1.0, D, h_d1_series(D)) for D in (0.25, 0.5, 1.0, 2.0)]
    for kind, alpha, D, target in rows:
        if kind == "H":
            mesh = 0.01 if alpha < 2 else None
            est = estimate_H_alpha(alpha, args.lam, mesh, args.reps, args.seed, method=args.method)
        else:
            est = estimate_H_D(alpha, D, args.lam, args.reps, args.seed, method=args.method)
        print(f"{kind:<10}{alpha:>6.2f}{'' if D is None else D:>6}{est.value:>11.5f}"
              f"{est.stderr:>10.5f}{target:>10.5f}")


if __name__ == "__main__":
    main()
