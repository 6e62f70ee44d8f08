"""Finite-level tail ratios: sparse non-uniform point set and two Pickands grids."""

import argparse

from piterbarg.gp_sim import CorrelationModel
from piterbarg.harness import alternating_points, tail_check_lemmaA5
from piterbarg.pickands import estimate_H_D1D2, horizon_for_probability, tail_prob_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()

    model = CorrelationModel(1.0)
    for u in (3.3, 3.6, 3.9):
        r = tail_check_lemmaA5(model, alternating_points(200), u, args.reps, args.seed)
        print(f"point set  u={u:.1f}  ratio={r.ratio:.4f}  p={r.probability:.5f} "
              f"+- {r.prob_stderr:.5f}  N*Phi_bar(u)={r.bound:.5f}")

    H = estimate_H_D1D2(1.0, 1.0, 0.5, 0.0, 0.0, 32.0, None, 20_000, args.seed)
    for u in (3.5, 4.0):
        S = horizon_for_probability(0.02, H.value, u, 1.0)
        r = tail_prob_check(1.0, 1.0, 0.5, 0.0, S, u, None, args.reps // 2, args.seed, H=H)
        print(f"two grids  u={u:.1f}  S={S:.1f}  ratio={r.ratio:.4f}  p={r.probability:.5f} "
              f"+- {r.prob_stderr:.5f}  H={H.value:.5f}")


if __name__ == "__main__":
    main()
