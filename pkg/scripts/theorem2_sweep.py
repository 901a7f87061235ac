"""Closed-form classification sweep on the designed MDP (or a grid), exact and dataset modes."""
import argparse
import logging

from unidice.experiments import exact_problem, load_fixture, theorem2_sweep, theorem2_sweep_dataset, write_sweep
from unidice.mdp import build_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, help="use a SIDE x SIDE grid instead of the designed fixture")
    ap.add_argument("--mode", choices=("exact", "dataset"), default="exact")
    ap.add_argument("--with-baseline", action="store_true")
    ap.add_argument("--n-traj", type=int, default=100)
    ap.add_argument("--n-seeds", type=int, default=10)
    ap.add_argument("--tolerance", type=float, default=1e-6)
    ap.add_argument("--out", default="theorem2_sweep.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    env = build_grid(args.grid) if args.grid else load_fixture("designed")
    if args.mode == "exact":
        rows = theorem2_sweep(exact_problem(*env), args.tolerance, args.with_baseline)
    else:
        rows = theorem2_sweep_dataset(*env, n_trajectories=args.n_traj, n_seeds=args.n_seeds,
                                      tolerance=args.tolerance, with_baseline=args.with_baseline)
    write_sweep(rows, args.out)
    for r in rows:
        flag = "" if r.match else "  <-- mismatch"
        logging.info("%-40s %-10s err=%.3e expected=%-8s%s", r.config.label(), r.estimator, r.abs_error, r.expected, flag)
    logging.info("%d/%d cells match; wrote %s", sum(r.match for r in rows), len(rows), args.out)


if __name__ == "__main__":
    main()
