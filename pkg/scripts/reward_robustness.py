"""Dual and primal estimates on a grid under scaled, shifted and exponentiated rewards."""
import argparse
import logging

from unidice.experiments import TRANSFORMS, exact_problem, reward_robustness, write_robustness
from unidice.mdp import build_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--side", type=int, default=5)
    ap.add_argument("--transform", action="append", choices=TRANSFORMS)
    ap.add_argument("--out", default="reward_robustness.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    problem = exact_problem(*build_grid(args.side))
    rows = [row for t in (args.transform or TRANSFORMS) for row in reward_robustness(problem, t)]
    write_robustness(rows, args.out)
    for r in rows:
        logging.info("%-9s %-10s dev_reference=%.2e dev_truth=%.2e", r.transform, r.estimator, r.dev_reference, r.dev_truth)


if __name__ == "__main__":
    main()
