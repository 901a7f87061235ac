"""Regularizer weight and normalization ablations on the designed MDP (closed forms)."""
import argparse
import csv
import logging
import warnings

from unidice.dice import BiasedConfigWarning, closed_form_solution, estimates, positive_part_relaxation, table_configs
from unidice.experiments import ESTIMATORS, exact_problem, load_fixture

HEADER = ["weight", "normalization", "config", "case", "estimator", "estimate", "true_rho", "abs_error"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weights", type=float, nargs="+", default=[0.1, 0.5, 1.0, 2.0, 10.0])
    ap.add_argument("--out", default="ablations.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    problem = exact_problem(*load_fixture("designed"))
    rho = problem.target_value()
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for weight in args.weights:
            for norm in (False, True):
                for c in table_configs(weight, normalization=norm):
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", BiasedConfigWarning)
                        out = closed_form_solution(c, problem)
                    if out is None:
                        continue
                    for name, est in zip(ESTIMATORS, estimates(out[0], problem)):
                        w.writerow([weight, int(norm), c.label(), c.case, name, repr(est), repr(rho), repr(abs(est - rho))])

    # case ii: exact saddle versus the clipped relaxation
    c = table_configs()[1]
    exact = estimates(closed_form_solution(c, problem)[0], problem)
    relaxed = estimates(positive_part_relaxation(c, problem), problem)
    for name, a, b in zip(ESTIMATORS, exact, relaxed):
        logging.info("case ii %-10s exact saddle %.6f  positive-part relaxation %.6f  true %.6f", name, a, b, rho)
    logging.info("wrote %s", args.out)


if __name__ == "__main__":
    main()
