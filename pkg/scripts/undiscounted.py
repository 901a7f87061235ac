"""Average-reward values from the normalized system against long rollouts on random ergodic MDPs."""
import argparse
import csv
import logging

from unidice.exact import solve_undiscounted
from unidice.mdp import average_reward_rollout, random_mdp, random_policy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-mdps", type=int, default=10)
    ap.add_argument("--states", type=int, default=3)
    ap.add_argument("--actions", type=int, default=2)
    ap.add_argument("--steps", type=int, default=1_000_000)
    ap.add_argument("--out", default="undiscounted.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "rho", "rollout", "abs_error"])
        for i in range(args.n_mdps):
            mdp = random_mdp(args.states, args.actions, 1.0, i)
            pi = random_policy(args.states, args.actions, 1000 + i)
            rho = solve_undiscounted(mdp, pi).rho
            avg = average_reward_rollout(mdp, pi, args.steps, rng_seed=i)
            w.writerow([i, repr(rho), repr(avg), repr(abs(rho - avg))])
            logging.info("seed %d: rho=%.5f rollout=%.5f", i, rho, avg)


if __name__ == "__main__":
    main()
