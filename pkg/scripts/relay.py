"""Hub-to-hub relay probabilities on the truncated tree."""

import argparse

from contact_lab.experiments import relay_experiment
from contact_lab.graphs import build_sv_tree


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--i-max", type=int, default=4)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--n-runs", type=int, default=500)
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    g = build_sv_tree(args.i_max)
    ests = relay_experiment(g, args.lam, args.hops, args.n_runs, args.seed, args.horizon, args.threads)
    print("hop,p_hat,ci_low,ci_high")
    for hop, est in enumerate(ests, start=1):
        print(f"{hop},{est.p_hat:.4f},{est.ci_low:.4f},{est.ci_high:.4f}")


if __name__ == "__main__":
    main()
