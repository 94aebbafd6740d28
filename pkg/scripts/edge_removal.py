"""Matched runs on the truncated tree and on its half after cutting e*."""

import argparse

from contact_lab.experiments import QUANTILES, edge_removal_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--i-max", type=int, default=4)
    p.add_argument("--lam", type=float, default=0.25)
    p.add_argument("--horizon", type=float, default=500.0)
    p.add_argument("--n-runs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    rep = edge_removal_experiment(args.i_max, args.lam, args.horizon, args.n_runs, args.seed,
                                  parallelism=args.threads)
    for name, est in (("G", rep.survival_full), ("G+", rep.survival_plus)):
        print(f"{name:3s} survival {est.p_hat:.4f}  [{est.ci_low:.4f}, {est.ci_high:.4f}]")
    print("quantiles   " + "  ".join(f"{q:>8g}" for q in QUANTILES))
    print("time G      " + "  ".join(f"{x:8.3f}" for x in rep.time_quantiles_full))
    print("time G+     " + "  ".join(f"{x:8.3f}" for x in rep.time_quantiles_plus))
    print(f"coupling violations: {rep.coupling_violations}")
    print(f"median e* crossings among G survivors: {rep.median_crossings}")


if __name__ == "__main__":
    main()
