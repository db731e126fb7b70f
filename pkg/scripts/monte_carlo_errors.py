"""Repeat the noisy pump-sweep fit over many seeds and summarize the error bars.

Reports coverage (truth within k reported sigma), median reported errors and
the scatter of the estimates across seeds.

    python scripts/monte_carlo_errors.py --n-seeds 100
"""
import argparse
import math

import numpy as np

from opasqueeze.estimation import FitConfig, fit
from opasqueeze.quadrature import REFERENCE_PARAMS
from opasqueeze.synth import TraceSpec, synth_pump_sweep

NAMES = ("eta", "P_thr [mW]", "theta [deg]")
SCALE = np.array([1.0, 1e3, 180 / math.pi])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-seeds", type=int, default=100)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--n-powers", type=int, default=12)
    ap.add_argument("--k", type=float, default=3.0, help="coverage threshold in reported sigmas")
    ap.add_argument("--domain", choices=("db", "linear"), default="db")
    args = ap.parse_args()

    truth = np.array([REFERENCE_PARAMS.efficiency, REFERENCE_PARAMS.threshold_power, REFERENCE_PARAMS.phase_jitter])
    powers = np.linspace(6e-3, 180e-3, args.n_powers)
    est, err, stalled = [], [], 0
    for seed in range(args.first_seed, args.first_seed + args.n_seeds):
        ds = synth_pump_sweep(REFERENCE_PARAMS, powers, 5e6, TraceSpec(seed=seed))
        res = fit(ds, FitConfig(residual_domain=args.domain))
        stalled += not res.converged
        est.append([res.params.efficiency, res.params.threshold_power, res.params.phase_jitter])
        err.append(res.std_errors)
    est, err = np.array(est), np.array(err)
    cover = np.mean(np.abs(est - truth) <= args.k * err, axis=0)
    print(f"{args.n_seeds} fits, {stalled} not converged, residual domain {args.domain}")
    print(f"{'parameter':<12} {'coverage':>9} {'median err':>11} {'spread':>9} {'mean bias':>10}")
    for i, name in enumerate(NAMES):
        s = SCALE[i]
        print(f"{name:<12} {cover[i]:>9.0%} {np.median(err[:, i]) * s:>11.4g} "
              f"{est[:, i].std(ddof=1) * s:>9.4g} {(est[:, i].mean() - truth[i]) * s:>10.3g}")


if __name__ == "__main__":
    main()
