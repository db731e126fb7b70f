"""Squeezing spectra at several pump powers, plus the zero-phase-noise curve.

    python scripts/pump_spectra.py --out spectra.csv [--noisy --seed 1]
"""
import argparse
import math
from dataclasses import replace
from pathlib import Path

from opasqueeze.dataio import rows_to_csv
from opasqueeze.quadrature import REFERENCE_PARAMS
from opasqueeze.synth import TraceSpec, synth_spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pumps-mW", type=float, nargs="+", default=[6, 56, 106, 180])
    ap.add_argument("--start", type=float, default=2.5e6)
    ap.add_argument("--stop", type=float, default=50e6)
    ap.add_argument("-n", type=int, default=96)
    ap.add_argument("--noisy", action="store_true", help="add averaged seeded scatter (10 traces)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    spec = TraceSpec(seed=args.seed, n_averages=10) if args.noisy else None
    curves = [(REFERENCE_PARAMS, p * 1e-3) for p in args.pumps_mW]
    curves.append((replace(REFERENCE_PARAMS, phase_jitter=0.0), max(args.pumps_mW) * 1e-3))
    rows = []
    for params, p in curves:
        for f, s, a in synth_spectrum(params, p, (args.start, args.stop, args.n), spec):
            rows.append((p * 1e3, math.degrees(params.phase_jitter), f, s, a))
    text = rows_to_csv(("pump_mW", "theta_fluc_deg", "frequency_Hz", "squeezed_dB", "antisqueezed_dB"), rows)
    if args.out:
        args.out.write_text(text)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(text, end="")
    floor = min(r[3] for r in rows if r[1] == 0.0)
    print(f"# zero-phase-noise floor: {floor:.2f} dB", flush=True)


if __name__ == "__main__":
    main()
