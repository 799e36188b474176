"""Calibrate a detection threshold on a small ring and apply it to larger ones.

The threshold is a power-law envelope of the spectrum gap over incoherent
4-node runs.  It is then used on a few 6- and 8-node runs; each detection is
compared with the time at which the first pair actually synchronizes.
"""
import argparse

import numpy as np

from tdlescan.detector import calibrate, detect, run_baseline
from tdlescan.model import NetworkSpec, RunOptions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--percentile", type=float, default=90.0)
    ap.add_argument("--runs", type=int, default=24, help="calibration runs")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    alphas = np.round(np.arange(0.1, 3.01, 0.3), 2)
    thr = calibrate(4, args.percentile, args.runs, args.seed, alphas)
    print(f"threshold: {thr.a:.4g} * t^-{thr.b:.4g} + {thr.c:.3g}  ({thr.runs} incoherent runs)")

    opts = RunOptions()
    for n, r, a in [(6, 1, 2.0), (6, 1, 2.75), (8, 2, 1.25), (6, 1, 0.5)]:
        spec = NetworkSpec(n, r, a)
        for seed in range(2):
            res = detect(spec, seed, thr, opts)
            base = run_baseline(spec, seed, opts)
            ratio = res.crossing_time / base.time if res.flagged and base.synchronized else None
            print(f"N={n} R={r} alpha={a} seed={seed}: {res.termination_reason:>20s}  "
                  f"crossing={res.crossing_time}  baseline={base.time:.1f}  ratio={ratio}")


if __name__ == "__main__":
    main()
