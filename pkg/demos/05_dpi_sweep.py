"""Small coupling sweep classified by DPI.

Runs a grid of coupling strengths on one ring, classifies the final state of
each run into synchronized groups and prints the DPI along with the
detection-to-baseline time ratio.  Groups are classified at the time limit,
so a short ``--time-limit`` misses groups that form later and shows flagged
runs as false positives.  For large grids use ``tdlescan sweep``.
"""
import argparse

import numpy as np

from tdlescan.detector import calibrate
from tdlescan.model import RunOptions
from tdlescan.sweep import build_grid, efficiency_report, format_report, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--radius", type=int, default=1)
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--time-limit", type=int, default=2000)
    args = ap.parse_args()

    thr = calibrate(4, 90.0, 24, 2024, np.round(np.arange(0.1, 3.01, 0.3), 2))
    alphas = np.round(np.arange(0.5, 3.01, 0.25), 2)
    points = build_grid(args.n, [args.radius], alphas, args.seeds, master_seed=1)
    records = sweep(points, thr, RunOptions(time_limit=args.time_limit), workers=args.workers)
    for rec in records:
        ratio = (rec.crossing_time / rec.baseline_time
                 if rec.flagged and rec.baseline_time else float("nan"))
        print(f"alpha={rec.alpha:5.2f} seed={rec.seed:<20d} groups={rec.n_groups} "
              f"dpi={rec.dpi:.3f} flagged={rec.flagged} ratio={ratio:.3f}")
    print(format_report(efficiency_report({90.0: records})))


if __name__ == "__main__":
    main()
