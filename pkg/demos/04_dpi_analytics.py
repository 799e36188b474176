"""DPI values of every synchronization pattern and the two closed-form families.

Lists all partial-synchronization patterns of a small ring ranked by DPI,
points out patterns that share a value, and prints a slice of the equal-group
and two-size families for a 100-oscillator network.
"""
import argparse
from collections import defaultdict
from math import comb

import numpy as np

from tdlescan.dpi import dpi, dpi_equal_groups, dpi_exact, enumerate_configurations, two_groups_surface


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    args = ap.parse_args()

    by_value = defaultdict(list)
    for c in enumerate_configurations(args.n):
        by_value[dpi_exact(c)].append(c.group_sizes)
        print(f"{str(c.group_sizes):18s} triplet={c.triplet}  dpi={dpi(c).value:.4f}")
    shared = {v: g for v, g in by_value.items() if len(g) > 1}
    print("shared values:", shared or "none")

    # a slice of the equal-group family for 100 oscillators; the full
    # surfaces are written by `tdlescan dpi surface`
    sizes = [2, 5, 10, 25, 50]
    for g in sizes:
        row = []
        for k in (1, 2, 4):
            row.append(f"{dpi_equal_groups(100, g, k * comb(g, 2)):.4g}" if g * k <= 100 else "-")
        print(f"group size {g:3d}: k=1,2,4 -> {row}")
    two = two_groups_surface(100, sizes, [1, 2, 4])
    print("two-size family:", np.round(two, 4).tolist())

if __name__ == "__main__":
    main()
