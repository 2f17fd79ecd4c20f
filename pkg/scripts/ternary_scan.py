"""log10 of the bunching ratio over mixtures of the star, identical and distinguishable Gram matrices."""

import argparse

from bunching.experiments import ternary_scan

from csv_out import write_rows

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--grid-step", type=float, default=0.02)
p.add_argument("--out", default="results/ternary.csv")
args = p.parse_args()

rows = [r.row() for r in ternary_scan(args.grid_step)]
write_rows(args.out, rows, ["x", "y", "ratio", "log10_ratio"])
print(f"violating points: {sum(r['ratio'] > 1 for r in rows)} of {len(rows)}")
