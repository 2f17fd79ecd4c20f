"""Violation ratio R_n of the circuit family against its analytic lower bound."""

import argparse

from bunching.experiments import ratio_scan

from csv_out import write_rows

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--n-min", type=int, default=4)
p.add_argument("--n-max", type=int, default=20)
p.add_argument("--out", default="results/ratio.csv")
args = p.parse_args()

rows = [r.row() for r in ratio_scan(args.n_min, args.n_max)]
write_rows(args.out, rows, ["n", "P_bos", "P_star", "R", "bound"])
