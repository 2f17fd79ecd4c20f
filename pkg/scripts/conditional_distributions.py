"""Photon-number distributions in ancilla mode 0' given two-mode bunching, for star, identical and distinguishable inputs."""

import argparse

from bunching.experiments import distribution_experiment

from csv_out import write_rows

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--n", type=int, default=7)
p.add_argument("--out", default="results/distributions.csv")
args = p.parse_args()

rows = [rec.row() for which in ("star", "bos", "dist") for rec in distribution_experiment(args.n, which)]
write_rows(args.out, rows, ["input", "n", "j", "conditional_p", "P_abs", "P_bunch"])
