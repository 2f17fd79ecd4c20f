"""Random search for rank-r Gram matrices that beat indistinguishable bunching, with an optional planted self-test."""

import argparse
import json

from bunching.experiments import counterexample_search

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--n", type=int, default=7)
p.add_argument("--rank", type=int, default=2)
p.add_argument("--samples", type=int, default=100_000)
p.add_argument("--seed", type=int, default=0)
p.add_argument("--threads", type=int, default=None)
p.add_argument("--plant-drury", action="store_true")
args = p.parse_args()

summary = counterexample_search(
    n=args.n, r=args.rank, samples=args.samples, seed=args.seed, plant_drury=args.plant_drury, threads=args.threads
)
print(json.dumps(summary.as_dict(), indent=2))
