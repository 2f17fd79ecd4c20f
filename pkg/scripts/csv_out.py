"""Shared CSV writer for the reproduction scripts."""

import csv
from pathlib import Path


def write_rows(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: f"{row[c]:.12g}" if isinstance(row[c], float) else row[c] for c in columns})
    print(f"wrote {len(rows)} rows to {path}")
