"""Command-line front end.

Exit codes: 0 on success, 1 when a reproduction check fails, 2 on usage errors.
Every command writes its table to ``--out`` (stdout by default) as CSV or JSON.
``--json`` prints a single-object JSON report to stdout; without ``--out`` it
replaces the table there.  With
``--manifest PATH`` a run manifest with output checksums is written, which
``bunching replay PATH`` re-executes and verifies byte for byte.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from . import experiments as ex
from .circuits import drury_matrices
from .permanent import permanent_naive, permanent_ryser
from .states import NOISE_MODELS

log = logging.getLogger("bunching")

DRURY_RATIO = 1237 / 1152
DRURY_RTOL = 1e-9


class UsageError(Exception):
    pass


@dataclass
class Result:
    """Output of one command: a table plus a summary report."""

    columns: list[str]
    rows: list[dict]
    report: dict = field(default_factory=dict)
    comment: str | None = None
    ok: bool = True
    text: str | None = None


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def render_csv(res: Result) -> str:
    buf = io.StringIO()
    if res.comment:
        buf.write(f"# {res.comment}\n")
    buf.write(",".join(res.columns) + "\n")
    for row in res.rows:
        buf.write(",".join(fmt(row[c]) for c in res.columns) + "\n")
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def render_json(res: Result, command: str) -> str:
    doc = {"command": command, "report": res.report, "rows": [{c: r[c] for c in res.columns} for r in res.rows]}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def parse_eps_grid(grid: str) -> list[float]:
    """``a:b:step`` -> a, a+step, ..., up to and including b."""
    try:
        a, b, step = (float(x) for x in grid.split(":"))
    except ValueError:
        raise UsageError(f"malformed grid {grid!r}, expected a:b:step") from None
    if step <= 0 or b < a or a < 0:
        raise UsageError(f"grid {grid!r} needs 0 <= a <= b and step > 0")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 12) for i in range(count)]


# ---------------------------------------------------------------- commands


def cmd_drury_check(args) -> Result:
    A, _ = drury_matrices()
    kernel = permanent_naive if args.naive_oracle else permanent_ryser
    t0 = time.perf_counter()
    num = kernel(A * A.T)
    den = kernel(A)
    log.info("permanents took %.3f s", time.perf_counter() - t0)
    ratio = num.real / den.real
    rel = abs(ratio - DRURY_RATIO) / DRURY_RATIO
    ok = rel < DRURY_RTOL
    report = {
        "perm_A_hadamard_AT": num.real,
        "perm_A": den.real,
        "ratio": ratio,
        "expected": DRURY_RATIO,
        "relative_error": rel,
        "kernel": "naive" if args.naive_oracle else "ryser",
        "status": "PASS" if ok else "FAIL",
    }
    text = (
        f"perm(A*A^T) = {num.real:.12g}\n"
        f"perm(A)     = {den.real:.12g}\n"
        f"ratio       = {ratio:.12g} (expected 1237/1152 = {DRURY_RATIO:.12g})\n"
        f"{report['status']}\n"
    )
    cols = ["perm_A_hadamard_AT", "perm_A", "ratio", "status"]
    return Result(cols, [report], report, ok=ok, text=text)


def cmd_ratio(args) -> Result:
    if not 4 <= args.n_min <= args.n_max <= ex.RATIO_N_MAX:
        raise UsageError(f"need 4 <= n-min <= n-max <= {ex.RATIO_N_MAX}")
    records = ex.ratio_scan(args.n_min, args.n_max, args.eta, check=False)
    rows = [r.row() for r in records]
    bad = [r["n"] for r in rows if r["R"] < r["bound"]]
    report = {"n_min": args.n_min, "n_max": args.n_max, "eta": args.eta, "bound_violations": bad}
    return Result(["n", "P_bos", "P_star", "R", "bound"], rows, report, ok=not bad)


def cmd_distribution(args) -> Result:
    if not 4 <= args.n <= ex.DISTRIBUTION_N_MAX:
        raise UsageError(f"need 4 <= n <= {ex.DISTRIBUTION_N_MAX}")
    records = ex.distribution_experiment(args.n, args.input)
    rows = [{"j": r.params["j"], "conditional_p": r.values["conditional_p"], "absolute_p": r.values["P_abs"]} for r in records]
    total = records[0].values["P_bunch"]
    report = {"n": args.n, "input": args.input, "total_bunching_probability": total}
    return Result(
        ["j", "conditional_p", "absolute_p"],
        rows,
        report,
        comment=f"total_bunching_probability={total:.12g}",
    )


def cmd_perturb(args) -> Result:
    if args.samples < 1:
        raise UsageError("samples must be >= 1")
    eps = parse_eps_grid(args.eps_grid)
    records = ex.perturbation_sweep(args.target, eps, args.samples, args.seed, noise=args.noise, threads=args.threads)
    rows = [{"epsilon": r.params["epsilon"], **r.values} for r in records]
    report = {"target": args.target, "samples": args.samples, "seed": args.seed, "noise": args.noise}
    return Result(["epsilon", "mean_R", "std_R", "frac_violating"], rows, report)


def cmd_search(args) -> Result:
    if not 1 <= args.n <= ex.SEARCH_N_MAX:
        raise UsageError(f"need 1 <= n <= {ex.SEARCH_N_MAX}")
    if args.plant_drury and args.n != 7:
        raise UsageError("--plant-drury needs --n 7")
    if args.plant_drury and args.samples < 1:
        raise UsageError("--plant-drury needs at least one sample")
    summary = ex.counterexample_search(
        n=args.n,
        r=args.rank,
        samples=args.samples,
        seed=args.seed,
        subset_size=args.subset_size,
        plant_drury=args.plant_drury,
        plant_index=args.plant_index,
        threads=args.threads,
    )
    report = summary.as_dict()
    ok = True
    if args.plant_drury:
        ok = args.plant_index in summary.violating_indices
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    return Result(list(report), [report], report, ok=ok, text=text)


def cmd_ternary(args) -> Result:
    if not 0 < args.grid_step <= 0.5:
        raise UsageError("grid-step must lie in (0, 0.5]")
    if abs(round(1 / args.grid_step) * args.grid_step - 1) > 1e-9:
        log.warning("grid step %s does not divide 1; points beyond the simplex are skipped", args.grid_step)
    rows = [r.row() for r in ex.ternary_scan(args.grid_step, check=False)]
    at = {(r["x"], r["y"]): r["ratio"] for r in rows}
    ok = at[(0.0, 0.0)] > 1.0 and abs(at.get((1.0, 0.0), 1.0) - 1.0) <= 1e-12
    report = {"grid_step": args.grid_step, "points": len(rows), "ratio_at_star": at[(0.0, 0.0)]}
    return Result(["x", "y", "ratio", "log10_ratio"], rows, report, ok=ok)


def cmd_stability(args) -> Result:
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    records = ex.stability_trials(args.n, args.trials, args.seed, check=False)
    rows = [{"trial": r.params["trial"], "derivative_norm": r.values["derivative_norm"]} for r in records]
    worst = max(r["derivative_norm"] for r in rows)
    report = {
        "n": args.n,
        "trials": args.trials,
        "seed": args.seed,
        "max_derivative_norm": worst,
        "tolerance": ex.STABILITY_TOL,
    }
    return Result(["trial", "derivative_norm"], rows, report, ok=worst <= ex.STABILITY_TOL)


COMMANDS = {
    "drury-check": cmd_drury_check,
    "ratio": cmd_ratio,
    "distribution": cmd_distribution,
    "perturb": cmd_perturb,
    "search": cmd_search,
    "ternary": cmd_ternary,
    "stability": cmd_stability,
}


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, formats: bool = True):
    p.add_argument("--out", help="output file (default: stdout)")
    if formats:
        p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--json", action="store_true", help="print a JSON report to stdout")
    p.add_argument("--manifest", help="write a run manifest with output checksums")
    p.add_argument("--threads", type=int, default=None, help=f"worker cap (default ${ex.THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bunching", description="Boson bunching with partially distinguishable photons.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("drury-check", help="verify perm(A*A^T)/perm(A) = 1237/1152")
    p.add_argument("--naive-oracle", action="store_true", help="use the n! reference permanent")
    _common(p)

    p = sub.add_parser("ratio", help="bunching violation ratio R_n against its lower bound")
    p.add_argument("--n-min", type=int, default=4)
    p.add_argument("--n-max", type=int, default=14)
    p.add_argument("--eta", type=float, default=None, help="beam-splitter transmittance (default 2/n)")
    _common(p)

    p = sub.add_parser("distribution", help="photon-number distribution in mode 0' given two-mode bunching")
    p.add_argument("--n", type=int, default=7)
    p.add_argument("--input", choices=["star", "bos", "dist"], default="star")
    _common(p)

    p = sub.add_parser("perturb", help="Monte-Carlo perturbation sweep of R_7")
    p.add_argument("--target", choices=["states", "unitary"], default="states")
    p.add_argument("--eps-grid", default="0:0.2:0.01", help="a:b:step, inclusive")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=NOISE_MODELS, default="circular")
    _common(p)

    p = sub.add_parser("search", help="random search for bunching counterexamples")
    p.add_argument("--n", type=int, default=7)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subset-size", type=int, default=None, help="|K| (default: rank)")
    p.add_argument("--plant-drury", action="store_true", help="inject Drury's instance as a self-test")
    p.add_argument("--plant-index", type=int, default=0)
    _common(p, formats=False)

    p = sub.add_parser("ternary", help="ratio over the star / identical / distinguishable simplex")
    p.add_argument("--grid-step", type=float, default=0.05)
    _common(p)

    p = sub.add_parser("stability", help="first-order response around S = E")
    p.add_argument("--n", type=int, default=7)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _common(p)

    p = sub.add_parser("replay", help="re-run a manifest and verify its output checksums")
    p.add_argument("manifest")
    return parser


# ---------------------------------------------------------------- running


def sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write(path: str | None, content: str):
    if path is None:
        sys.stdout.write(content)
        return
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(content)


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "replay":
        return replay(args.manifest)

    try:
        res = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except ValueError as exc:
        parser.error(str(exc))

    fmt_ = getattr(args, "format", "json" if args.command == "search" else "csv")
    if args.command == "search":
        content = res.text
    elif fmt_ == "json":
        content = render_json(res, args.command)
    else:
        content = render_csv(res)

    if args.out is not None:
        _write(args.out, content)
    elif not args.json:
        _write(None, res.text if args.command == "drury-check" else content)
    if args.json:
        status = "PASS" if res.ok else "FAIL"
        sys.stdout.write(json.dumps(_jsonable({"command": args.command, "status": status, **res.report}), sort_keys=True) + "\n")

    if args.manifest:
        params = {k: v for k, v in vars(args).items() if k not in ("command", "manifest", "verbose", "json")}
        outputs = [args.out] if args.out else []
        manifest = {
            "command": args.command,
            "argv": list(argv),
            "parameters": params,
            "seed": getattr(args, "seed", None),
            "version": __version__,
            "outputs": outputs,
            "checksums": {p: sha256(p) for p in outputs},
        }
        _write(args.manifest, json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")

    if not res.ok:
        log.error("%s: check FAILED", args.command)
        return 1
    return 0


def replay(manifest_path: str) -> int:
    """Re-run the recorded command into a scratch directory and compare output checksums."""
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    argv = list(manifest["argv"])
    outputs = manifest.get("outputs", [])
    if not outputs:
        log.error("manifest records no output files to verify")
        return 1
    # drop --manifest and redirect --out
    clean, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--manifest", "--out"):
            skip = True
            continue
        if tok.startswith(("--manifest=", "--out=")):
            continue
        clean.append(tok)
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "replay.out")
        code = run(clean + ["--out", out])
        digest = sha256(out)
    expected = manifest["checksums"][outputs[0]]
    if digest != expected:
        print(f"MISMATCH {outputs[0]}: {digest} != {expected}")
        return 1
    print(f"OK {outputs[0]} {digest}")
    return 0 if code in (0, 1) else code


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
