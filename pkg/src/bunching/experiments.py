"""Drivers that reproduce the bunching-violation experiments.

Every driver returns plain :class:`ExperimentRecord` lists (or a small summary
dataclass) and performs no I/O.  Monte-Carlo drivers derive one independent RNG
stream per sample from ``(seed, sample index)``, so results do not depend on
how samples are split across worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os
from typing import Callable, Sequence

import numpy as np

from .circuits import (
    drury_matrices,
    embed_factor_into_unitary,
    family_circuit,
    haar_random_unitary,
    random_rank_r_gram,
)
from .interference import (
    BunchingInstance,
    bunching_probability,
    h_matrix,
    stability_direction_check,
    two_mode_event_probabilities,
)
from .permanent import permanent
from .states import (
    family_gram,
    gaussian_noise,
    gram_from_states,
    interpolated_gram,
    perturb_states,
    violation_family_states,
)

THREADS_ENV = "BUNCHING_THREADS"
RATIO_N_MAX = 30
DISTRIBUTION_N_MAX = 9
SEARCH_N_MAX = 10
STABILITY_TOL = 1e-7
VIOLATION_TOL = 1e-9


class CheckFailed(RuntimeError):
    """A reproduction check that the driver asserts did not hold."""


@dataclass
class ExperimentRecord:
    experiment: str
    params: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.values.items():
            if v is None:
                continue
            if not math.isfinite(v):
                raise ValueError(f"{self.experiment}: value {k}={v} is not finite")
            if k.startswith("P_") and not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"{self.experiment}: probability {k}={v} outside [0, 1]")

    def row(self) -> dict:
        return {**self.params, **self.values}


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for sample ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _map_samples(fn: Callable[[int], object], count: int, threads: int | None) -> list:
    """``[fn(i) for i in range(count)]``, fanned out over threads, results in index order."""
    threads = threads or default_threads()
    if threads <= 1 or count < 2:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count), chunksize=max(1, count // (8 * threads))))


def ratio_lower_bound(n: int) -> float:
    """``n/8 + (n-2)^2 / (32 (n-1))``."""
    if n < 4:
        raise ValueError("the bound holds for n >= 4")
    return n / 8 + (n - 2) ** 2 / (32 * (n - 1))


@dataclass(frozen=True)
class RatioBound:
    n: int

    @property
    def bound(self) -> float:
        return ratio_lower_bound(self.n)


def closed_form_bos_probability(n: int, eta: float) -> float:
    """Two-mode bunching probability of the family for identical photons, ``2 (q+1)! / q^q eta^2 (1-eta)^q``."""
    if n < 4:
        raise ValueError("n must be >= 4")
    q = n - 2
    return 2 * math.factorial(q + 1) / q**q * eta**2 * (1 - eta) ** q


def pd_lower_bound_probability(n: int, eta: float) -> float:
    """Lower bound on the star-pattern bunching probability from the two leading output terms."""
    if n < 4:
        raise ValueError("n must be >= 4")
    q = n - 2
    return eta**2 * (1 - eta) ** q / (4 * q**q) * (math.factorial(q + 2) + q**2 * math.factorial(q) / 4)


def violation_ratio(n: int, eta: float | None = None) -> tuple[float, float, float]:
    """``(R, P_star, P_bos)`` for the n-mode family circuit."""
    fc = family_circuit(n, eta)
    inst = BunchingInstance.from_states(fc.U, fc.subset, violation_family_states(n))
    p_star = bunching_probability(inst)
    p_bos = bunching_probability(inst.with_gram(np.ones((n, n))))
    return p_star / p_bos, p_star, p_bos


def ratio_scan(n_min: int, n_max: int, eta: float | None = None, check: bool = True) -> list[ExperimentRecord]:
    if not 4 <= n_min <= n_max <= RATIO_N_MAX:
        raise ValueError(f"need 4 <= n_min <= n_max <= {RATIO_N_MAX}, got {n_min}..{n_max}")
    records = []
    for n in range(n_min, n_max + 1):
        R, p_star, p_bos = violation_ratio(n, eta)
        records.append(
            ExperimentRecord(
                "ratio",
                {"n": n},
                {"P_bos": p_bos, "P_star": p_star, "R": R, "bound": ratio_lower_bound(n)},
            )
        )
    if check:
        bad = [r.params["n"] for r in records if r.values["R"] < r.values["bound"]]
        if bad:
            raise CheckFailed(f"R_n below the lower bound for n in {bad}")
    return records


def distribution_experiment(n: int, which: str) -> list[ExperimentRecord]:
    """Photon-number distribution in mode 0' conditioned on two-mode bunching."""
    if n > DISTRIBUTION_N_MAX:
        raise ValueError(f"distribution experiment is limited to n <= {DISTRIBUTION_N_MAX}")
    grams = {
        "star": lambda: family_gram(n),
        "bos": lambda: np.ones((n, n), dtype=complex),
        "dist": lambda: np.eye(n, dtype=complex),
    }
    if which not in grams:
        raise ValueError(f"input must be one of {sorted(grams)}, got {which!r}")
    fc = family_circuit(n)
    inst = BunchingInstance(fc.U, fc.subset, grams[which]())
    p_bunch = bunching_probability(inst)
    if p_bunch <= 1e-12:
        raise CheckFailed(f"bunching probability {p_bunch:.3e} too small to condition on")
    return [
        ExperimentRecord(
            "distribution",
            {"n": n, "input": which, "j": j},
            {"conditional_p": p / p_bunch, "P_abs": p, "P_bunch": p_bunch},
        )
        for j, p in two_mode_event_probabilities(inst)
    ]


def _gram_orthonormalize_columns(U: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(U)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def perturbation_sweep(
    target: str,
    epsilons: Sequence[float],
    samples: int,
    seed: int,
    n: int = 7,
    noise: str = "circular",
    threads: int | None = None,
) -> list[ExperimentRecord]:
    """Mean and spread of R_n under random perturbations of the states or of U.

    ``target="states"`` perturbs every internal-state component and
    renormalises; ``target="unitary"`` adds the same kind of noise to the
    columns of U and Gram-orthonormalises them in order.  ``noise`` selects the
    model, see :func:`bunching.states.gaussian_noise`.  Sample ``i`` uses the
    same stream at every epsilon.
    """
    if target not in ("states", "unitary"):
        raise ValueError(f"target must be 'states' or 'unitary', got {target!r}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    fc = family_circuit(n)
    states = violation_family_states(n)
    S_star = gram_from_states(states)
    E = np.ones((n, n), dtype=complex)
    K = list(fc.subset)

    def bunch(U, S):
        rows = U[K, :n]
        return permanent((rows.T @ rows.conj()) * S.T).real

    p_bos0 = bunch(fc.U, E)

    records = []
    for eps in epsilons:
        eps = float(eps)

        def one(i, eps=eps):
            rng = sample_rng(seed, i)
            if target == "states":
                S = gram_from_states(perturb_states(states, eps, rng, noise))
                return bunch(fc.U, S) / p_bos0
            U = _gram_orthonormalize_columns(fc.U + gaussian_noise(rng, fc.U.shape, eps, noise))
            return bunch(U, S_star) / bunch(U, E)

        ratios = np.array(_map_samples(one, samples, threads))
        records.append(
            ExperimentRecord(
                "perturb",
                {"target": target, "epsilon": eps, "samples": samples, "seed": seed, "noise": noise},
                {
                    "mean_R": float(np.mean(ratios)),
                    "std_R": float(np.std(ratios)),
                    "frac_violating": float(np.mean(ratios > 1.0)),
                },
            )
        )
    return records


@dataclass
class SearchSummary:
    n: int
    rank: int
    samples: int
    seed: int
    violations: int
    violating_indices: list[int]
    max_ratio: float | None
    max_ratio_index: int | None
    planted_index: int | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def counterexample_search(
    n: int = 7,
    r: int = 2,
    samples: int = 100_000,
    seed: int = 0,
    subset_size: int | None = None,
    plant_drury: bool = False,
    plant_index: int = 0,
    threads: int | None = None,
) -> SearchSummary:
    """Look for ``perm(H * S^T) > perm(H)`` with Haar-random U and random rank-r S.

    H is built from the first ``subset_size`` (default ``r``) output modes of
    an n x n Haar unitary.  With ``plant_drury`` the sample at ``plant_index``
    is replaced by Drury's instance, which the search must flag.
    """
    if n > SEARCH_N_MAX:
        raise ValueError(f"search is limited to n <= {SEARCH_N_MAX}")
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    k = subset_size if subset_size is not None else r
    if not 1 <= k <= n:
        raise ValueError("need 1 <= subset_size <= n")
    planted = None
    if plant_drury:
        if n != 7:
            raise ValueError("the Drury instance is 7-dimensional")
        if not 0 <= plant_index < samples:
            raise ValueError("plant_index must index one of the samples")
        A, M = drury_matrices()
        U_d, K_d, _ = embed_factor_into_unitary(M)
        rows = U_d[list(K_d), :n]
        planted = (rows.T @ rows.conj(), A)

    def one(i):
        if planted is not None and i == plant_index:
            H, S = planted
        else:
            rng = sample_rng(seed, i)
            U = haar_random_unitary(n, rng)
            rows = U[:k, :n]
            H = rows.T @ rows.conj()
            S = random_rank_r_gram(n, r, rng)
        return permanent(H * S.T).real / permanent(H).real

    ratios = np.array(_map_samples(one, samples, threads), dtype=float)
    hits = np.flatnonzero(ratios > 1.0 + VIOLATION_TOL)
    return SearchSummary(
        n=n,
        rank=r,
        samples=samples,
        seed=seed,
        violations=int(hits.size),
        violating_indices=hits.tolist(),
        max_ratio=float(ratios.max()) if samples else None,
        max_ratio_index=int(ratios.argmax()) if samples else None,
        planted_index=plant_index if plant_drury else None,
    )


def simplex_grid(step: float) -> list[tuple[float, float]]:
    if not 0 < step <= 0.5:
        raise ValueError("grid step must lie in (0, 0.5]")
    count = int(math.floor(1.0 / step + 1e-9))
    pts = []
    for i in range(count + 1):
        for j in range(count + 1 - i):
            x, y = round(i * step, 12), round(j * step, 12)
            if x + y <= 1 + 1e-12:
                pts.append((x, y))
    return pts


def ternary_scan(grid_step: float, n: int = 7, check: bool = True) -> list[ExperimentRecord]:
    """Ratio ``P(S(x, y)) / P(E)`` over the simplex of star / identical / distinguishable mixtures."""
    fc = family_circuit(n)
    base = BunchingInstance(fc.U, fc.subset, np.ones((n, n)))
    p_bos = bunching_probability(base)
    records = []
    for x, y in simplex_grid(grid_step):
        ratio = bunching_probability(base.with_gram(interpolated_gram(x, y, n))) / p_bos
        records.append(
            ExperimentRecord("ternary", {"x": x, "y": y}, {"ratio": ratio, "log10_ratio": math.log10(ratio)})
        )
    if not check:
        return records
    at = {(r.params["x"], r.params["y"]): r.values["ratio"] for r in records}
    if not at[(0.0, 0.0)] > 1.0:
        raise CheckFailed("no violation at the star point")
    if (1.0, 0.0) in at and abs(at[(1.0, 0.0)] - 1.0) > 1e-12:
        raise CheckFailed("ratio at S = E differs from 1")
    return records


def stability_trials(n: int = 7, trials: int = 100, seed: int = 0, check: bool = True) -> list[ExperimentRecord]:
    """First-order response of the family's bunching probability to phase-like perturbations around S = E."""
    fc = family_circuit(n)
    H = h_matrix(BunchingInstance(fc.U, fc.subset, np.ones((n, n))))
    p = permanent(H).real
    records = []
    for t in range(trials):
        x = sample_rng(seed, t).normal(size=n)
        d = stability_direction_check(H, x)
        records.append(
            ExperimentRecord("stability", {"trial": t}, {"derivative": d, "derivative_norm": abs(d) / p})
        )
    worst = max((r.values["derivative_norm"] for r in records), default=0.0)
    if check and worst > STABILITY_TOL:
        raise CheckFailed(f"first-order response {worst:.3e} exceeds {STABILITY_TOL}")
    return records
