"""Bunching and event probabilities for partially distinguishable photons.

With ``U[out, in]`` and ``S[i, j] = <phi_i|phi_j>``, the probability of the
output pattern with mode-assignment list ``d`` is

    P(d) = 1/mu(s) * sum_{sigma, rho} prod_j U[d_j, sigma_j] conj(U[d_j, rho_j]) S[rho_j, sigma_j]

and the probability that every photon lands in the subset K is
``perm(H * S.T)`` with ``H[a, b] = sum_{l in K} U[l, a] conj(U[l, b])``.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools
import math
from typing import Iterator, Sequence

import numba
import numpy as np

from .circuits import check_unitary
from .permanent import _ryser_serial, as_square, determinant, minor, permanent
from .states import InternalStateSet, gram_from_states, validate_gram

IMAG_WARN_TOL = 1e-10
IMAG_ERROR_TOL = 1e-8


class NumericalConsistencyError(ArithmeticError):
    """A quantity that must be real came out with a sizeable imaginary part."""


class UndefinedConditionalError(ZeroDivisionError):
    pass


def _real(value: complex, what: str, scale: float = 1.0) -> float:
    if abs(value.imag) > IMAG_ERROR_TOL * max(scale, abs(value.real)):
        raise NumericalConsistencyError(f"{what} has imaginary residue {value.imag:.3e}")
    return float(value.real)


@dataclass(frozen=True)
class BunchingInstance:
    """Interferometer U, output subset K and distinguishability matrix S.

    Photon i enters input mode i, so ``S`` being n x n fixes the occupied
    inputs to ``0..n-1``.
    """

    U: np.ndarray
    subset: tuple[int, ...]
    S: np.ndarray

    def __post_init__(self):
        U = check_unitary(self.U)
        S = validate_gram(self.S)
        m, n = U.shape[0], S.shape[0]
        if n > m:
            raise ValueError(f"{n} photons do not fit in {m} modes")
        subset = tuple(int(k) for k in self.subset)
        if not subset or list(subset) != sorted(set(subset)) or subset[0] < 0 or subset[-1] >= m:
            raise ValueError(f"invalid output subset {self.subset} for m={m}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "subset", subset)

    @classmethod
    def from_states(cls, U, subset, states: InternalStateSet) -> "BunchingInstance":
        return cls(U, tuple(subset), gram_from_states(states))

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    def with_gram(self, S) -> "BunchingInstance":
        return BunchingInstance(self.U, self.subset, S)


@dataclass(frozen=True)
class OutcomeSpec:
    """Output occupation vector ``s``; ``d`` lists the output mode of each photon in order."""

    s: tuple[int, ...]

    def __post_init__(self):
        s = tuple(int(x) for x in self.s)
        if any(x < 0 for x in s):
            raise ValueError(f"negative occupation in {s}")
        object.__setattr__(self, "s", s)

    @classmethod
    def from_assignment(cls, d: Sequence[int], m: int) -> "OutcomeSpec":
        s = [0] * m
        for k in d:
            s[k] += 1
        return cls(tuple(s))

    @property
    def n(self) -> int:
        return sum(self.s)

    @property
    def d(self) -> tuple[int, ...]:
        return tuple(j for j, c in enumerate(self.s) for _ in range(c))

    @property
    def mu(self) -> int:
        return math.prod(math.factorial(c) for c in self.s)


def all_outcomes(n: int, m: int) -> Iterator[OutcomeSpec]:
    """Every occupation pattern of n photons in m modes."""
    for d in itertools.combinations_with_replacement(range(m), n):
        yield OutcomeSpec.from_assignment(d, m)


def h_matrix(inst: BunchingInstance) -> np.ndarray:
    rows = inst.U[list(inst.subset), : inst.n]
    return rows.T @ rows.conj()


def bunching_probability(inst: BunchingInstance) -> float:
    """Probability that all photons exit in ``inst.subset``: ``perm(H * S^T)``."""
    p = permanent(h_matrix(inst) * inst.S.T)
    return _real(p, "bunching probability")


def single_mode_bunching(inst: BunchingInstance) -> float:
    """Factored form for a one-mode subset: ``prod_j |U[k, j]|^2 * perm(S)``."""
    if len(inst.subset) != 1:
        raise ValueError("single_mode_bunching needs |K| = 1")
    k = inst.subset[0]
    weight = float(np.prod(np.abs(inst.U[k, : inst.n]) ** 2))
    return weight * _real(permanent(inst.S), "perm(S)")


def fermionic_bunching_probability(inst: BunchingInstance) -> float:
    """Fermionic counterpart, ``det(H * S^T)``."""
    p = determinant(h_matrix(inst) * inst.S.T)
    return _real(p, "fermionic bunching probability")


def _check_outcome(inst_n: int, m: int, outcome: OutcomeSpec):
    if len(outcome.s) != m:
        raise ValueError(f"outcome has {len(outcome.s)} modes, interferometer has {m}")
    if outcome.n != inst_n:
        raise ValueError(f"outcome holds {outcome.n} photons, instance has {inst_n}")


def distinct_assignments(s: Sequence[int]) -> np.ndarray:
    """All maps photon -> output mode with occupation ``s``, as rows of an int array."""
    n = sum(s)
    out = []
    counts = list(s)
    cur = [0] * n

    def rec(i):
        if i == n:
            out.append(tuple(cur))
            return
        for k, c in enumerate(counts):
            if c:
                counts[k] -= 1
                cur[i] = k
                rec(i + 1)
                counts[k] += 1

    rec(0)
    return np.array(out, dtype=np.int64).reshape(len(out), n)


@numba.njit(cache=True)
def _event_sum(U, S, assignments):
    n = S.shape[0]
    W = np.empty((n, n), dtype=np.complex128)
    total = 0.0 + 0.0j
    for a in range(assignments.shape[0]):
        c = 1.0 + 0.0j
        for i in range(n):
            e = assignments[a, i]
            c *= np.conj(U[e, i])
            for k in range(n):
                W[i, k] = U[e, k] * S[i, k]
        total += c * _ryser_serial(W)
    return total


def event_probability(inst: BunchingInstance, outcome: OutcomeSpec) -> float:
    """Probability of the output occupation ``outcome.s``.

    Permuting photons that share an output mode leaves a term of the double
    permutation sum unchanged, so the sum reduces to one permanent per distinct
    photon-to-mode assignment and the 1/mu(s) prefactor cancels.
    """
    _check_outcome(inst.n, inst.m, outcome)
    if inst.n == 0:
        return 1.0
    assignments = distinct_assignments(outcome.s)
    p = _event_sum(inst.U, inst.S, assignments)
    return _real(complex(p), "event probability")


def event_probability_double_sum(inst: BunchingInstance, outcome: OutcomeSpec) -> float:
    """Literal double sum over sigma, rho in S_n; a test oracle for n <= 5."""
    _check_outcome(inst.n, inst.m, outcome)
    n = inst.n
    if n > 5:
        raise ValueError("the double-sum oracle is limited to n <= 5")
    U, S, d = inst.U, inst.S, outcome.d
    total = 0j
    perms = list(itertools.permutations(range(n)))
    for sigma in perms:
        for rho in perms:
            term = 1 + 0j
            for j in range(n):
                term *= U[d[j], sigma[j]] * np.conj(U[d[j], rho[j]]) * S[rho[j], sigma[j]]
            total += term
    return _real(total / outcome.mu, "event probability")


def conditional_bunched_distribution(inst: BunchingInstance) -> list[tuple[int, float]]:
    """Distribution of the photon number j in the first subset mode, given all n photons are in K.

    Only for two-mode subsets.  Entries are ``(j, P(j, n - j) / P_bunch)``.
    """
    if len(inst.subset) != 2:
        raise ValueError("conditional distribution needs |K| = 2")
    if inst.n > 9:
        raise ValueError("conditional distribution is limited to n <= 9")
    p_bunch = bunching_probability(inst)
    if p_bunch <= 1e-12:
        raise UndefinedConditionalError(f"bunching probability {p_bunch:.3e} is too small to condition on")
    return [(j, p / p_bunch) for j, p in two_mode_event_probabilities(inst)]


def two_mode_event_probabilities(inst: BunchingInstance) -> list[tuple[int, float]]:
    k0, k1 = inst.subset
    out = []
    for j in range(inst.n + 1):
        s = [0] * inst.m
        s[k0] = j
        s[k1] = inst.n - j
        out.append((j, event_probability(inst, OutcomeSpec(tuple(s)))))
    return out


def fock_oracle_amplitudes(U, states: InternalStateSet) -> dict[tuple[int, ...], complex]:
    """Expand prod_i (sum_k U[k, i] a^dagger_{k, phi_i}) |0> in the (mode, internal basis) Fock basis.

    Keys are sorted tuples of flattened single-particle indices ``k * r + c``;
    values are coefficients of the unnormalised monomials.
    """
    U = np.asarray(U, dtype=np.complex128)
    n, r = states.n, states.r
    m = U.shape[0]
    if n > 5 or m > 7:
        raise ValueError("the Fock oracle is limited to n <= 5 photons and m <= 7 modes")
    poly: dict[tuple[int, ...], complex] = {(): 1 + 0j}
    for i in range(n):
        coeffs = np.outer(U[:, i], states.vectors[i]).ravel()
        nz = np.flatnonzero(coeffs)
        nxt: dict[tuple[int, ...], complex] = {}
        for key, amp in poly.items():
            for x in nz:
                new = tuple(sorted(key + (int(x),)))
                nxt[new] = nxt.get(new, 0j) + amp * coeffs[x]
        poly = nxt
    return poly


def fock_oracle_distribution(U, states: InternalStateSet) -> dict[tuple[int, ...], float]:
    """Probability of every spatial occupation pattern, summed over internal configurations."""
    m = np.asarray(U).shape[0]
    r = states.r
    probs: dict[tuple[int, ...], float] = {}
    for key, amp in fock_oracle_amplitudes(U, states).items():
        occ: dict[int, int] = {}
        for x in key:
            occ[x] = occ.get(x, 0) + 1
        # <0| a^n (a^dag)^n |0> = n! for each single-particle mode
        weight = math.prod(math.factorial(c) for c in occ.values())
        s = [0] * m
        for x in key:
            s[x // r] += 1
        s = tuple(s)
        probs[s] = probs.get(s, 0.0) + abs(amp) ** 2 * weight
    return probs


def fock_oracle_event_probability(U, states: InternalStateSet, outcome: OutcomeSpec) -> float:
    _check_outcome(states.n, np.asarray(U).shape[0], outcome)
    return fock_oracle_distribution(U, states).get(outcome.s, 0.0)


def first_order_perturbation_predictor(A, Delta, delta: float) -> complex:
    """``perm(A) + delta * sum_ij Delta[i, j] perm(A(i, j))``, the linear term of perm(A + delta Delta)."""
    A = as_square(A)
    Delta = as_square(Delta)
    if A.shape != Delta.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {Delta.shape}")
    n = A.shape[0]
    linear = 0j
    for i in range(n):
        for j in range(n):
            if Delta[i, j] != 0:
                linear += Delta[i, j] * permanent(minor(A, i, j))
    return permanent(A) + delta * linear


def phase_direction(x_vec) -> np.ndarray:
    """Tangent ``dS[i, j] = -i (x_i - x_j)`` of unit-norm perturbations around S = E."""
    x = np.asarray(x_vec, dtype=float)
    return -1j * (x[:, None] - x[None, :])


def stability_direction_check(A, x_vec, steps: tuple[float, float] = (1e-4, 1e-5)) -> float:
    """d/d(delta) of ``perm(A * (E + delta dS)^T)`` at delta = 0, by central differences.

    The two step sizes are combined by Richardson extrapolation to cancel the
    O(h^2) truncation term.
    """
    A = as_square(A)
    x = np.asarray(x_vec, dtype=float)
    if x.shape != (A.shape[0],):
        raise ValueError(f"x_vec must have length {A.shape[0]}")
    if x.size == 0 or np.all(x == x[0]):
        # constant x gives dS = 0
        return 0.0
    E = np.ones_like(A)
    dS = phase_direction(x)

    def f(delta):
        return permanent(A * (E + delta * dS).T)

    def central(h):
        return (f(h) - f(-h)) / (2 * h)

    h1, h2 = steps
    d1, d2 = central(h1), central(h2)
    ratio = (h1 / h2) ** 2
    d = (ratio * d2 - d1) / (ratio - 1)
    return _real(d, "derivative", scale=abs(f(0.0)))
