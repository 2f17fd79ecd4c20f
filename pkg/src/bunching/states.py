"""Internal photon states and their Gram (distinguishability) matrices.

Conventions used throughout the package:

* An :class:`InternalStateSet` stores the n internal wavefunctions as the rows
  of an ``(n, r)`` array.  Its :attr:`~InternalStateSet.factor` is the
  ``(r, n)`` matrix whose *columns* are the states, so ``S = factor^H factor``.
* ``S[i, j] = <phi_i|phi_j>``, conjugate-linear in the first argument.
* Photon ``i`` enters input mode ``i``.  For the violation family the input
  modes are ordered ``[0, ..., q-1, 0', 1']``.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .permanent import as_square, permanent

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
RANK_TOL = 1e-9

H_POL = np.array([1.0, 0.0], dtype=np.complex128)
V_POL = np.array([0.0, 1.0], dtype=np.complex128)


@dataclass(frozen=True)
class InternalStateSet:
    """n unit-norm internal wavefunctions of dimension r, one per row."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=np.complex128, copy=True)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"expected an (n, r) array with n, r >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("state vectors have non-finite entries")
        norms = np.linalg.norm(v, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
        if bad.size:
            raise ValueError(f"states {bad.tolist()} are not normalised (norms {norms[bad]})")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def r(self) -> int:
        return self.vectors.shape[1]

    @property
    def factor(self) -> np.ndarray:
        """``(r, n)`` matrix with the states as columns."""
        return self.vectors.T.copy()

    @classmethod
    def from_factor(cls, factor) -> "InternalStateSet":
        return cls(np.asarray(factor, dtype=np.complex128).T)

    def __len__(self):
        return self.n


def validate_gram(S, *, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Check the Gram-matrix invariants and return ``S`` as a complex array.

    Raises ``ValueError`` if ``S`` is not Hermitian, lacks a unit diagonal, or
    has an eigenvalue below ``-psd_tol``.
    """
    S = as_square(S)
    if S.shape[0] < 1:
        raise ValueError("Gram matrix must be at least 1x1")
    if np.max(np.abs(S - S.conj().T)) > HERMITIAN_TOL:
        raise ValueError("Gram matrix is not Hermitian")
    if np.max(np.abs(np.diag(S) - 1.0)) > HERMITIAN_TOL:
        raise ValueError("Gram matrix does not have a unit diagonal")
    lam_min = np.linalg.eigvalsh(0.5 * (S + S.conj().T))[0]
    if lam_min < -psd_tol:
        raise ValueError(f"Gram matrix is not PSD (min eigenvalue {lam_min:.3e})")
    return S


def gram_from_states(states: InternalStateSet) -> np.ndarray:
    """``S[i, j] = <phi_i|phi_j>``."""
    v = states.vectors
    return v.conj() @ v.T


def states_from_gram(S) -> InternalStateSet:
    """Recover internal states realising ``S``, in a space of the numerical rank of ``S``.

    Uses a Hermitian eigendecomposition; slightly negative eigenvalues from
    round-off are clipped to zero.
    """
    S = validate_gram(S)
    lam, vecs = np.linalg.eigh(0.5 * (S + S.conj().T))
    keep = lam > RANK_TOL * max(1.0, lam[-1])
    lam = np.clip(lam[keep], 0.0, None)
    vecs = vecs[:, keep]
    # S = V diag(lam) V^H = F^H F with F = diag(sqrt(lam)) V^H
    factor = np.sqrt(lam)[:, None] * vecs.conj().T
    # absorb round-off in the norms; rank truncation keeps them within ~RANK_TOL of 1
    factor = factor / np.linalg.norm(factor, axis=0, keepdims=True)
    return InternalStateSet.from_factor(factor)


def numerical_rank(S, tol: float = RANK_TOL) -> int:
    lam = np.linalg.eigvalsh(as_square(S))
    return int(np.sum(lam > tol * max(1.0, abs(lam[-1]))))


def star_states(q: int) -> InternalStateSet:
    """q polarisations ``(|H> + w^j |V>)/sqrt(2)``, ``w = exp(2 pi i / q)``, equally spaced on the equator."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    phases = np.exp(2j * np.pi * np.arange(q) / q)
    v = np.column_stack([np.ones(q, dtype=np.complex128), phases]) / math.sqrt(2)
    return InternalStateSet(v)


def violation_family_states(n: int) -> InternalStateSet:
    """q-star pattern on the DFT inputs followed by V (mode 0') and H (mode 1')."""
    if n < 4:
        raise ValueError(f"the violation family needs n >= 4, got {n}")
    star = star_states(n - 2).vectors
    return InternalStateSet(np.vstack([star, V_POL, H_POL]))


def family_gram(n: int) -> np.ndarray:
    return gram_from_states(violation_family_states(n))


def interpolated_gram(x: float, y: float, n: int = 7) -> np.ndarray:
    """``(1-x-y) S_star + x E + y I`` on the simplex ``x, y >= 0, x + y <= 1``."""
    eps = 1e-12
    if x < -eps or y < -eps or x + y > 1 + eps:
        raise ValueError(f"(x, y) = ({x}, {y}) is outside the simplex")
    return (1 - x - y) * family_gram(n) + x * np.ones((n, n)) + y * np.eye(n)


NOISE_MODELS = ("circular", "per-part", "real")


def gaussian_noise(rng: np.random.Generator, shape, epsilon: float, noise: str = "circular") -> np.ndarray:
    """Zero-mean Gaussian noise of scale ``epsilon`` for complex amplitudes.

    ``circular``: circularly symmetric, ``E|z|^2 = epsilon^2``.
    ``per-part``: real and imaginary parts each with std ``epsilon``.
    ``real``: real-valued with std ``epsilon``.
    """
    if noise == "real":
        return rng.normal(0.0, epsilon, size=shape).astype(np.complex128)
    if noise == "per-part":
        scale = epsilon
    elif noise == "circular":
        scale = epsilon / math.sqrt(2)
    else:
        raise ValueError(f"noise must be one of {NOISE_MODELS}, got {noise!r}")
    return rng.normal(0.0, scale, size=shape) + 1j * rng.normal(0.0, scale, size=shape)


def perturb_states(
    states: InternalStateSet, epsilon: float, rng: np.random.Generator, noise: str = "circular"
) -> InternalStateSet:
    """Add Gaussian noise of scale ``epsilon`` to every component, then renormalise each state."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    w = states.vectors + gaussian_noise(rng, states.vectors.shape, epsilon, noise)
    return InternalStateSet(w / np.linalg.norm(w, axis=1, keepdims=True))


def symmetric_component(S) -> float:
    """Weight of the fully symmetric part of the product state, ``perm(S) / n!``."""
    S = validate_gram(S)
    p = permanent(S)
    if abs(p.imag) > 1e-8 * max(1.0, abs(p.real)):
        raise ArithmeticError(f"perm(S) has an imaginary residue {p.imag:.3e}")
    return p.real / math.factorial(S.shape[0])
