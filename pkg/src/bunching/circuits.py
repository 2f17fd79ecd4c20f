"""Interferometer constructors.

Matrix convention: ``U[out, in]``, i.e. a photon entering input mode ``j`` is
mapped to ``sum_k U[k, j] a_k^dagger``.  Composition therefore reads right to
left along the optical path: "DFT first, then beam splitters" is
``U_bs @ U_dft``.

Mode labels for the violation family: DFT modes ``0..q-1`` are indices
``0..q-1``, ancilla ``0'`` is index ``q`` and ``1'`` is index ``q + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .states import InternalStateSet, gram_from_states

UNITARY_TOL = 1e-9


def check_unitary(U, tol: float = UNITARY_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=np.complex128)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"interferometer must be square, got shape {U.shape}")
    err = np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]))
    if err > tol:
        raise ValueError(f"matrix is not unitary (Frobenius defect {err:.3e})")
    return U


@dataclass(frozen=True)
class BeamSplitter:
    mode_a: int
    mode_b: int
    eta: float

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise ValueError("beam splitter needs two distinct modes")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmittance must lie in [0, 1], got {self.eta}")


def dft_unitary(q: int) -> np.ndarray:
    """``U[j, k] = w^(jk) / sqrt(q)`` with ``w = exp(2 pi i / q)``."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    jk = np.outer(np.arange(q), np.arange(q)) % q
    return np.exp(2j * np.pi * jk / q) / math.sqrt(q)


def beam_splitter_unitary(m: int, bs: BeamSplitter) -> np.ndarray:
    """Identity on ``m`` modes except ``[[t, r], [-r, t]]`` on ``(mode_a, mode_b)``, ``t = sqrt(eta)``."""
    a, b = bs.mode_a, bs.mode_b
    if not (0 <= a < m and 0 <= b < m):
        raise ValueError(f"beam splitter modes ({a}, {b}) out of range for m={m}")
    t = math.sqrt(bs.eta)
    r = math.sqrt(1.0 - bs.eta)
    U = np.eye(m, dtype=np.complex128)
    U[a, a] = t
    U[a, b] = r
    U[b, a] = -r
    U[b, b] = t
    return U


@dataclass(frozen=True)
class FamilyCircuit:
    """q-mode DFT followed by beam splitters (0, 0') and (1, 1') of transmittance eta."""

    n: int
    eta: float
    U: np.ndarray = field(repr=False)

    @property
    def q(self) -> int:
        return self.n - 2

    @property
    def subset(self) -> tuple[int, int]:
        return (self.q, self.q + 1)


def family_circuit(n: int, eta: float | None = None) -> FamilyCircuit:
    if n < 4:
        raise ValueError(f"the violation family needs n >= 4, got {n}")
    if eta is None:
        eta = 2.0 / n
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    q = n - 2
    dft = np.eye(n, dtype=np.complex128)
    dft[:q, :q] = dft_unitary(q)
    bs0 = beam_splitter_unitary(n, BeamSplitter(0, q, eta))
    bs1 = beam_splitter_unitary(n, BeamSplitter(1, q + 1, eta))
    U = bs0 @ bs1 @ dft
    return FamilyCircuit(n=n, eta=eta, U=check_unitary(U))


def drury_factor() -> np.ndarray:
    """The 2x7 factor M of Drury's counterexample, with the states as its columns."""
    w = np.exp(2j * np.pi / 5)
    s2 = math.sqrt(2.0)
    M = np.array(
        [
            [s2, 0, 1, 1, 1, 1, 1],
            [0, s2, 1, w, w**2, w**3, w**4],
        ],
        dtype=np.complex128,
    )
    return M / s2


def drury_matrices() -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A, M)`` with ``A = M^H M`` the 7x7 unit-diagonal PSD counterexample."""
    M = drury_factor()
    A = M.conj().T @ M
    return A, M


def _complete_rows(X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Extend a matrix with orthonormal rows to a unitary with the same leading rows."""
    r, n = X.shape
    Y = X.conj().T
    for _ in range(8):
        Z = np.hstack([Y, rng.normal(size=(n, n - r)) + 1j * rng.normal(size=(n, n - r))])
        Q, R = np.linalg.qr(Z)
        d = np.diag(R)
        if np.min(np.abs(d)) > 1e-12:
            Q = Q * (d / np.abs(d))
            # re-orthogonalise once more against round-off in the random block
            Q[:, :r] = Y
            Q[:, r:], _ = np.linalg.qr(Q[:, r:] - Y @ (Y.conj().T @ Q[:, r:]))
            return Q.conj().T
    raise np.linalg.LinAlgError("could not complete rows to a unitary")


def embed_factor_into_unitary(M, rng: np.random.Generator | None = None):
    """Build ``(U, subset, alpha)`` such that the H matrix of rows ``subset`` is ``alpha * M^H M``.

    ``alpha = 1 / sigma_max(M)^2``.  If ``sqrt(alpha) M`` then has orthonormal
    rows (as for Drury's factor), ``U`` is n x n with those rows completed by
    Gram-Schmidt; otherwise the contraction is dilated into an (n + r)-mode
    unitary.  Photons still enter modes ``0..n-1``.
    """
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] > M.shape[1]:
        raise ValueError(f"expected an r x n factor with r <= n, got shape {M.shape}")
    if rng is None:
        rng = np.random.default_rng(0)
    r, n = M.shape
    sigma = np.linalg.svd(M, compute_uv=False)
    if sigma[-1] <= 1e-12 * sigma[0]:
        raise np.linalg.LinAlgError("factor is rank deficient")
    alpha = 1.0 / sigma[0] ** 2
    # The rows carry conj(M): with H[a, b] = sum_l U[l, a] conj(U[l, b]) this
    # gives H = alpha * M^H M.
    X = math.sqrt(alpha) * M.conj()
    subset = tuple(range(r))
    if np.allclose(X @ X.conj().T, np.eye(r), atol=1e-12):
        U = _complete_rows(X, rng)
    else:
        # unitary dilation [[X, (I - X X^H)^1/2], [(I - X^H X)^1/2, -X^H]]
        def psd_sqrt(P):
            lam, V = np.linalg.eigh(P)
            return (V * np.sqrt(np.clip(lam, 0, None))) @ V.conj().T

        top = np.hstack([X, psd_sqrt(np.eye(r) - X @ X.conj().T)])
        bottom = np.hstack([psd_sqrt(np.eye(n) - X.conj().T @ X), -X.conj().T])
        U = np.vstack([top, bottom])
    return check_unitary(U), subset, alpha


def haar_random_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR factorisation of a complex Ginibre matrix."""
    if m < 1:
        raise ValueError("m must be >= 1")
    Z = (rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_states(n: int, r: int, rng: np.random.Generator) -> InternalStateSet:
    """n vectors uniform on the complex unit sphere in dimension r."""
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    v = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    return InternalStateSet(v / np.linalg.norm(v, axis=1, keepdims=True))


def random_rank_r_gram(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    return gram_from_states(random_states(n, r, rng))
