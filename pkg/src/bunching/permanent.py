"""Exact permanent and determinant kernels for dense complex matrices.

The production kernel is Ryser's inclusion-exclusion formula walked in Gray-code
order, so each subset differs from the previous one by a single column and the
row sums are updated in O(n).  The outer alternating sum is accumulated with
Kahan compensation.  Glynn's formula is provided as an independent second
kernel, and :func:`permanent_naive` as the factorial-time reference.
"""

from __future__ import annotations

import itertools
import os

import numba
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    try:
        from numba.np.ufunc import omppool  # noqa: F401

        numba.config.THREADING_LAYER = "omp"
    except ImportError:
        pass

__all__ = [
    "permanent",
    "permanent_ryser",
    "permanent_glynn",
    "permanent_naive",
    "determinant",
    "minor",
    "hadamard_product",
    "as_square",
]

NAIVE_MAX_N = 10

# Above this size the subset range is split into fixed-size chunks that are
# evaluated in parallel.  The chunk size does not depend on the thread count,
# so results are bit-identical for any number of workers.
_PARALLEL_MIN_N = 20
_CHUNK_BITS = 14


def as_square(m) -> np.ndarray:
    """Return ``m`` as a contiguous complex128 square matrix or raise ``ValueError``."""
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


@numba.njit(cache=True)
def _trailing_zeros(k):
    j = 0
    while (k & 1) == 0:
        k >>= 1
        j += 1
    return j


@numba.njit(cache=True)
def _popcount(k):
    c = 0
    while k:
        k &= k - 1
        c += 1
    return c


@numba.njit(cache=True)
def _ryser_range(a, k_start, k_stop):
    """Signed Ryser terms for Gray-code indices ``k_start <= k < k_stop`` (k_start >= 1).

    Returns the Kahan-compensated partial sum of (-1)^|g| prod_i rowsum_i(g).
    """
    n = a.shape[0]
    g = k_start ^ (k_start >> 1)
    rowsums = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        if (g >> j) & 1:
            for i in range(n):
                rowsums[i] += a[i, j]
    sign = -1.0 if _popcount(g) & 1 else 1.0

    prod = 1.0 + 0.0j
    for i in range(n):
        prod *= rowsums[i]
    total = sign * prod
    comp = 0.0 + 0.0j

    for k in range(k_start + 1, k_stop):
        j = _trailing_zeros(k)
        g ^= 1 << j
        if (g >> j) & 1:
            for i in range(n):
                rowsums[i] += a[i, j]
        else:
            for i in range(n):
                rowsums[i] -= a[i, j]
        sign = -sign
        prod = 1.0 + 0.0j
        for i in range(n):
            prod *= rowsums[i]
        y = sign * prod - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


@numba.njit(cache=True)
def _ryser_serial(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    total = _ryser_range(a, 1, 1 << n)
    if n & 1:
        return -total
    return total


@numba.njit(cache=True, parallel=True)
def _ryser_chunked(a):
    n = a.shape[0]
    chunk = 1 << _CHUNK_BITS
    n_chunks = (1 << n) // chunk
    partial = np.zeros(n_chunks, dtype=np.complex128)
    for c in numba.prange(n_chunks):
        start = c * chunk
        if start == 0:
            start = 1
        partial[c] = _ryser_range(a, start, (c + 1) * chunk)
    total = 0.0 + 0.0j
    comp = 0.0 + 0.0j
    for c in range(n_chunks):
        y = partial[c] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    if n & 1:
        return -total
    return total


def permanent_ryser(m) -> complex:
    """Permanent via Gray-code Ryser, O(2^n n).

    The permanent of the 0x0 matrix is 1.
    """
    a = as_square(m)
    if a.shape[0] >= _PARALLEL_MIN_N:
        return complex(_ryser_chunked(a))
    return complex(_ryser_serial(a))


# the default kernel used everywhere else in the package
permanent = permanent_ryser


@numba.njit(cache=True)
def _glynn(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    # delta_0 is pinned to +1; the remaining n-1 signs walk a Gray code.
    colsums = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            colsums[j] += a[i, j]
    prod = 1.0 + 0.0j
    for j in range(n):
        prod *= colsums[j]
    total = prod
    comp = 0.0 + 0.0j
    sign = 1.0
    g = 0
    for k in range(1, 1 << (n - 1)):
        b = _trailing_zeros(k)
        g ^= 1 << b
        row = b + 1
        if (g >> b) & 1:
            for j in range(n):
                colsums[j] -= 2.0 * a[row, j]
        else:
            for j in range(n):
                colsums[j] += 2.0 * a[row, j]
        sign = -sign
        prod = 1.0 + 0.0j
        for j in range(n):
            prod *= colsums[j]
        y = sign * prod - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / (1 << (n - 1))


def permanent_glynn(m) -> complex:
    """Permanent via Glynn's formula with Gray-code sign flips, O(2^(n-1) n)."""
    return complex(_glynn(as_square(m)))


def permanent_naive(m) -> complex:
    """Reference permanent: explicit sum over all n! permutations.

    Only meant as a test oracle, so sizes above 10 are refused.
    """
    a = as_square(m)
    n = a.shape[0]
    if n > NAIVE_MAX_N:
        raise ValueError(f"permanent_naive is limited to n <= {NAIVE_MAX_N}, got {n}")
    rows = np.arange(n)
    total = 0j
    for p in itertools.permutations(range(n)):
        total += np.prod(a[rows, list(p)])
    return complex(total)


def determinant(m) -> complex:
    """Determinant by LU factorisation with partial pivoting (LAPACK getrf)."""
    a = as_square(m)
    if a.shape[0] == 0:
        return 1 + 0j
    return complex(np.linalg.det(a))


def minor(m, drop_row: int, drop_col: int) -> np.ndarray:
    """Copy of ``m`` with one row and one column removed."""
    a = as_square(m)
    n = a.shape[0]
    if not (0 <= drop_row < n and 0 <= drop_col < n):
        raise IndexError(f"minor ({drop_row}, {drop_col}) out of range for n={n}")
    keep_r = [i for i in range(n) if i != drop_row]
    keep_c = [j for j in range(n) if j != drop_col]
    return a[np.ix_(keep_r, keep_c)]


def hadamard_product(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b
