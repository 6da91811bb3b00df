"""Exact rank computations: over GF(2^61 - 1) and over the rationals."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

PRIME = (1 << 61) - 1

_P = np.uint64(PRIME)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK29 = np.uint64((1 << 29) - 1)


def _reduce(x: np.ndarray) -> np.ndarray:
    # valid for x < 2^64; result in [0, p)
    x = (x & _P) + (x >> np.uint64(61))
    return np.where(x >= _P, x - _P, x)


def mulmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise a*b mod p for uint64 arrays with entries < p."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    a0, a1 = a & _MASK32, a >> np.uint64(32)
    b0, b1 = b & _MASK32, b >> np.uint64(32)
    lo = _reduce(a0 * b0)
    mid = a1 * b0 + a0 * b1  # < 2^62
    mid = (mid >> np.uint64(29)) + ((mid & _MASK29) << np.uint64(32))  # 2^61 == 1
    hi = (a1 * b1) << np.uint64(3)  # 2^64 == 8
    return _reduce(_reduce(lo + _reduce(mid)) + hi)


def submod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    return np.where(a >= b, a - b, a + (_P - b))


def inv(x: int) -> int:
    return pow(int(x), PRIME - 2, PRIME)


SMALL = 4096


def _rank_lists(rows: list[list[int]]) -> int:
    rank = 0
    width = len(rows[0]) if rows else 0
    for c in range(width):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pr = rows[rank]
        g = pr[c]
        # cross-multiplied update avoids a modular inverse per pivot
        for i in range(rank + 1, len(rows)):
            f = rows[i][c]
            if f:
                rows[i] = [(g * x - f * y) % PRIME for x, y in zip(rows[i], pr)]
        rank += 1
        if rank == len(rows):
            break
    return rank


def rank_mod_p(matrix: np.ndarray) -> int:
    """Rank of an integer matrix over GF(2^61 - 1)."""
    A = np.array(matrix, dtype=np.uint64, copy=True)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if A.size and int(A.max()) >= PRIME:
        A = A % _P
    if A.size <= SMALL:
        # eliminate along the shorter side; rank is transpose-invariant
        B = A if A.shape[0] <= A.shape[1] else A.T
        return _rank_lists([[int(x) for x in row] for row in B.tolist()])
    rows, cols = A.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(A[rank:, c])[0]
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            A[[rank, piv]] = A[[piv, rank]]
        pivot_row = mulmod(A[rank, c:], np.uint64(inv(A[rank, c])))
        A[rank, c:] = pivot_row
        below = A[rank + 1 :, c]
        hit = np.nonzero(below)[0] + rank + 1
        if hit.size:
            factors = A[hit, c][:, None]
            A[hit, c:] = submod(A[hit, c:], mulmod(factors, pivot_row[None, :]))
        rank += 1
    return rank


def rank_rational(matrix) -> int:
    """Exact rank over Q by Gaussian elimination on Fractions."""
    A = [[Fraction(int(x)) for x in row] for row in np.asarray(matrix).tolist()]
    if not A:
        return 0
    rows, cols = len(A), len(A[0])
    rank = 0
    for c in range(cols):
        piv = next((i for i in range(rank, rows) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        pr = A[rank]
        for i in range(rank + 1, rows):
            f = A[i][c] / pr[c]
            if f:
                A[i] = [x - f * y for x, y in zip(A[i], pr)]
        rank += 1
        if rank == rows:
            break
    return rank
