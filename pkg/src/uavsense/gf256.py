"""GF(2^8) arithmetic with the 0x11B reduction polynomial.

Scalar helpers are table lookups; the elimination kernels are compiled with
numba because the Monte-Carlo estimators call them hundreds of thousands of
times.
"""

from __future__ import annotations

import numba as nb
import numpy as np

POLY = 0x11B
GENERATOR = 0x03


def _build_tables():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        # multiply by the generator 0x03 = x + 1
        y = x << 1
        if y & 0x100:
            y ^= POLY
        x = y ^ x
    exp[255:510] = exp[0:255]
    mul = np.zeros((256, 256), dtype=np.uint8)
    a = np.arange(1, 256)
    mul[1:, 1:] = exp[(log[a][:, None] + log[a][None, :]) % 255]
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[a]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _build_tables()


def gf_mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(INV[a])


def gf_mul_slow(a: int, b: int) -> int:
    """Shift-and-add multiply, independent of the lookup tables."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & 0x100:
            a ^= POLY
        b >>= 1
    return r


_LOW_BITS = np.uint64(0x0101010101010101)


@nb.njit(cache=True, inline="always")
def _spread(g, mul, cb):
    for b in range(8):
        cb[b] = np.uint64(mul[g, 1 << b])


@nb.njit(cache=True, inline="always")
def _mul_word(x, cb):
    # bytewise GF(256) product of the 8 packed bytes of x with a constant,
    # using its images of the basis bits: each byte contributes bit * cb[b]
    acc = np.uint64(0)
    for b in range(8):
        acc ^= ((x >> np.uint64(b)) & _LOW_BITS) * cb[b]
    return acc


@nb.njit(cache=True)
def _row_echelon(M, ncoef, mul, inv):
    """Reduce ``M`` in place to reduced row-echelon form on its first ``ncoef`` columns.

    Row operations are applied to every column, so trailing payload columns
    follow along.  ``M`` must be C-contiguous with a width divisible by 8.
    Returns ``(rank, pivot_cols)``; ``pivot_cols[r]`` is the pivot column of
    row ``r`` for ``r < rank``.
    """
    nrows, ncols = M.shape
    W = M.view(np.uint64)
    nw = ncols // 8
    cb = np.empty(8, dtype=np.uint64)
    pivots = np.empty(min(nrows, ncoef), dtype=np.int64)
    rank = 0
    for col in range(ncoef):
        if rank == nrows:
            break
        p = -1
        for r in range(rank, nrows):
            if M[r, col] != 0:
                p = r
                break
        if p < 0:
            continue
        # rows at and below ``rank`` are zero left of ``col``
        w0 = col // 8
        if p != rank:
            for w in range(w0, nw):
                t = W[p, w]
                W[p, w] = W[rank, w]
                W[rank, w] = t
        f = inv[M[rank, col]]
        if f != 1:
            _spread(f, mul, cb)
            for w in range(w0, nw):
                W[rank, w] = _mul_word(W[rank, w], cb)
        for r in range(rank + 1, nrows):
            g = M[r, col]
            if g != 0:
                _spread(g, mul, cb)
                for w in range(w0, nw):
                    W[r, w] ^= _mul_word(W[rank, w], cb)
        pivots[rank] = col
        rank += 1
    for k in range(rank - 1, -1, -1):
        col = pivots[k]
        w0 = col // 8
        for r in range(k):
            g = M[r, col]
            if g != 0:
                _spread(g, mul, cb)
                for w in range(w0, nw):
                    W[r, w] ^= _mul_word(W[k, w], cb)
    return rank, pivots[:rank]


def _padded(M: np.ndarray) -> np.ndarray:
    rows, cols = M.shape
    width = -(-cols // 8) * 8
    out = np.zeros((rows, max(width, 8)), dtype=np.uint8)
    out[:, :cols] = M
    return out


@nb.njit(cache=True)
def _clean_prefix(M, ncoef, rank, pivots):
    """Number of leading columns whose unit vectors lie in the row space.

    In reduced row-echelon form ``e_j`` is in the row space iff column ``j``
    is a pivot whose row has no other non-zero entry.
    """
    n = 0
    for k in range(rank):
        if pivots[k] != n:
            break
        clean = True
        for c in range(pivots[k] + 1, ncoef):
            if M[k, c] != 0:
                clean = False
                break
        if not clean:
            break
        n += 1
    return n


def row_reduce(M: np.ndarray, ncoef: int | None = None):
    """Reduced row-echelon form of a uint8 matrix over GF(256) (returns a copy)."""
    M = np.asarray(M, dtype=np.uint8)
    k = M.shape[1] if ncoef is None else ncoef
    W = _padded(M)
    rank, piv = _row_echelon(W, k, MUL, INV)
    return W[:, :M.shape[1]].copy(), int(rank), piv


def rank(M: np.ndarray) -> int:
    return row_reduce(M)[1]


@nb.njit(cache=True)
def _batch_decodable_columns(coefs, received, mul, inv):
    """Leading decodable column count for every trial.

    ``coefs`` has shape (trials, T, K) and ``received`` (trials, T) marks the
    rows that survived the channel.
    """
    trials, T, K = coefs.shape
    width = max(8, ((K + 7) // 8) * 8)
    out = np.zeros(trials, dtype=np.int64)
    work = np.zeros((T, width), dtype=np.uint8)
    for t in range(trials):
        n = 0
        for r in range(T):
            if received[t, r]:
                for c in range(K):
                    work[n, c] = coefs[t, r, c]
                for c in range(K, width):
                    work[n, c] = 0
                n += 1
        if n == 0:
            continue
        W = work[:n]
        rk, piv = _row_echelon(W, K, mul, inv)
        out[t] = _clean_prefix(W, K, rk, piv)
    return out


def batch_decodable_columns(coefs: np.ndarray, received: np.ndarray) -> np.ndarray:
    return _batch_decodable_columns(np.ascontiguousarray(coefs, dtype=np.uint8),
                                    np.ascontiguousarray(received, dtype=np.bool_), MUL, INV)


@nb.njit(cache=True)
def _combine(coefs, source, mul):
    """``out[r] = sum_j coefs[r, j] * source[j]`` over GF(256)."""
    T, K = coefs.shape
    S = source.view(np.uint64)
    nw = S.shape[1]
    out = np.zeros((T, nw * 8), dtype=np.uint8)
    O = out.view(np.uint64)
    cb = np.empty(8, dtype=np.uint64)
    for r in range(T):
        for j in range(K):
            g = coefs[r, j]
            if g != 0:
                _spread(g, mul, cb)
                for w in range(nw):
                    O[r, w] ^= _mul_word(S[j, w], cb)
    return out


def combine(coefs: np.ndarray, source: np.ndarray) -> np.ndarray:
    source = np.asarray(source, dtype=np.uint8)
    out = _combine(np.ascontiguousarray(coefs, dtype=np.uint8), _padded(source), MUL)
    return out[:, :source.shape[1]].copy()
