import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavsense import gf256

SLOW = np.array([[gf256.gf_mul_slow(a, b) for b in range(256)] for a in range(256)], dtype=np.uint8)


def slow_inv(a):
    return next(b for b in range(1, 256) if SLOW[a, b] == 1)


def slow_rref(M, ncoef):
    """Textbook Gauss-Jordan with shift-and-add products, one entry at a time."""
    M = [list(map(int, row)) for row in M]
    rows, cols = len(M), len(M[0]) if M else 0
    r = 0
    pivots = []
    for c in range(ncoef):
        p = next((i for i in range(r, rows) if M[i][c]), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        f = slow_inv(M[r][c])
        M[r] = [int(SLOW[f, x]) for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c]:
                g = M[i][c]
                M[i] = [x ^ int(SLOW[g, y]) for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return np.array(M, dtype=np.uint8).reshape(rows, cols), r, pivots


def test_tables_match_shift_and_add():
    np.testing.assert_array_equal(gf256.MUL, SLOW)


def test_known_products():
    # standard values for the 0x11B field
    assert gf256.gf_mul(0x57, 0x83) == 0xC1
    assert gf256.gf_mul(0x57, 0x13) == 0xFE
    assert gf256.gf_inv(0x53) == 0xCA


def test_inverses():
    for a in range(1, 256):
        assert SLOW[a, gf256.gf_inv(a)] == 1
    with pytest.raises(ZeroDivisionError):
        gf256.gf_inv(0)


def test_generator_has_full_order():
    assert len(set(gf256.EXP[:255].tolist())) == 255


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 20), st.integers(0, 2**32 - 1), st.floats(0, 0.7))
def test_row_reduce_matches_slow_oracle(rows, cols, seed, sparsity):
    rng = np.random.default_rng(seed)
    M = rng.integers(0, 256, (rows, cols), dtype=np.uint8)
    M[rng.random((rows, cols)) < sparsity] = 0
    ncoef = int(rng.integers(1, cols + 1))
    W, rk, piv = gf256.row_reduce(M, ncoef)
    W2, rk2, piv2 = slow_rref(M, ncoef)
    assert rk == rk2
    assert list(piv) == piv2
    np.testing.assert_array_equal(W, W2)


def test_rank_examples():
    assert gf256.rank(np.eye(5, dtype=np.uint8)) == 5
    assert gf256.rank(np.zeros((3, 4), np.uint8)) == 0
    row = np.array([[1, 2, 3]], np.uint8)
    scaled = np.array([[gf256.gf_mul(7, x) for x in row[0]]], np.uint8)
    assert gf256.rank(np.vstack([row, scaled])) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(1, 10), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_combine_matches_slow(T, K, P, seed):
    rng = np.random.default_rng(seed)
    C = rng.integers(0, 256, (T, K), dtype=np.uint8)
    S = rng.integers(0, 256, (K, P), dtype=np.uint8)
    want = np.zeros((T, P), np.uint8)
    for r in range(T):
        for j in range(K):
            want[r] ^= SLOW[C[r, j], S[j]]
    np.testing.assert_array_equal(gf256.combine(C, S), want)


def test_batch_columns_respect_received_mask():
    K = 4
    coefs = np.zeros((2, 5, K), np.uint8)
    coefs[:, :K] = np.eye(K, dtype=np.uint8)
    received = np.ones((2, 5), bool)
    received[1, 2] = False  # lose the unit row for column 3
    out = gf256.batch_decodable_columns(coefs, received)
    assert out.tolist() == [4, 2]
