import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmm import matrix as mx
from cmm.reference import exact_product, naive_countsketch
from cmm.sketch import (
    ORACLE_TOLERANCE,
    CapacityError,
    SketchParams,
    ams_outer_sketch,
    compressed_product,
    count_sketch_from_tables,
    decompress,
    decompress_all,
    default_reps,
    sketch_add,
    sketch_scale,
)


def scale(a, b):
    return max(1.0, mx.frobenius(a) * mx.frobenius(b))


def test_params_round_up_and_default_reps():
    p = SketchParams(100)
    assert p.buckets == 128 and p.requested_buckets == 100
    assert SketchParams(64).buckets == 64
    assert p.resolved(32, 20).reps == default_reps(32, 20) == 30
    assert default_reps(1, 1) == 1
    with pytest.raises(ValueError):
        SketchParams(1)
    with pytest.raises(ValueError):
        SketchParams(8, reps=0)


def test_zero_product():
    sk = compressed_product(np.zeros((3, 4)), np.ones((4, 5)), SketchParams(8, 3))
    assert np.all(sk.coeff == 0)
    assert decompress(sk, 2, 4).value == 0.0
    assert np.all(decompress_all(sk) == 0)


def test_one_by_one():
    sk = compressed_product(np.array([[2.0]]), np.array([[3.0]]), SketchParams(8, 4, seed=9))
    for t, fam in enumerate(sk.families):
        k = int(fam.split(0, 0))
        want = np.zeros(8)
        want[k] = float(fam.sign(0, 0)) * 6.0
        np.testing.assert_allclose(sk.coeff[t], want, atol=ORACLE_TOLERANCE)
    assert abs(decompress(sk, 0, 0).value - 6.0) <= ORACLE_TOLERANCE
    np.testing.assert_allclose(decompress_all(sk), [[6.0]], atol=ORACLE_TOLERANCE)


def test_integer_four_by_four_matches_oracle():
    rng = np.random.default_rng(4)
    a = rng.integers(-5, 6, size=(4, 4)).astype(float)
    b = rng.integers(-5, 6, size=(4, 4)).astype(float)
    sk = compressed_product(a, b, SketchParams(8, 3, seed=1))
    np.testing.assert_allclose(sk.coeff, naive_countsketch(a, b, sk.families), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 24), st.integers(1, 24), st.integers(1, 24), st.integers(1, 8),
       st.integers(1, 4), st.integers(0, 2**63), st.floats(0.0, 0.9))
def test_oracle_equivalence(n1, n2, n3, lgb, d, seed, sparsity):
    rng = np.random.default_rng(seed % 2**32)
    a = rng.standard_normal((n1, n2))
    b = rng.standard_normal((n2, n3))
    a[rng.random(a.shape) < sparsity] = 0.0
    b[rng.random(b.shape) < sparsity] = 0.0
    sk = compressed_product(mx.from_dense(a), mx.from_dense(b, mx.ROW_MAJOR), SketchParams(1 << lgb, d, seed))
    ref = naive_countsketch(a, b, sk.families)
    assert np.max(np.abs(sk.coeff - ref)) <= ORACLE_TOLERANCE * scale(a, b)


def test_dense_and_sparse_inputs_agree():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((7, 5))
    b = rng.standard_normal((5, 6))
    p = SketchParams(16, 3, 2)
    dense = compressed_product(a, b, p)
    sparse = compressed_product(mx.from_dense(a, mx.ROW_MAJOR), mx.from_dense(b), p)
    np.testing.assert_allclose(dense.coeff, sparse.coeff, atol=1e-12)


def test_threads_do_not_change_result():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((20, 30)), rng.standard_normal((30, 10))
    p = SketchParams(64, 6, 3)
    np.testing.assert_array_equal(compressed_product(a, b, p).coeff,
                                  compressed_product(a, b, p, threads=3).coeff)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        compressed_product(np.ones((2, 3)), np.ones((4, 2)), SketchParams(8, 1))


def test_decompress_index_errors():
    sk = compressed_product(np.ones((2, 3)), np.ones((3, 4)), SketchParams(8, 1))
    with pytest.raises(IndexError):
        decompress(sk, 2, 0)
    with pytest.raises(IndexError):
        decompress(sk, 0, -1)


def test_decompress_all_agrees_with_decompress():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal((9, 4)), rng.standard_normal((4, 7))
    sk = compressed_product(a, b, SketchParams(16, 4, 5))
    full = decompress_all(sk)
    for i in range(9):
        for j in range(7):
            est = decompress(sk, i, j)
            assert full[i, j] == est.value
            # even d: mean of the two middle values
            mid = np.sort(est.per_rep)[1:3]
            assert est.value == pytest.approx(mid.mean())


def test_decompress_all_cap():
    sk = compressed_product(np.ones((10, 1)), np.ones((1, 10)), SketchParams(8, 1))
    with pytest.raises(CapacityError):
        decompress_all(sk, max_entries=99)


def test_exact_sparse_recovered():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        a = np.zeros((4, 4))
        b = np.zeros((4, 4))
        a[rng.integers(0, 4), rng.integers(0, 4)] = rng.integers(1, 9)
        b[:, rng.integers(0, 4)] = rng.integers(1, 9, size=4)
        ab = exact_product(a, b)
        nnz = np.count_nonzero(ab)
        sk = compressed_product(a, b, SketchParams(max(8, 8 * nnz), default_reps(4, 4), seed))
        hits += np.allclose(decompress_all(sk), ab, atol=1e-8, rtol=0)
    assert hits >= 99


def test_unbiased_and_variance_bounded():
    rng = np.random.default_rng(32)
    a, b = rng.standard_normal((32, 32)), rng.standard_normal((32, 32))
    ab = exact_product(a, b)
    fro2 = float(np.sum(ab**2))
    nb, trials = 64, 2000
    est = np.empty((trials, 32, 32))
    a_cols, b_rows = mx.from_dense(a), mx.from_dense(b, mx.ROW_MAJOR)
    for s in range(trials):
        est[s] = decompress_all(compressed_product(a_cols, b_rows, SketchParams(nb, 1, s)))
    se = np.sqrt(fro2 / nb) / np.sqrt(trials)
    assert np.all(np.abs(est.mean(axis=0) - ab) <= 4 * se)
    assert est.var(axis=0, ddof=1).mean() <= 1.3 * fro2 / nb


def test_linearity():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((6, 5))
    b1, b2 = rng.standard_normal((5, 7)), rng.standard_normal((5, 7))
    p = SketchParams(32, 4, 77)
    s1, s2 = compressed_product(a, b1, p), compressed_product(a, b2, p)
    s12 = compressed_product(a, b1 + b2, p)
    np.testing.assert_allclose(sketch_add(s1, s2).coeff, s12.coeff, atol=1e-8)
    zero = compressed_product(np.zeros((6, 5)), b1, p)
    np.testing.assert_array_equal(sketch_add(s1, zero).coeff, s1.coeff)
    assert np.all(sketch_add(s1, sketch_scale(s1, -1.0)).coeff == 0)
    i, j = 3, 4
    assert decompress(sketch_scale(s1, 2.5), i, j).value == pytest.approx(2.5 * decompress(s1, i, j).value)


def test_add_rejects_mismatch():
    a, b = np.ones((3, 3)), np.ones((3, 3))
    with pytest.raises(ValueError):
        sketch_add(compressed_product(a, b, SketchParams(8, 2, 1)), compressed_product(a, b, SketchParams(8, 2, 2)))
    with pytest.raises(ValueError):
        sketch_scale(compressed_product(a, b, SketchParams(8, 2, 1)), float("inf"))


def test_ams_outer_sketch():
    from cmm.hashing import new_pair_family
    f = new_pair_family(3, 2)
    assert ams_outer_sketch(np.zeros(4), np.ones(4), f.s1, f.s2) == 0.0
    e = np.zeros(4)
    e[0] = 1.0
    assert ams_outer_sketch(e, e, f.s1, f.s2) == float(f.s1(0) * f.s2(0))
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(8), rng.standard_normal(8)
    direct = sum(float(f.sign(i, j)) * u[i] * v[j] for i in range(8) for j in range(8))
    assert ams_outer_sketch(u, v, f.s1, f.s2) == pytest.approx(direct, abs=1e-12)


def test_permutation_relabeling():
    rng = np.random.default_rng(12)
    a, b = rng.standard_normal((10, 6)), rng.standard_normal((6, 8))
    perm = rng.permutation(10)
    pa = np.empty_like(a)
    pa[perm] = a                       # row i of A becomes row perm[i]
    fam = SketchParams(32, 1, 4).families()[0]
    h1, s1 = fam.h1(np.arange(10)), fam.s1(np.arange(10)).astype(float)
    h2, s2 = fam.h2(np.arange(8)), fam.s2(np.arange(8)).astype(float)
    ph1, ps1 = np.empty_like(h1), np.empty_like(s1)
    ph1[perm], ps1[perm] = h1, s1      # relabeled hash inputs
    base = count_sketch_from_tables(mx.from_dense(a), mx.from_dense(b, mx.ROW_MAJOR), h1, s1, h2, s2, 32)
    moved = count_sketch_from_tables(mx.from_dense(pa), mx.from_dense(b, mx.ROW_MAJOR), ph1, ps1, h2, s2, 32)
    np.testing.assert_allclose(base, moved, atol=1e-10)
    for i in range(10):
        for j in range(8):
            k, kp = (h1[i] + h2[j]) % 32, (ph1[perm[i]] + h2[j]) % 32
            assert s1[i] * s2[j] * base[0, k] == pytest.approx(ps1[perm[i]] * s2[j] * moved[0, kp])
