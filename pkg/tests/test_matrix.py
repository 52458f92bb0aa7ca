import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmm import matrix as mx


def random_sparse(rng, rows, cols, nnz, layout=mx.COLUMN_MAJOR):
    flat = rng.choice(rows * cols, size=nnz, replace=False)
    vals = rng.integers(1, 10, size=nnz) * rng.choice([-1.0, 1.0], size=nnz)
    return mx.from_triplets(rows, cols, flat // cols, flat % cols, vals, layout)


def triplet_set(m):
    r, c, v = m.triplets()
    return set(zip(r.tolist(), c.tolist(), v.tolist()))


def test_load_identity(data_dir):
    m = mx.load_matrix_market(data_dir / "identity2.mtx")
    assert (m.rows, m.cols, m.nnz) == (2, 2, 2)
    np.testing.assert_array_equal(m.to_dense(), np.eye(2))


def test_load_out_of_range_reports_line(data_dir):
    with pytest.raises(mx.MatrixMarketError) as err:
        mx.load_matrix_market(data_dir / "out_of_range.mtx")
    assert err.value.line == 4
    assert "out of range" in str(err.value)


def test_load_drops_explicit_zero(data_dir):
    m = mx.load_matrix_market(data_dir / "four_by_four.mtx")
    assert m.shape == (4, 4)
    assert m.nnz == 6
    assert m.to_dense()[2, 0] == 0.0
    assert m.to_dense()[2, 2] == 4.25


def write(tmp_path, text):
    path = tmp_path / "m.mtx"
    path.write_text(text)
    return path


def test_load_symmetric_expands(tmp_path):
    path = write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 5\n3 3 1\n")
    np.testing.assert_array_equal(mx.load_matrix_market(path).to_dense(),
                                  [[0, 5, 0], [5, 0, 0], [0, 0, 1]])


def test_load_array_format(tmp_path):
    path = write(tmp_path, "%%MatrixMarket matrix array real general\n2 3\n1\n4\n2\n5\n3\n0\n")
    np.testing.assert_array_equal(mx.load_matrix_market(path).to_dense(), [[1, 2, 3], [4, 5, 0]])


def test_load_integer_field(tmp_path):
    path = write(tmp_path, "%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n")
    assert mx.load_matrix_market(path).to_dense()[0, 0] == 7.0


@pytest.mark.parametrize("text, line", [
    ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", 1),
    ("not a header\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2\n", 2),
    ("%%MatrixMarket matrix coordinate real general\n4611686018427387904 2 0\n", 2),
])
def test_load_errors_carry_line_numbers(tmp_path, text, line):
    with pytest.raises(mx.MatrixMarketError) as err:
        mx.load_matrix_market(write(tmp_path, text))
    assert err.value.line == line


def test_write_then_load_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    m = random_sparse(rng, 6, 9, 17)
    mx.write_matrix_market(tmp_path / "x.mtx", m)
    back = mx.load_matrix_market(tmp_path / "x.mtx")
    assert triplet_set(back) == triplet_set(m)


def test_sparse_invariants():
    m = mx.from_triplets(3, 3, [2, 0, 0, 1], [1, 2, 0, 1], [1.0, 2.0, 3.0, 0.0])
    assert m.nnz == 3
    for k in range(m.cols):
        idx, _ = m.line(k)
        assert np.all(np.diff(idx) > 0)
    assert np.all(m.values != 0)


def test_from_triplets_sums_duplicates_and_checks_bounds():
    m = mx.from_triplets(2, 2, [0, 0], [1, 1], [2.0, 3.0])
    assert m.to_dense()[0, 1] == 5.0
    with pytest.raises(IndexError):
        mx.from_triplets(2, 2, [2], [0], [1.0])


def test_to_layout_round_trip():
    rng = np.random.default_rng(0)
    m = random_sparse(rng, 8, 8, 20)
    row = mx.to_layout(m, mx.ROW_MAJOR)
    assert row.layout == mx.ROW_MAJOR
    assert triplet_set(row) == triplet_set(m)
    back = mx.to_layout(row, mx.COLUMN_MAJOR)
    for name in ("offsets", "indices", "values"):
        np.testing.assert_array_equal(getattr(back, name), getattr(m, name))


def test_to_layout_one_by_one():
    m = mx.from_dense(np.array([[4.0]]))
    assert mx.to_layout(m, mx.ROW_MAJOR).to_dense()[0, 0] == 4.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.data())
def test_layout_preserves_triplets(rows, cols, data):
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    nnz = data.draw(st.integers(0, rows * cols))
    m = random_sparse(rng, rows, cols, nnz, data.draw(st.sampled_from([mx.COLUMN_MAJOR, mx.ROW_MAJOR])))
    for layout in (mx.COLUMN_MAJOR, mx.ROW_MAJOR):
        assert triplet_set(mx.to_layout(m, layout)) == triplet_set(m)


def test_random_diagonal():
    d = mx.random_diagonal(3, 7)
    assert len(d) == 3 and np.all(d.entries != 0)
    np.testing.assert_array_equal(d.entries, mx.random_diagonal(3, 7).entries)
    big = mx.random_diagonal(10_000, 1).entries
    assert big.min() > 0 and big.max() <= mx.DIAGONAL_MAX
    assert np.all(big == np.round(big))


def test_diagonal_scaling_rejects_zero():
    with pytest.raises(ValueError):
        mx.DiagonalScaling(np.array([1.0, 0.0]))


def test_apply_diagonal():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((5, 5))
    m[m < 0] = 0.0
    left, right = mx.random_diagonal(5, 1), mx.random_diagonal(5, 2)
    got_l = mx.as_dense(mx.apply_diagonal_left(left, m))
    got_r = mx.as_dense(mx.apply_diagonal_right(m, right))
    for i in range(5):
        for j in range(5):
            assert got_l[i, j] == left.entries[i] * m[i, j]
            assert got_r[i, j] == m[i, j] * right.entries[j]
    sp = mx.from_dense(m)
    np.testing.assert_array_equal(mx.as_dense(mx.apply_diagonal_left(left, sp)), got_l)
    np.testing.assert_array_equal(mx.as_dense(mx.apply_diagonal_right(sp, right)), got_r)
    assert mx.nnz(mx.apply_diagonal_left(left, sp)) == sp.nnz


def test_apply_diagonal_trivial_cases():
    m = np.arange(9.0).reshape(3, 3)
    ones = mx.DiagonalScaling(np.ones(3))
    np.testing.assert_array_equal(mx.as_dense(mx.apply_diagonal_left(ones, m)), m)
    np.testing.assert_array_equal(mx.as_dense(mx.apply_diagonal_right(np.zeros((3, 3)), ones)), 0)
    with pytest.raises(ValueError):
        mx.apply_diagonal_left(mx.DiagonalScaling(np.ones(2)), m)


def test_scaling_preserves_product_pattern():
    from cmm.reference import exact_product
    rng = np.random.default_rng(9)
    a = rng.integers(-1, 2, size=(6, 5)).astype(float)
    b = rng.integers(-1, 2, size=(5, 6)).astype(float)
    left, right = mx.random_diagonal(6, 3), mx.random_diagonal(6, 4)
    plain = exact_product(a, b)
    scaled = exact_product(mx.apply_diagonal_left(left, a), mx.apply_diagonal_right(b, right))
    np.testing.assert_array_equal(plain != 0, scaled != 0)


def test_as_dense_rejects_nan():
    with pytest.raises(ValueError):
        mx.as_dense(np.array([[np.nan]]))
