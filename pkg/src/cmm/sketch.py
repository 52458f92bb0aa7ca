"""Count-Sketch of a matrix product computed without forming the product.

Each outer product ``a_k b_k`` (column ``k`` of A times row ``k`` of B) is
sketched by multiplying two polynomials of degree < b in the Fourier
basis; the per-repetition accumulator is transformed back once at the end.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from numba import njit

from . import matrix as mx
from .fft import fft_inplace, fft_tables
from .hashing import PairHashFamily, derive_seed, new_pair_family

# Refuse to materialize more dense entries than this unless overridden.
MAX_DENSE_ENTRIES = 1 << 26

# "equals the naive sketch" tolerance, scaled by max(1, |A|_F |B|_F)
ORACLE_TOLERANCE = 1e-8


class CapacityError(MemoryError):
    """A dense result would exceed the configured entry cap."""


def next_power_of_two(n: int) -> int:
    return 1 << max(1, int(n) - 1).bit_length()


def default_reps(n1: int, n3: int) -> int:
    """``6 * ceil(lg max(n1, n3))``, at least 1."""
    n = max(n1, n3, 1)
    return max(1, 6 * math.ceil(math.log2(n)))


@dataclass(frozen=True)
class SketchParams:
    """Buckets ``b`` (rounded up to a power of two), repetitions ``d``, seed.

    ``reps=None`` means "choose from the operand dimensions".
    """

    buckets: int
    reps: int | None = None
    seed: int = 0
    sign_independence: int = 2
    requested_buckets: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.buckets < 2:
            raise ValueError(f"need at least 2 buckets, got {self.buckets}")
        if self.reps is not None and self.reps < 1:
            raise ValueError(f"need at least one repetition, got {self.reps}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.sign_independence not in (2, 4):
            raise ValueError("sign_independence must be 2 or 4")
        object.__setattr__(self, "requested_buckets", self.requested_buckets or self.buckets)
        object.__setattr__(self, "buckets", next_power_of_two(self.buckets))
        object.__setattr__(self, "seed", int(self.seed))

    def resolved(self, n1: int, n3: int) -> "SketchParams":
        if self.reps is not None:
            return self
        return replace(self, reps=default_reps(n1, n3))

    def family_seed(self, t: int) -> int:
        return derive_seed(self.seed, t)

    def families(self) -> tuple[PairHashFamily, ...]:
        if self.reps is None:
            raise ValueError("repetitions not resolved")
        return tuple(new_pair_family(self.family_seed(t), self.buckets, self.sign_independence)
                     for t in range(self.reps))


@dataclass(frozen=True)
class EntryEstimate:
    value: float
    per_rep: np.ndarray


def median(values: np.ndarray) -> float:
    # np.median averages the two central order statistics for even counts
    return float(np.median(values))


class _HashTables:
    """Hash values of every row and column index for one family."""

    def __init__(self, fam: PairHashFamily, n1: int, n3: int):
        rows = np.arange(n1)
        cols = np.arange(n3)
        self.h1 = fam.h1(rows)
        self.s1 = fam.s1(rows).astype(np.float64)
        self.h2 = fam.h2(cols)
        self.s2 = fam.s2(cols).astype(np.float64)


@dataclass(frozen=True)
class SketchSet:
    """``d`` Count-Sketch vectors of length ``b`` for the product AB."""

    dims: tuple[int, int, int]
    params: SketchParams
    coeff: np.ndarray  # shape (d, b)

    @property
    def buckets(self) -> int:
        return self.params.buckets

    @property
    def reps(self) -> int:
        return self.coeff.shape[0]

    @cached_property
    def families(self) -> tuple[PairHashFamily, ...]:
        return self.params.families()

    def check_index(self, i: int, j: int) -> None:
        n1, _, n3 = self.dims
        if not (0 <= i < n1 and 0 <= j < n3):
            raise IndexError(f"entry ({i}, {j}) outside the {n1}x{n3} product")

    def compatible_with(self, other: "SketchSet") -> bool:
        return self.dims == other.dims and self.params == other.params \
            and self.coeff.shape == other.coeff.shape

    def with_coeff(self, coeff: np.ndarray) -> "SketchSet":
        return replace(self, coeff=coeff)


# ---------------------------------------------------------------- kernel


@njit(cache=True, nogil=True)
def _accumulate(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val,
                h1, s1, h2, s2, row_bits, col_bits, rev, fwd, inv, pa, pb, acc):
    """Sum the Fourier-domain sketches of all outer products into ``acc``.

    ``acc[0]`` is the unmasked product; ``acc[1 + r]`` masks rows with
    ``row_bits[:, r]``; ``acc[1 + L + r]`` masks columns with ``col_bits[:, r]``.
    """
    n2 = a_ptr.shape[0] - 1
    nbits = row_bits.shape[1]
    nb = acc.shape[1]
    for k in range(n2):
        a_lo, a_hi = a_ptr[k], a_ptr[k + 1]
        b_lo, b_hi = b_ptr[k], b_ptr[k + 1]
        if a_lo == a_hi or b_lo == b_hi:
            continue
        pa[:, :] = 0.0
        # A's polynomial goes in the real part and B's in the imaginary part,
        # so one transform serves both; they are split apart below.
        for q in range(a_lo, a_hi):
            i = a_idx[q]
            w = s1[i] * a_val[q]
            z = h1[i]
            pa[0, z] += w
            for r in range(nbits):
                if row_bits[i, r]:
                    pa[1 + r, z] += w
        for q in range(b_lo, b_hi):
            j = b_idx[q]
            w = 1j * (s2[j] * b_val[q])
            z = h2[j]
            pa[0, z] += w
            for r in range(nbits):
                if col_bits[j, r]:
                    pa[1 + r, z] += w
        # real inputs give Hermitian spectra, so only bins 0..b/2 are kept
        half = nb // 2
        for r in range(nbits + 1):
            fft_inplace(pa[r], rev, fwd)
            for z in range(half + 1):
                u = pa[r, z]
                v = pa[r, (nb - z) & (nb - 1)].conjugate()
                pa[r, z] = 0.5 * (u + v)
                pb[r, z] = -0.5j * (u - v)
        for z in range(half + 1):
            acc[0, z] += pa[0, z] * pb[0, z]
        for r in range(nbits):
            for z in range(half + 1):
                acc[1 + r, z] += pa[1 + r, z] * pb[0, z]
                acc[1 + nbits + r, z] += pa[0, z] * pb[1 + r, z]
    for r in range(acc.shape[0]):
        for z in range(1, nb // 2):
            acc[r, nb - z] = acc[r, z].conjugate()
        fft_inplace(acc[r], rev, inv)


def _operands(a, b):
    n1, n2 = mx.shape_of(a)
    n2b, n3 = mx.shape_of(b)
    if n2 != n2b:
        raise ValueError(f"inner dimensions differ: A is {n1}x{n2}, B is {n2b}x{n3}")
    a_cols = mx.to_layout(a, mx.COLUMN_MAJOR)
    b_rows = mx.to_layout(b, mx.ROW_MAJOR)
    return (n1, n2, n3), a_cols, b_rows


def count_sketch_from_tables(a_cols: mx.SparseMatrix, b_rows: mx.SparseMatrix, h1, s1, h2, s2,
                             buckets: int, row_bits=None, col_bits=None) -> np.ndarray:
    """Sketch families for one repetition given explicit hash tables.

    Returns real coefficients of shape ``(1 + 2L, b)`` where ``L`` is the
    number of mask bits (0 without masks).
    """
    nbits = 0 if row_bits is None else row_bits.shape[1]
    if row_bits is None:
        row_bits = np.zeros((len(h1), 0), dtype=np.uint8)
        col_bits = np.zeros((len(h2), 0), dtype=np.uint8)
    rev, fwd, inv = fft_tables(buckets)
    pa = np.zeros((nbits + 1, buckets), dtype=np.complex128)
    pb = np.zeros((nbits + 1, buckets), dtype=np.complex128)
    acc = np.zeros((2 * nbits + 1, buckets), dtype=np.complex128)
    _accumulate(a_cols.offsets, a_cols.indices, a_cols.values,
                b_rows.offsets, b_rows.indices, b_rows.values,
                np.asarray(h1, dtype=np.int64), np.asarray(s1, dtype=np.float64),
                np.asarray(h2, dtype=np.int64), np.asarray(s2, dtype=np.float64),
                np.ascontiguousarray(row_bits, dtype=np.uint8),
                np.ascontiguousarray(col_bits, dtype=np.uint8), rev, fwd, inv, pa, pb, acc)
    return acc.real / buckets


def sketch_coefficients(a, b, params: SketchParams, row_bits=None, col_bits=None,
                        threads: int = 1) -> tuple[tuple[int, int, int], SketchParams, np.ndarray]:
    """Shared driver for plain and code-masked sketches.

    Returns ``(dims, resolved params, coeff)`` with ``coeff`` of shape
    ``(d, 1 + 2L, b)``. Repetitions are independent, so running them on
    several threads does not change any floating-point result.
    """
    dims, a_cols, b_rows = _operands(a, b)
    n1, _, n3 = dims
    params = params.resolved(n1, n3)
    nbuck = params.buckets
    nbits = 0 if row_bits is None else row_bits.shape[1]
    if row_bits is None:
        row_bits = np.zeros((n1, 0), dtype=np.uint8)
        col_bits = np.zeros((n3, 0), dtype=np.uint8)
    elif row_bits.shape[0] != n1 or col_bits.shape != (n3, nbits):
        raise ValueError("mask tables do not match the product dimensions")
    row_bits = np.ascontiguousarray(row_bits, dtype=np.uint8)
    col_bits = np.ascontiguousarray(col_bits, dtype=np.uint8)
    rev, fwd, inv = fft_tables(nbuck)

    nfam = 2 * nbits + 1
    d = params.reps
    pa = np.zeros((d, nbits + 1, nbuck), dtype=np.complex128)
    pb = np.zeros((d, nbits + 1, nbuck), dtype=np.complex128)
    acc = np.zeros((d, nfam, nbuck), dtype=np.complex128)
    families = params.families()

    def run(t: int) -> None:
        tab = _HashTables(families[t], n1, n3)
        _accumulate(a_cols.offsets, a_cols.indices, a_cols.values,
                    b_rows.offsets, b_rows.indices, b_rows.values,
                    tab.h1, tab.s1, tab.h2, tab.s2, row_bits, col_bits,
                    rev, fwd, inv, pa[t], pb[t], acc[t])

    if threads > 1 and d > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(d)))
    else:
        for t in range(d):
            run(t)
    del pa, pb
    coeff = acc.real / nbuck
    return dims, params, np.ascontiguousarray(coeff)


def compressed_product(a, b, params: SketchParams, threads: int = 1) -> SketchSet:
    """Build ``d`` Count-Sketches of ``a @ b``.

    ``a`` and ``b`` may be dense arrays or :class:`~cmm.matrix.SparseMatrix`;
    empty columns of ``a`` / rows of ``b`` are skipped.
    """
    dims, params, coeff = sketch_coefficients(a, b, params, threads=threads)
    return SketchSet(dims, params, np.ascontiguousarray(coeff[:, 0, :]))


# ---------------------------------------------------------------- decoding


def decompress(sk: SketchSet, i: int, j: int) -> EntryEstimate:
    """Median over repetitions of ``s1(i) s2(j) c[(h1(i) + h2(j)) mod b]``."""
    sk.check_index(i, j)
    per_rep = np.empty(sk.reps)
    for t, fam in enumerate(sk.families):
        bucket = int(fam.split(i, j))
        per_rep[t] = float(fam.sign(i, j)) * sk.coeff[t, bucket]
    return EntryEstimate(median(per_rep), per_rep)


def decompress_all(sk: SketchSet, max_entries: int = MAX_DENSE_ENTRIES) -> np.ndarray:
    """Estimate every entry of the product (``n1 x n3`` dense array)."""
    n1, _, n3 = sk.dims
    if n1 * n3 > max_entries:
        raise CapacityError(f"{n1}x{n3} product exceeds the cap of {max_entries} entries")
    tables = [_HashTables(fam, n1, n3) for fam in sk.families]
    out = np.empty((n1, n3))
    block = max(1, (1 << 22) // max(1, n3 * sk.reps))
    mask = sk.buckets - 1
    for lo in range(0, n1, block):
        hi = min(n1, lo + block)
        est = np.empty((sk.reps, hi - lo, n3))
        for t, tab in enumerate(tables):
            idx = (tab.h1[lo:hi, None] + tab.h2[None, :]) & mask
            est[t] = tab.s1[lo:hi, None] * tab.s2[None, :] * sk.coeff[t][idx]
        out[lo:hi] = np.median(est, axis=0)
    return out


# ---------------------------------------------------------------- linearity


def sketch_add(x: SketchSet, y: SketchSet) -> SketchSet:
    if not x.compatible_with(y):
        raise ValueError("sketches differ in seeds, parameters or shape")
    return x.with_coeff(x.coeff + y.coeff)


def sketch_scale(x: SketchSet, alpha: float) -> SketchSet:
    if not math.isfinite(alpha):
        raise ValueError("scale factor must be finite")
    return x.with_coeff(x.coeff * alpha)


def ams_outer_sketch(u, v, s1, s2) -> float:
    """AMS sketch of the outer product ``u v^T``.

    ``s1`` and ``s2`` are sign vectors (or callables producing them).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    su = s1(np.arange(len(u))) if callable(s1) else np.asarray(s1)
    sv = s2(np.arange(len(v))) if callable(s2) else np.asarray(s2)
    if su.shape != u.shape or sv.shape != v.shape:
        raise ValueError("sign vectors must match the vector lengths")
    return float(np.dot(su, u) * np.dot(sv, v))
