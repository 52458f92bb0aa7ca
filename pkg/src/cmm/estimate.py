"""Compressibility estimates for a product AB that is never formed.

``estimate_nnz`` bounds the number of nonzero entries of AB from above,
counting cancellations as zeros. ``estimate_frobenius_ub`` bounds
``|AB|_F^2`` from above with AMS sketches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matrix as mx
from .hashing import derive_seed, new_pair_family
from .sketch import SketchParams, compressed_product

DEFAULT_NNZ_REPS = 10
ZERO_TOLERANCE = 1e-7
EMPTY_FRACTION = 0.8
FROBENIUS_FACTOR = 32

# salts keeping estimator randomness apart from sketch seeds
_SCALE_SALT = 0x5CA1E
_LEVEL_SALT = 0x1E7E1
_AMS_SALT = 0xA5


@dataclass(frozen=True)
class NnzEstimate:
    upper_bound: int
    buckets: int
    reps: int
    zero_fractions: list = field(default_factory=list)  # per level: min over reps
    capped: bool = False

    @property
    def failure_probability(self) -> float:
        """Chance that a single level stops although nnz exceeds its b."""
        return 0.75 ** self.reps


@dataclass(frozen=True)
class FrobeniusEstimate:
    median_square: float
    upper_bound: float
    reps: int
    squares: np.ndarray = field(repr=False, default=None)


def _nonzero_cap(n1: int, n3: int) -> int:
    return 1 << max(1, (2 * n1 * n3 - 1).bit_length())


def estimate_nnz(a, b, reps: int = DEFAULT_NNZ_REPS, seed: int = 0,
                 zero_tolerance: float = ZERO_TOLERANCE) -> NnzEstimate:
    """Doubling search over ``b = 2, 4, 8, ...``.

    Both operands are first scaled by random integer diagonals so that
    cancellation inside a bucket is unlikely unless every entry in it is
    zero. The search stops at the first ``b`` where, for every repetition,
    at least ``floor(4b/5)`` sketch coefficients are zero.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    n1, n2 = mx.shape_of(a)
    n2b, n3 = mx.shape_of(b)
    if n2 != n2b:
        raise ValueError(f"inner dimensions differ: {n2} vs {n2b}")
    left = mx.random_diagonal(n1, derive_seed(seed, _SCALE_SALT, 0))
    right = mx.random_diagonal(n3, derive_seed(seed, _SCALE_SALT, 1))
    sa = mx.to_layout(mx.apply_diagonal_left(left, a), mx.COLUMN_MAJOR)
    sb = mx.to_layout(mx.apply_diagonal_right(b, right), mx.ROW_MAJOR)
    tol = zero_tolerance * max(1.0, mx.frobenius(sa) * mx.frobenius(sb))

    cap = _nonzero_cap(n1, n3)
    fractions = []
    nb = 2
    while True:
        params = SketchParams(nb, reps, derive_seed(seed, _LEVEL_SALT, nb))
        sk = compressed_product(sa, sb, params)
        zeros = np.count_nonzero(np.abs(sk.coeff) <= tol, axis=1)
        fractions.append(float(zeros.min()) / nb)
        if zeros.min() >= math.floor(EMPTY_FRACTION * nb):
            return NnzEstimate(nb, nb, reps, fractions)
        if nb >= cap:
            return NnzEstimate(cap, cap, reps, fractions, capped=True)
        nb *= 2


def ams_sketches(a, b, reps: int, seed: int = 0) -> np.ndarray:
    """``reps`` independent AMS sketches of AB with 4-wise independent signs.

    Sketch ``t`` is ``sum_k (s1 . a_k) (s2 . b_k)``, i.e. the AMS sketches of
    the outer products added up, computed in ``O(reps * N)``.
    """
    n1, _ = mx.shape_of(a)
    _, n3 = mx.shape_of(b)
    out = np.empty(reps)
    a_cols = mx.to_layout(a, mx.COLUMN_MAJOR)
    b_rows = mx.to_layout(b, mx.ROW_MAJOR)
    ar, ac, av = a_cols.triplets()
    br, bc, bv = b_rows.triplets()
    n2 = a_cols.cols
    for t in range(reps):
        fam = new_pair_family(derive_seed(seed, _AMS_SALT, t), 2, sign_independence=4)
        s1 = fam.s1(np.arange(n1)).astype(np.float64)
        s2 = fam.s2(np.arange(n3)).astype(np.float64)
        left = np.bincount(ac, weights=s1[ar] * av, minlength=n2)    # s1 . a_k for each k
        right = np.bincount(br, weights=s2[bc] * bv, minlength=n2)   # s2 . b_k for each k
        out[t] = float(np.dot(left, right))
    return out


def estimate_frobenius_ub(a, b, reps: int | None = None, seed: int = 0) -> FrobeniusEstimate:
    """``32 * median(X_t^2)`` over ``reps`` AMS sketches ``X_t`` of AB."""
    if reps is None:
        n1, _ = mx.shape_of(a)
        _, n3 = mx.shape_of(b)
        reps = max(1, 2 * math.ceil(math.log2(max(n1, n3, 2))) + 1)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    squares = ams_sketches(a, b, reps, seed) ** 2
    med = float(np.median(squares))
    return FrobeniusEstimate(med, FROBENIUS_FACTOR * med, reps, squares)
