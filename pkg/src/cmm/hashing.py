"""Polynomial hash families over the Mersenne prime field Z_p, p = 2**61 - 1.

A degree-``k-1`` polynomial with uniformly random coefficients gives a
k-wise independent family. Bucket numbers are the low ``lg b`` bits of the
field value and signs are taken from the lowest bit (0 -> +1, 1 -> -1).

Keys are non-negative integers below 2**32 (matrix indices).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MERSENNE_61 = (1 << 61) - 1
KEY_LIMIT = 1 << 32

_P = np.uint64(MERSENNE_61)
_LO32 = np.uint64(0xFFFFFFFF)
_LO29 = np.uint64((1 << 29) - 1)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)


def _fold(v: np.ndarray) -> np.ndarray:
    # v < 2**63  ->  v mod p
    v = (v & _P) + (v >> _S61)
    return v - np.where(v >= _P, _P, np.uint64(0))


def _mul_key(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``a * x mod p`` for ``a < p`` and ``x < 2**32`` without overflow."""
    lo = (a & _LO32) * x          # < 2**64
    hi = (a >> _S32) * x          # < 2**61
    # hi * 2**32 = (hi >> 29) * 2**61 + (hi & (2**29-1)) * 2**32, and 2**61 == 1
    hi_part = (hi >> _S29) + ((hi & _LO29) << _S32)
    lo_part = (lo & _P) + (lo >> _S61)
    return _fold(_fold(hi_part) + _fold(lo_part))


def _as_keys(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.size and (arr.min() < 0 or arr.max() >= KEY_LIMIT):
        raise ValueError("hash keys must lie in [0, 2**32)")
    return arr.astype(np.uint64)


@dataclass(frozen=True)
class PolyHash:
    """``x -> (c_0 + c_1 x + ... + c_deg x^deg) mod p``, reduced to ``range``.

    ``range`` must be a power of two; the reduction keeps the low bits.
    """

    coefficients: tuple[int, ...]
    range: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def independence(self) -> int:
        return len(self.coefficients)

    def field_value(self, x) -> np.ndarray:
        keys = _as_keys(x)
        acc = np.full(keys.shape, self.coefficients[-1], dtype=np.uint64)
        for c in reversed(self.coefficients[:-1]):
            acc = _fold(_mul_key(acc, keys) + np.uint64(c))
        return acc

    def __call__(self, x) -> np.ndarray:
        return (self.field_value(x) & np.uint64(self.range - 1)).astype(np.int64)


def random_poly_hash(rng: np.random.Generator, independence: int, range_: int) -> PolyHash:
    coeffs = rng.integers(0, MERSENNE_61, size=independence, dtype=np.uint64)
    return PolyHash(tuple(int(c) for c in coeffs), range_)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PairHashFamily:
    """Splitting and sign functions for index pairs.

    ``h(i, j) = (h1(i) + h2(j)) mod b`` and ``s(i, j) = s1(i) * s2(j)``.
    """

    seed: int
    buckets: int
    h1_poly: PolyHash
    h2_poly: PolyHash
    s1_poly: PolyHash
    s2_poly: PolyHash

    def h1(self, i) -> np.ndarray:
        return self.h1_poly(i)

    def h2(self, j) -> np.ndarray:
        return self.h2_poly(j)

    def s1(self, i) -> np.ndarray:
        return 1 - 2 * self.s1_poly(i)

    def s2(self, j) -> np.ndarray:
        return 1 - 2 * self.s2_poly(j)

    def split(self, i, j) -> np.ndarray:
        return (self.h1(i) + self.h2(j)) & (self.buckets - 1)

    def sign(self, i, j) -> np.ndarray:
        return self.s1(i) * self.s2(j)


def new_pair_family(seed: int, buckets: int, sign_independence: int = 2) -> PairHashFamily:
    """Draw a family deterministically from ``seed``.

    Splitting functions are 3-wise independent; signs are 2-wise (default)
    or 4-wise (needed for second-moment estimation).
    """
    if not is_power_of_two(buckets) or buckets < 2:
        raise ValueError(f"bucket count must be a power of two >= 2, got {buckets}")
    if sign_independence not in (2, 4):
        raise ValueError("sign_independence must be 2 or 4")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    return PairHashFamily(
        seed=int(seed),
        buckets=buckets,
        h1_poly=random_poly_hash(rng, 3, buckets),
        h2_poly=random_poly_hash(rng, 3, buckets),
        s1_poly=random_poly_hash(rng, sign_independence, 2),
        s2_poly=random_poly_hash(rng, sign_independence, 2),
    )


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 64-bit child seed of ``master`` along ``path``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def split(f: PairHashFamily, i, j):
    return f.split(i, j)


def sign(f: PairHashFamily, i, j):
    return f.sign(i, j)
