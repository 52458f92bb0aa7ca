"""Exact, deliberately naive oracles used by the tests and the CLI.

Nothing here shares code with the sketch engine beyond the hash
families, so the two paths can check each other.
"""

from __future__ import annotations

import math

import numpy as np

from . import matrix as mx
from .sketch import MAX_DENSE_ENTRIES, CapacityError


def exact_product(a, b, max_entries: int = MAX_DENSE_ENTRIES) -> np.ndarray:
    """Row-by-column product; every dot product is summed with ``math.fsum``."""
    a = mx.as_dense(a)
    b = mx.as_dense(b)
    n1, n2 = a.shape
    if b.shape[0] != n2:
        raise ValueError(f"inner dimensions differ: {n2} vs {b.shape[0]}")
    n3 = b.shape[1]
    if n1 * n3 > max_entries:
        raise CapacityError(f"{n1}x{n3} product exceeds the cap of {max_entries} entries")
    rows = a.tolist()
    cols = b.T.tolist()
    out = np.empty((n1, n3))
    for i in range(n1):
        ai = rows[i]
        for j in range(n3):
            out[i, j] = math.fsum(x * y for x, y in zip(ai, cols[j]))
    return out


def naive_countsketch(a, b, families, max_entries: int = MAX_DENSE_ENTRIES) -> np.ndarray:
    """Form AB exactly, then Count-Sketch every entry: shape ``(d, b)``."""
    ab = exact_product(a, b, max_entries)
    n1, n3 = ab.shape
    out = np.zeros((len(families), families[0].buckets)) if families else np.zeros((0, 0))
    rows, cols = np.arange(n1), np.arange(n3)
    for t, fam in enumerate(families):
        h1, h2 = fam.h1(rows).tolist(), fam.h2(cols).tolist()
        s1, s2 = fam.s1(rows).tolist(), fam.s2(cols).tolist()
        mask = fam.buckets - 1
        c = [0.0] * fam.buckets
        for i in range(n1):
            for j in range(n3):
                w = ab[i, j]
                if w != 0.0:
                    c[(h1[i] + h2[j]) & mask] += s1[i] * s2[j] * w
        out[t] = c
    return out


def outer_product_countsketch(a, b, family) -> np.ndarray:
    """Count-Sketch built one outer product at a time with a double loop."""
    a = mx.as_dense(a)
    b = mx.as_dense(b)
    n1, n2 = a.shape
    n3 = b.shape[1]
    rows, cols = np.arange(n1), np.arange(n3)
    h1, h2 = family.h1(rows).tolist(), family.h2(cols).tolist()
    s1, s2 = family.s1(rows).tolist(), family.s2(cols).tolist()
    c = [0.0] * family.buckets
    for k in range(n2):
        for i in range(n1):
            if a[i, k] == 0.0:
                continue
            for j in range(n3):
                if b[k, j] != 0.0:
                    c[(h1[i] + h2[j]) % family.buckets] += s1[i] * s2[j] * a[i, k] * b[k, j]
    return np.array(c)


def err_f_k(m, k: int) -> float:
    """Squared Frobenius norm of ``m`` without its ``k`` largest-magnitude entries."""
    sq = np.sort((mx.as_dense(m).ravel()) ** 2)[::-1]
    if k < 0:
        raise ValueError("k must be non-negative")
    return math.fsum(sq[k:].tolist())


def exact_covariance(samples) -> np.ndarray:
    """Sample covariance, one observation (column) at a time."""
    data = np.asarray(samples.data if hasattr(samples, "data") else samples, dtype=np.float64)
    n, m = data.shape
    if m < 2:
        raise ValueError("need at least two observations")
    mean = data.sum(axis=1) / m
    q = np.zeros((n, n))
    for obs in range(m):
        dev = data[:, obs] - mean
        q += np.outer(dev, dev)
    return q / (m - 1)
