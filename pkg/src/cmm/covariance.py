"""Sketching sample covariance (and Gram) matrices with the diagonal removed.

With observations as the columns of an ``n x m`` matrix ``A`` the sample
covariance is ``M M^T`` for ``M = (A - mean) / sqrt(m - 1)``. The diagonal
is computed exactly and subtracted from the sketch, which leaves a sketch
of the off-diagonal part where correlated pairs stand out.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .recovery import (
    RecoverableSketch,
    compressed_product_recoverable,
    extract_sparse_approx,
    subtract_entries,
)
from .sketch import SketchParams, SketchSet, compressed_product, decompress_all

VARIABLES_AS_ROWS = "variables"
OBSERVATIONS_AS_ROWS = "observations"


class SampleFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SampleSet:
    """``data[i, o]`` is variable ``i`` in observation ``o``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("sample data must be a 2-D array")
        if data.shape[1] < 2:
            raise ValueError("need at least two observations")
        if not np.all(np.isfinite(data)):
            raise ValueError("sample data contains NaN or Inf")
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CovarianceSketch:
    sketch: Union[SketchSet, RecoverableSketch]
    diagonal: np.ndarray

    @property
    def base(self) -> SketchSet:
        return self.sketch.base if isinstance(self.sketch, RecoverableSketch) else self.sketch


def center_and_scale(samples: SampleSet) -> np.ndarray:
    """``(A - mean) / sqrt(m - 1)`` so that ``M @ M.T`` is the sample covariance."""
    a = samples.data
    mean = a.mean(axis=1, keepdims=True)
    return (a - mean) / math.sqrt(samples.m - 1)


def sketch_gram(m: np.ndarray, params: SketchParams, recoverable: bool = False,
                threads: int = 1) -> CovarianceSketch:
    """Sketch of ``m @ m.T`` with its (exactly computed) diagonal subtracted."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    mt = np.ascontiguousarray(m.T)
    if recoverable:
        sk = compressed_product_recoverable(m, mt, params, threads=threads)
    else:
        sk = compressed_product(m, mt, params, threads=threads)
    diag = np.einsum("ij,ij->i", m, m)
    idx = np.arange(m.shape[0])
    return CovarianceSketch(subtract_entries(sk, idx, idx, diag), diag)


def sketch_covariance(samples: SampleSet, params: SketchParams, recoverable: bool = False,
                      threads: int = 1) -> CovarianceSketch:
    return sketch_gram(center_and_scale(samples), params, recoverable, threads)


def noise_level(sk: SketchSet) -> float:
    """Typical per-entry sketch error, ``sqrt(median_t |c_t|^2 / b)``.

    The squared norm of a Count-Sketch vector estimates the squared
    Frobenius norm of what it sketches.
    """
    return math.sqrt(float(np.median(np.sum(sk.coeff**2, axis=1))) / sk.buckets)


def threshold_candidates(cs: CovarianceSketch, threshold: float) -> dict:
    """All off-diagonal ``(i, j) -> estimate`` with ``|estimate| > threshold``.

    Both orientations of a pair are reported separately.
    """
    est = decompress_all(cs.base)
    np.fill_diagonal(est, 0.0)
    rows, cols = np.nonzero(np.abs(est) > threshold)
    return {(int(i), int(j)): float(est[i, j]) for i, j in zip(rows, cols)}


def scan_correlations(cs: CovarianceSketch, threshold: float | None = None,
                      sublinear: bool = False, noise_factor: float = 3.0) -> list[tuple[int, int, float]]:
    """Off-diagonal pairs ``i < j`` whose estimate exceeds ``threshold``.

    Without a threshold, ``noise_factor`` times :func:`noise_level` is used.
    ``sublinear=True`` needs a recoverable sketch and only decodes the
    candidate positions instead of estimating all ``n^2`` entries.
    """
    if threshold is None:
        threshold = noise_factor * noise_level(cs.base)
    if threshold <= 0:
        return []
    if sublinear:
        if not isinstance(cs.sketch, RecoverableSketch):
            raise ValueError("sublinear scan needs a recoverable sketch")
        found = {(i, j): v for i, j, v in extract_sparse_approx(cs.sketch, threshold)
                 if i != j and abs(v) > threshold}
    else:
        found = threshold_candidates(cs, threshold)
    pairs: dict = {}
    for (i, j), v in found.items():
        key = (min(i, j), max(i, j))
        if key not in pairs or abs(v) > abs(pairs[key]):
            pairs[key] = v
    out = [(i, j, v) for (i, j), v in pairs.items()]
    out.sort(key=lambda e: (-abs(e[2]), e[0], e[1]))
    return out


# ---------------------------------------------------------------- input


def load_samples_csv(path, layout: str = VARIABLES_AS_ROWS) -> SampleSet:
    """Read comma-separated samples.

    ``layout="variables"``: one row per variable, one column per
    observation. ``"observations"``: the transpose. A first row containing
    any non-numeric field is treated as a header.
    """
    if layout not in (VARIABLES_AS_ROWS, OBSERVATIONS_AS_ROWS):
        raise ValueError(f"unknown layout {layout!r}")
    rows: list[list[float]] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not f.strip() for f in record):
                continue
            try:
                values = [float(f) for f in record]
            except ValueError:
                if lineno == 1:
                    continue
                raise SampleFormatError("non-numeric field", lineno) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise SampleFormatError(f"expected {width} fields, found {len(values)}", lineno)
            rows.append(values)
    if not rows:
        raise SampleFormatError("no data rows")
    data = np.array(rows)
    if layout == OBSERVATIONS_AS_ROWS:
        data = data.T
    return SampleSet(data)


def write_samples_csv(path, samples: SampleSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in samples.data:
            writer.writerow([repr(float(x)) for x in row])


def correlated_rows_instance(n: int = 100, m: int = 100, pair: tuple[int, int] = (20, 65),
                             rho: float = 0.9, seed: int = 0) -> np.ndarray:
    """``n x m`` matrix with i.i.d. uniform[-1, 1] entries except one pair of rows.

    Row ``pair[1]`` copies row ``pair[0]`` in each column with probability
    ``rho`` and is fresh uniform otherwise, so the two rows keep uniform
    marginals and have correlation ``rho``.
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=(n, m))
    i, j = pair
    copy = rng.random(m) < rho
    a[j, copy] = a[i, copy]
    return a


def planted_pair_samples(n: int = 100, m: int = 200, pair: tuple[int, int] = (0, 1),
                         rho: float = 0.9, seed: int = 0) -> SampleSet:
    return SampleSet(correlated_rows_instance(n, m, pair, rho, seed))
