"""Matrix containers used by the sketch engine.

Dense operands are plain 2-D ``float64`` ndarrays. Sparse operands are
:class:`SparseMatrix` objects in either column-major (CSC) or row-major
(CSR) layout; the engine reads columns of ``A`` and rows of ``B``.

Indices are 0-based everywhere in the library. Matrix Market files are
1-based on disk and converted at load time.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

COLUMN_MAJOR = "column"
ROW_MAJOR = "row"

# Largest integer used for random diagonal scalings (2**31 - 1).
DIAGONAL_MAX = 2**31 - 1


class MatrixMarketError(ValueError):
    """Raised for malformed Matrix Market input; carries the 1-based line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed sparse matrix.

    For ``layout == "column"`` line ``k`` is column ``k``, ``offsets`` has
    ``cols + 1`` entries and ``indices`` holds row numbers. For ``"row"``
    the roles of rows and columns swap.
    """

    rows: int
    cols: int
    layout: str
    offsets: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.layout not in (COLUMN_MAJOR, ROW_MAJOR):
            raise ValueError(f"unknown layout {self.layout!r}")
        nlines = self.cols if self.layout == COLUMN_MAJOR else self.rows
        if self.offsets.shape != (nlines + 1,):
            raise ValueError("offsets length does not match the number of lines")
        if len(self.indices) != len(self.values) or self.offsets[-1] != len(self.values):
            raise ValueError("index/value arrays do not match offsets")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def line(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices and values stored on line ``k`` (a column or a row)."""
        lo, hi = self.offsets[k], self.offsets[k + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(row, col, value)`` arrays in storage order."""
        line_ids = np.repeat(np.arange(len(self.offsets) - 1), np.diff(self.offsets))
        if self.layout == COLUMN_MAJOR:
            return self.indices.copy(), line_ids, self.values.copy()
        return line_ids, self.indices.copy(), self.values.copy()

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols))
        r, c, v = self.triplets()
        out[r, c] = v
        return out

    def frobenius(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))


Matrix = Union[np.ndarray, SparseMatrix]


def from_triplets(rows: int, cols: int, r, c, v, layout: str = COLUMN_MAJOR) -> SparseMatrix:
    """Build a sparse matrix from coordinate triplets.

    Duplicate coordinates are summed and zeros (including ones produced by
    summing duplicates) are dropped.
    """
    r = np.asarray(r, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    v = np.asarray(v, dtype=np.float64)
    if r.size and (r.min() < 0 or r.max() >= rows or c.min() < 0 or c.max() >= cols):
        raise IndexError("triplet index outside matrix bounds")
    if layout == COLUMN_MAJOR:
        major, minor, nlines = c, r, cols
    elif layout == ROW_MAJOR:
        major, minor, nlines = r, c, rows
    else:
        raise ValueError(f"unknown layout {layout!r}")
    order = np.lexsort((minor, major))
    major, minor, v = major[order], minor[order], v[order]
    if major.size:
        # merge duplicates
        key_change = np.ones(major.size, dtype=bool)
        key_change[1:] = (major[1:] != major[:-1]) | (minor[1:] != minor[:-1])
        starts = np.flatnonzero(key_change)
        v = np.add.reduceat(v, starts)
        major, minor = major[starts], minor[starts]
    keep = v != 0.0
    major, minor, v = major[keep], minor[keep], v[keep]
    offsets = np.zeros(nlines + 1, dtype=np.int64)
    np.cumsum(np.bincount(major, minlength=nlines), out=offsets[1:])
    return SparseMatrix(rows, cols, layout, offsets, minor.astype(np.int64), v)


def from_dense(a, layout: str = COLUMN_MAJOR) -> SparseMatrix:
    a = as_dense(a)
    r, c = np.nonzero(a)
    return from_triplets(a.shape[0], a.shape[1], r, c, a[r, c], layout)


def as_dense(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array."""
    if isinstance(a, SparseMatrix):
        return a.to_dense()
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or Inf")
    return arr


def to_layout(m: Matrix, layout: str) -> SparseMatrix:
    """Same logical matrix in the requested sparse layout."""
    if not isinstance(m, SparseMatrix):
        return from_dense(m, layout)
    if m.layout == layout:
        return m
    r, c, v = m.triplets()
    return from_triplets(m.rows, m.cols, r, c, v, layout)


def shape_of(m: Matrix) -> tuple[int, int]:
    if isinstance(m, SparseMatrix):
        return m.shape
    return tuple(np.shape(m))


def frobenius(m: Matrix) -> float:
    if isinstance(m, SparseMatrix):
        return m.frobenius()
    return float(np.linalg.norm(as_dense(m)))


def nnz(m: Matrix) -> int:
    if isinstance(m, SparseMatrix):
        return m.nnz
    return int(np.count_nonzero(as_dense(m)))


def transpose(m: Matrix) -> Matrix:
    if isinstance(m, SparseMatrix):
        # CSC of M has the same arrays as CSR of M^T
        flipped = ROW_MAJOR if m.layout == COLUMN_MAJOR else COLUMN_MAJOR
        return SparseMatrix(m.cols, m.rows, flipped, m.offsets, m.indices, m.values)
    return np.ascontiguousarray(as_dense(m).T)


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class DiagonalScaling:
    entries: np.ndarray

    def __post_init__(self):
        if np.any(self.entries == 0):
            raise ValueError("diagonal scaling entries must be nonzero")

    def __len__(self) -> int:
        return len(self.entries)


def random_diagonal(length: int, seed) -> DiagonalScaling:
    """Integers drawn uniformly from 1..2**31-1, stored as floats.

    Products of two entries stay below 2**62 and are exact in float64 as
    long as the scaled values themselves are small integers.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    return DiagonalScaling(rng.integers(1, DIAGONAL_MAX + 1, size=length).astype(np.float64))


def apply_diagonal_left(d: DiagonalScaling, m: Matrix) -> Matrix:
    """``diag(d) @ m`` without forming the diagonal matrix."""
    rows, _ = shape_of(m)
    if len(d) != rows:
        raise ValueError(f"scaling of length {len(d)} cannot multiply {rows} rows")
    if isinstance(m, SparseMatrix):
        r, _, _ = m.triplets()
        return SparseMatrix(m.rows, m.cols, m.layout, m.offsets, m.indices, m.values * d.entries[r])
    return d.entries[:, None] * as_dense(m)


def apply_diagonal_right(m: Matrix, d: DiagonalScaling) -> Matrix:
    """``m @ diag(d)``."""
    _, cols = shape_of(m)
    if len(d) != cols:
        raise ValueError(f"scaling of length {len(d)} cannot multiply {cols} columns")
    if isinstance(m, SparseMatrix):
        _, c, _ = m.triplets()
        return SparseMatrix(m.rows, m.cols, m.layout, m.offsets, m.indices, m.values * d.entries[c])
    return as_dense(m) * d.entries[None, :]


# ---------------------------------------------------------------- Matrix Market

_MAX_DIM = 2**62


def load_matrix_market(path, layout: str = COLUMN_MAJOR) -> SparseMatrix:
    """Read a real ``.mtx`` file (coordinate or array format).

    Symmetric storage is expanded and explicit zeros are dropped.
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise MatrixMarketError("missing %%MatrixMarket matrix header", 1)
    fmt, field, symmetry = (h.lower() for h in header[2:])
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported format {fmt!r}", 1)
    if field not in ("real", "integer", "double"):
        raise MatrixMarketError(f"non-real field {field!r}", 1)
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", 1)

    body = [(n, ln.strip()) for n, ln in enumerate(lines[1:], start=2)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError("missing size line", len(lines))
    size_no, size_line = body[0]
    try:
        dims = [int(x) for x in size_line.split()]
    except ValueError:
        raise MatrixMarketError("size line is not integer", size_no) from None
    expected = 3 if fmt == "coordinate" else 2
    if len(dims) != expected:
        raise MatrixMarketError(f"size line needs {expected} integers", size_no)
    nrows, ncols = dims[0], dims[1]
    if nrows < 0 or ncols < 0 or nrows >= _MAX_DIM or ncols >= _MAX_DIM or nrows * ncols >= _MAX_DIM:
        raise MatrixMarketError("matrix dimensions overflow", size_no)
    if symmetry == "symmetric" and nrows != ncols:
        raise MatrixMarketError("symmetric matrix must be square", size_no)

    entries = body[1:]
    rs: list[int] = []
    cs: list[int] = []
    vs: list[float] = []
    if fmt == "coordinate":
        declared = dims[2]
        if len(entries) != declared:
            where = entries[-1][0] if entries else size_no
            raise MatrixMarketError(f"expected {declared} entries, found {len(entries)}", where)
        for no, text in entries:
            parts = text.split()
            if len(parts) != 3:
                raise MatrixMarketError("coordinate entry needs 'row col value'", no)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise MatrixMarketError(f"cannot parse entry {text!r}", no) from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise MatrixMarketError(f"index ({i}, {j}) out of range for {nrows}x{ncols}", no)
            if not np.isfinite(v):
                raise MatrixMarketError("non-finite value", no)
            rs.append(i - 1)
            cs.append(j - 1)
            vs.append(v)
            if symmetry == "symmetric" and i != j:
                rs.append(j - 1)
                cs.append(i - 1)
                vs.append(v)
    else:
        # array format is column-major; symmetric stores the lower triangle
        if symmetry == "symmetric":
            coords = [(i, j) for j in range(ncols) for i in range(j, nrows)]
        else:
            coords = [(i, j) for j in range(ncols) for i in range(nrows)]
        if len(entries) != len(coords):
            where = entries[-1][0] if entries else size_no
            raise MatrixMarketError(f"expected {len(coords)} values, found {len(entries)}", where)
        for (no, text), (i, j) in zip(entries, coords):
            try:
                v = float(text)
            except ValueError:
                raise MatrixMarketError(f"cannot parse value {text!r}", no) from None
            if not np.isfinite(v):
                raise MatrixMarketError("non-finite value", no)
            rs.append(i)
            cs.append(j)
            vs.append(v)
            if symmetry == "symmetric" and i != j:
                rs.append(j)
                cs.append(i)
                vs.append(v)
    return from_triplets(nrows, ncols, rs, cs, vs, layout)


def write_matrix_market(path, m: Matrix) -> None:
    """Write ``m`` as a general real coordinate file."""
    sp = m if isinstance(m, SparseMatrix) else from_dense(m)
    r, c, v = sp.triplets()
    with open(Path(path), "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{sp.rows} {sp.cols} {sp.nnz}\n")
        for i, j, x in zip(r.tolist(), c.tolist(), v.tolist()):
            fh.write(f"{i + 1} {j + 1} {x!r}\n")
