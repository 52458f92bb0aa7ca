"""Locating the large entries of a sketched product without a full scan.

Alongside the plain sketch we keep ``2L`` extra sketches built with the
same hash functions: sketch ``r`` (r < L) only sees rows ``i`` whose
codeword bit ``E(i)_r`` is set, sketch ``L + r`` only sees columns ``j``
with ``E(j)_r`` set. A bucket dominated by one heavy entry ``(i, j)``
therefore lights up exactly along ``E(i) || E(j)``, and decoding that bit
pattern names the entry.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .hashing import derive_seed
from .sketch import (
    SketchParams,
    SketchSet,
    decompress,
    sketch_coefficients,
)

NO_CODEWORD = -1

DEFAULT_DELTA = Fraction(1, 8)
DEFAULT_KAPPA = 40.0
DEFAULT_TRIES = 64

# salt for deriving code seeds from the sketch seed
_CODE_SALT = 0xC0DE


class CodeConstructionError(RuntimeError):
    pass


def _message_bits(x: np.ndarray, k: int) -> np.ndarray:
    return ((np.asarray(x)[:, None] >> np.arange(k)) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Code:
    """Injective map ``[n] -> {0,1}^L`` decodable within radius ``delta * L``.

    Codewords are ``offset XOR (x, x P)`` for the ``k``-bit binary message
    ``x``; construction certifies that distinct codewords, and every
    codeword and the all-zero string, differ in more than ``2 delta L`` bits.
    """

    n: int
    length: int
    delta: Fraction
    seed: int
    parity: np.ndarray      # k x (L - k)
    offset: np.ndarray      # L
    codewords: np.ndarray   # n x L, uint8
    decoder: str = "nearest"
    attempts: int = 1
    _packed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_packed", np.packbits(self.codewords, axis=1))

    @property
    def k(self) -> int:
        return self.parity.shape[0]

    @property
    def radius(self) -> int:
        return math.floor(self.delta * self.length)

    def encode(self, x: int) -> np.ndarray:
        return self.codewords[x].copy()

    def with_decoder(self, decoder: str) -> "Code":
        if decoder not in ("nearest", "bitflip"):
            raise ValueError(f"unknown decoder {decoder!r}")
        return replace(self, decoder=decoder)

    def decode(self, word) -> int:
        word = np.asarray(word, dtype=np.uint8)
        if word.shape != (self.length,):
            raise ValueError(f"word length {word.shape} != code length {self.length}")
        if self.decoder == "bitflip":
            return decode_bitflip(self, word)
        return int(self.decode_many(word[None, :])[0])

    def decode_many(self, words: np.ndarray) -> np.ndarray:
        """Nearest-codeword decoding of each row of ``words``."""
        words = np.asarray(words, dtype=np.uint8)
        if words.ndim != 2 or words.shape[1] != self.length:
            raise ValueError("words must have shape (m, code length)")
        if self.n == 1:
            return np.zeros(words.shape[0], dtype=np.int64)
        if self.decoder == "bitflip":
            return np.array([decode_bitflip(self, w) for w in words], dtype=np.int64)
        return self._nearest_many(words)

    def _nearest_many(self, words: np.ndarray) -> np.ndarray:
        m = words.shape[0]
        out = np.empty(m, dtype=np.int64)
        packed = np.packbits(words, axis=1)
        chunk = max(1, (1 << 22) // (self.n * packed.shape[1]))
        for lo in range(0, m, chunk):
            q = packed[lo:lo + chunk]
            dist = np.bitwise_count(q[:, None, :] ^ self._packed[None, :, :]).sum(axis=2)
            best = dist.argmin(axis=1)
            ok = dist[np.arange(len(q)), best] <= self.radius
            out[lo:lo + chunk] = np.where(ok, best, NO_CODEWORD)
        return out


def _certify(codewords: np.ndarray, msgs_all: np.ndarray, limit: Fraction) -> bool:
    # linear part: every nonzero message has weight > limit, so distinct
    # codewords differ in more than `limit` places
    if np.any(msgs_all[1:].sum(axis=1) <= limit):
        return False
    return not np.any(codewords.sum(axis=1) <= limit)


def default_code_length(n: int) -> int:
    return 4 * max(1, math.ceil(math.log2(max(n, 2))))


def _try_build(n: int, length: int, delta: Fraction, seed: int, max_tries: int) -> Code | None:
    k = max(1, math.ceil(math.log2(max(n, 2))))
    if length <= k:
        return None
    limit = 2 * delta * length
    all_msgs = _message_bits(np.arange(1 << k), k)
    for attempt in range(max_tries):
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(length, attempt)))
        parity = rng.integers(0, 2, size=(k, length - k), dtype=np.uint8)
        offset = rng.integers(0, 2, size=length, dtype=np.uint8)
        linear = np.concatenate([all_msgs, (all_msgs.astype(np.int64) @ parity) % 2], axis=1).astype(np.uint8)
        codewords = linear[:n] ^ offset
        if _certify(codewords, linear, limit):
            return Code(n, length, delta, int(seed), parity, offset, codewords, attempts=attempt + 1)
    return None


def build_code(n: int, delta=DEFAULT_DELTA, seed: int = 0, length: int | None = None,
               max_tries: int = DEFAULT_TRIES) -> Code:
    """Seeded random code with verified distance.

    With ``length=None`` the length starts at ``4 ceil(lg n)`` and grows by
    ``ceil(lg n)`` until a certified code is found.
    """
    if n < 1:
        raise ValueError("code domain must be non-empty")
    delta = Fraction(delta).limit_denominator(1 << 16)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if length is not None:
        code = _try_build(n, length, delta, seed, max_tries)
        if code is None:
            raise CodeConstructionError(
                f"no certified code of length {length} for n={n} after {max_tries} seeds")
        return code
    step = max(1, math.ceil(math.log2(max(n, 2))))
    start = default_code_length(n)
    for length in range(start, 16 * start + 1, step):
        code = _try_build(n, length, delta, seed, max_tries)
        if code is not None:
            return code
    raise CodeConstructionError(f"no certified code for n={n}")


def build_code_pair(n_rows: int, n_cols: int, delta=DEFAULT_DELTA, seed: int = 0,
                    max_tries: int = DEFAULT_TRIES) -> tuple[Code, Code]:
    """Row and column codes sharing one length."""
    step = max(1, math.ceil(math.log2(max(n_rows, n_cols, 2))))
    start = max(default_code_length(n_rows), default_code_length(n_cols))
    row_seed, col_seed = derive_seed(seed, 0), derive_seed(seed, 1)
    for length in range(start, 16 * start + 1, step):
        try:
            return (build_code(n_rows, delta, row_seed, length, max_tries),
                    build_code(n_cols, delta, col_seed, length, max_tries))
        except CodeConstructionError:
            continue
    raise CodeConstructionError(f"no certified code pair for {n_rows}x{n_cols}")


def decode(code: Code, word) -> int:
    return code.decode(word)


def decode_bitflip(code: Code, word: np.ndarray) -> int:
    """Gallager-style bit flipping on the parity checks, then verification.

    Falls back to table lookup when flipping does not reach a codeword
    within the decoding radius, so the answer always matches the
    nearest-codeword decoder.
    """
    if code.n == 1:
        return 0
    k, length = code.k, code.length
    # H = [P^T | I], syndrome of y is H y
    checks = np.concatenate([code.parity.T, np.eye(length - k, dtype=np.uint8)], axis=1).astype(np.int64)
    y = (np.asarray(word, dtype=np.uint8) ^ code.offset).astype(np.int64)
    syndrome = checks @ y % 2
    for _ in range(length):
        if not syndrome.any():
            break
        unsatisfied = syndrome @ checks
        j = int(unsatisfied.argmax())
        if unsatisfied[j] == 0:
            break
        y[j] ^= 1
        syndrome = (syndrome + checks[:, j]) % 2
    if not syndrome.any():
        x = int(np.dot(y[:k], 1 << np.arange(k)))
        if x < code.n and np.count_nonzero(code.codewords[x] != word) <= code.radius:
            return x
    return int(code._nearest_many(np.asarray(word, dtype=np.uint8)[None, :])[0])


# ---------------------------------------------------------------- sketches


@dataclass(frozen=True)
class RecoverableSketch:
    """Plain sketch plus ``2L`` code-masked sketches sharing its hashes.

    ``coeff[t, 0]`` is the unmasked sketch, ``coeff[t, 1 + r]`` row-masked by
    bit ``r`` and ``coeff[t, 1 + L + r]`` column-masked by bit ``r``.
    """

    dims: tuple[int, int, int]
    params: SketchParams
    coeff: np.ndarray  # (d, 2L + 1, b)
    row_code: Code
    col_code: Code
    code_seed: int = 0

    @property
    def ell(self) -> int:
        return self.row_code.length

    @property
    def reps(self) -> int:
        return self.coeff.shape[0]

    @property
    def buckets(self) -> int:
        return self.params.buckets

    @property
    def base(self) -> SketchSet:
        return SketchSet(self.dims, self.params, self.coeff[:, 0, :])

    def with_coeff(self, coeff: np.ndarray) -> "RecoverableSketch":
        return replace(self, coeff=coeff)


def compressed_product_recoverable(a, b, params: SketchParams, codes: tuple[Code, Code] | None = None,
                                   delta=DEFAULT_DELTA, code_seed: int | None = None,
                                   threads: int = 1) -> RecoverableSketch:
    """Sketch ``a @ b`` together with its ``2L`` code-masked variants.

    Masking skips terms inside the outer-product loop; the masked operands
    are never formed.
    """
    from .matrix import shape_of

    n1, _ = shape_of(a)
    _, n3 = shape_of(b)
    if code_seed is None:
        code_seed = derive_seed(params.seed, _CODE_SALT)
    if codes is None:
        codes = build_code_pair(n1, n3, delta, code_seed)
    row_code, col_code = codes
    if row_code.n != n1 or col_code.n != n3 or row_code.length != col_code.length:
        raise ValueError("codes do not match the product dimensions")
    dims, params, coeff = sketch_coefficients(a, b, params, row_code.codewords, col_code.codewords,
                                              threads=threads)
    return RecoverableSketch(dims, params, coeff, row_code, col_code, int(code_seed))


def subtract_entries(sk, rows, cols, values):
    """Remove known entries ``values`` at ``(rows, cols)`` from every sketch.

    Works on :class:`SketchSet` and :class:`RecoverableSketch`; the result
    is the sketch of the product with those entries subtracted.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    coeff = sk.coeff.copy()
    recoverable = isinstance(sk, RecoverableSketch)
    families = sk.params.families()
    for t, fam in enumerate(families):
        buckets = fam.split(rows, cols)
        contrib = fam.sign(rows, cols) * values
        if not recoverable:
            np.add.at(coeff[t], buckets, -contrib)
            continue
        length = sk.ell
        np.add.at(coeff[t, 0], buckets, -contrib)
        row_bits = sk.row_code.codewords[rows]
        col_bits = sk.col_code.codewords[cols]
        for r in range(length):
            sel = row_bits[:, r] == 1
            np.add.at(coeff[t, 1 + r], buckets[sel], -contrib[sel])
            sel = col_bits[:, r] == 1
            np.add.at(coeff[t, 1 + length + r], buckets[sel], -contrib[sel])
    return sk.with_coeff(coeff)


# ---------------------------------------------------------------- search


@dataclass(frozen=True)
class CandidateSet:
    counts: dict
    threshold: float
    reps: int

    @property
    def positions(self) -> list[tuple[int, int]]:
        return sorted(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __contains__(self, pos) -> bool:
        return tuple(pos) in self.counts

    def __iter__(self):
        return iter(self.positions)


def find_significant_entries(rsk: RecoverableSketch, threshold: float) -> CandidateSet:
    """Positions that decode cleanly in at least half of the repetitions.

    Buckets where no masked sketch exceeds ``threshold / 2`` carry no
    signal and are skipped instead of being decoded.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    length = rsk.ell
    d = rsk.reps
    bits = np.abs(rsk.coeff[:, 1:, :]) > threshold / 2      # (d, 2L, b)
    words = np.transpose(bits, (0, 2, 1))                    # (d, b, 2L)
    active = words.any(axis=2)
    found: Counter = Counter()
    if active.any():
        sel = words[active].astype(np.uint8)
        rows = rsk.row_code.decode_many(sel[:, :length])
        cols = rsk.col_code.decode_many(sel[:, length:])
        ok = (rows != NO_CODEWORD) & (cols != NO_CODEWORD)
        found.update(zip(rows[ok].tolist(), cols[ok].tolist()))
    kept = {pos: c for pos, c in found.items() if c >= d / 2}
    return CandidateSet(kept, float(threshold), d)


def extract_sparse_approx(rsk: RecoverableSketch, threshold: float,
                          candidates: CandidateSet | None = None) -> list[tuple[int, int, float]]:
    """``(i, j, estimate)`` for each significant position, largest first."""
    if candidates is None:
        candidates = find_significant_entries(rsk, threshold)
    base = rsk.base
    out = [(i, j, decompress(base, i, j).value) for i, j in candidates.positions]
    out.sort(key=lambda e: (-abs(e[2]), e[0], e[1]))
    return out


def default_threshold(a, b, buckets: int, kappa: float = DEFAULT_KAPPA, reps: int | None = None,
                      seed: int = 0) -> float:
    """``kappa * sqrt(F / b)`` with ``F`` an upper bound on ``|AB|_F^2``.

    Conservative: the bound covers the whole product, not just its tail.
    """
    from .estimate import estimate_frobenius_ub

    est = estimate_frobenius_ub(a, b, reps, seed)
    return kappa * math.sqrt(est.upper_bound / buckets)
