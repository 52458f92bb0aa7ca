"""Binary container for plain and recoverable sketches.

Layout (all little-endian)::

    magic      4s   b"CMMS"
    version    u16
    mode       u8   0 = plain, 1 = recoverable
    signs      u8   sign independence (2 or 4)
    n1 n2 n3   3 x u64
    b d        2 x u32
    seed       u64
    -- recoverable only --
    ell        u32
    delta      2 x u32 (numerator, denominator)
    code seed  u64
    -- payload --
    d * F * b float64, F = 1 (plain) or 2 * ell + 1, repetition-major

Codes are rebuilt from the code seed on load; construction is
deterministic for a given seed and length.
"""

from __future__ import annotations

import struct
from fractions import Fraction

import numpy as np

from .hashing import derive_seed
from .recovery import RecoverableSketch, build_code
from .sketch import SketchParams, SketchSet

MAGIC = b"CMMS"
VERSION = 1
PLAIN, RECOVERABLE = 0, 1

_HEAD = struct.Struct("<4sHBB3QIIQ")
_RECOVERY = struct.Struct("<IIIQ")


class SketchFileError(ValueError):
    pass


def dumps(sk) -> bytes:
    n1, n2, n3 = sk.dims
    p = sk.params
    mode = RECOVERABLE if isinstance(sk, RecoverableSketch) else PLAIN
    parts = [_HEAD.pack(MAGIC, VERSION, mode, p.sign_independence, n1, n2, n3,
                        p.buckets, sk.coeff.shape[0], p.seed)]
    if mode == RECOVERABLE:
        delta = sk.row_code.delta
        parts.append(_RECOVERY.pack(sk.ell, delta.numerator, delta.denominator, sk.code_seed))
    parts.append(np.ascontiguousarray(sk.coeff, dtype="<f8").tobytes())
    return b"".join(parts)


def loads(blob: bytes):
    if len(blob) < _HEAD.size:
        raise SketchFileError("truncated header")
    magic, version, mode, signs, n1, n2, n3, nb, d, seed = _HEAD.unpack_from(blob, 0)
    if magic != MAGIC:
        raise SketchFileError("not a sketch file (bad magic)")
    if version != VERSION:
        raise SketchFileError(f"unsupported format version {version}")
    if mode not in (PLAIN, RECOVERABLE):
        raise SketchFileError(f"unknown mode {mode}")
    offset = _HEAD.size
    params = SketchParams(nb, d, seed, signs)
    if params.buckets != nb:
        raise SketchFileError("bucket count is not a power of two")
    nfam = 1
    if mode == RECOVERABLE:
        if len(blob) < offset + _RECOVERY.size:
            raise SketchFileError("truncated recovery header")
        ell, num, den, code_seed = _RECOVERY.unpack_from(blob, offset)
        offset += _RECOVERY.size
        nfam = 2 * ell + 1
    expected = d * nfam * nb * 8
    if len(blob) - offset != expected:
        raise SketchFileError(f"payload has {len(blob) - offset} bytes, header implies {expected}")
    coeff = np.frombuffer(blob, dtype="<f8", count=d * nfam * nb, offset=offset).astype(np.float64)
    if mode == PLAIN:
        return SketchSet((n1, n2, n3), params, coeff.reshape(d, nb))
    delta = Fraction(num, den)
    row_code = build_code(n1, delta, derive_seed(code_seed, 0), ell)
    col_code = build_code(n3, delta, derive_seed(code_seed, 1), ell)
    return RecoverableSketch((n1, n2, n3), params, coeff.reshape(d, nfam, nb),
                             row_code, col_code, code_seed)


def save(path, sk) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(sk))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
