"""Iterative radix-2 FFT for power-of-two lengths.

Forward transform uses ``omega = exp(-2*pi*i/b)``; the inverse conjugates
and divides by ``b``. Batched inputs are transformed along the last axis.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numba import njit

from .hashing import is_power_of_two


@lru_cache(maxsize=None)
def fft_tables(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bit-reversal permutation plus forward and inverse stage twiddles.

    Stage with half-width ``h`` reads its ``h`` twiddles from offset ``h - 1``.
    """
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for k in range(bits):
        rev |= ((idx >> k) & 1) << (bits - 1 - k)
    parts = [np.ones(1, dtype=np.complex128)]
    half = 2
    while half < n:
        parts.append(np.exp(-1j * np.pi * np.arange(half) / half))
        half *= 2
    fwd = np.concatenate(parts)
    inv = np.conj(fwd)
    for arr in (rev, fwd, inv):
        arr.setflags(write=False)
    return rev, fwd, inv


@njit(cache=True, nogil=True)
def fft_inplace(x, rev, tw):
    """Unnormalized in-place transform of the 1-D complex array ``x``.

    Pass the forward or the inverse twiddle table from :func:`fft_tables`.
    """
    n = x.shape[0]
    for i in range(n):
        j = rev[i]
        if i < j:
            tmp = x[i]
            x[i] = x[j]
            x[j] = tmp
    for start in range(0, n, 2):
        u = x[start]
        v = x[start + 1]
        x[start] = u + v
        x[start + 1] = u - v
    half = 2
    while half < n:
        base = half - 1
        for start in range(0, n, 2 * half):
            for m in range(half):
                u = x[start + m]
                v = x[start + m + half] * tw[base + m]
                x[start + m] = u + v
                x[start + m + half] = u - v
        half *= 2


@njit(cache=True, nogil=True)
def _fft_rows(x, rev, tw):
    for r in range(x.shape[0]):
        fft_inplace(x[r], rev, tw)


def _check_length(n: int) -> None:
    if n < 2 or not is_power_of_two(n):
        raise ValueError(f"FFT length must be a power of two >= 2, got {n}")


def _transform(v, inverse: bool) -> np.ndarray:
    arr = np.array(v, dtype=np.complex128, copy=True)
    if arr.ndim == 0:
        raise ValueError("FFT input must be a vector")
    n = arr.shape[-1]
    _check_length(n)
    rev, fwd, inv = fft_tables(n)
    flat = np.ascontiguousarray(arr.reshape(-1, n))
    _fft_rows(flat, rev, inv if inverse else fwd)
    if inverse:
        flat /= n
    return flat.reshape(arr.shape)


def fft_forward(v) -> np.ndarray:
    return _transform(v, inverse=False)


def fft_inverse(v) -> np.ndarray:
    return _transform(v, inverse=True)


def cyclic_convolve(u, v) -> np.ndarray:
    """``out[k] = sum over i + j == k (mod b) of u[i] * v[j]`` for real inputs."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return fft_inverse(fft_forward(u) * fft_forward(v)).real
