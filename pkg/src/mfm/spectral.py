"""2D discrete Fourier transform, inverse, and center shifts.

Transforms act on the last two axes, so a single channel ``(H, W)`` and a
batch ``(N, C, H, W)`` go through the same code path. The forward transform
is unnormalized and the inverse carries the ``1/(H*W)`` factor.

Power-of-two lengths use an iterative radix-2 Cooley-Tukey pass. Other
lengths use a direct DFT matrix below 32 samples and Bluestein's chirp-z
algorithm above that.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

DIRECT_DFT_MAX = 32
REFERENCE_MAX_SIZE = 4096
RADIX2_LEAF = 16


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@lru_cache(maxsize=None)
def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size: int) -> np.ndarray:
    k = np.arange(size // 2)
    tw = np.exp(-2j * np.pi * k / size)
    tw.setflags(write=False)
    return tw


@lru_cache(maxsize=None)
def _dft_matrix(n: int) -> np.ndarray:
    jk = np.outer(np.arange(n), np.arange(n)) % n
    mat = np.exp(-2j * np.pi * jk / n)
    mat.setflags(write=False)
    return mat


def _radix2(x: np.ndarray) -> np.ndarray:
    """Iterative decimation-in-time FFT for power-of-two lengths.

    The first stages are collapsed into direct ``RADIX2_LEAF``-point DFTs of
    the stride-``n / leaf`` subsequences, which is the state the butterflies
    would reach after ``log2(leaf)`` passes.
    """
    n = x.shape[-1]
    lead = x.shape[:-1]
    leaf = min(n, RADIX2_LEAF)
    m = n // leaf
    sub = np.swapaxes(x.reshape(*lead, leaf, m), -1, -2) @ _dft_matrix(leaf).T
    x = sub[..., _bitrev(m), :].reshape(*lead, n)
    size = 2 * leaf
    while size <= n:
        half = size // 2
        blocks = x.reshape(*lead, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(size)
        x = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        size *= 2
    return x


@lru_cache(maxsize=None)
def _bluestein_plan(n: int) -> tuple[np.ndarray, np.ndarray, int]:
    m = 1
    while m < 2 * n - 1:
        m *= 2
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp phase small and accurate for large n
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    b_hat = _radix2(b)
    chirp.setflags(write=False)
    b_hat.setflags(write=False)
    return chirp, b_hat, m


def _bluestein(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    chirp, b_hat, m = _bluestein_plan(n)
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * chirp
    conv = _fft_last(_radix2(a) * b_hat, inverse=True)
    return conv[..., :n] * chirp


def _fft_last(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """1D DFT along the last axis (inverse includes the 1/n factor)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if inverse:
        return np.conj(_fft_last(np.conj(x))) / n
    if n == 1:
        return x.copy()
    if _is_pow2(n):
        return _radix2(x)
    if n < DIRECT_DFT_MAX:
        return x @ _dft_matrix(n).T
    return _bluestein(x)


def _fft2(x: np.ndarray, inverse: bool) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 2:
        raise ValueError(f"expected at least 2 dims, got shape {x.shape}")
    if 0 in x.shape[-2:]:
        raise ValueError(f"empty grid {x.shape[-2:]}")
    out = _fft_last(x, inverse)
    out = _fft_last(np.swapaxes(out, -1, -2), inverse)
    return np.swapaxes(out, -1, -2)


def dft2(channel: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT over the last two axes; DC lands at ``[..., 0, 0]``."""
    return _fft2(channel, inverse=False)


def idft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse 2D DFT with ``1/(H*W)`` scaling, so ``idft2(dft2(g)) == g``.

    The result is complex; callers that started from a real image keep
    ``.real``.
    """
    return _fft2(spectrum, inverse=True)


def fftshift(spectrum: np.ndarray) -> np.ndarray:
    """Move DC from ``(0, 0)`` to ``(H // 2, W // 2)``."""
    h, w = spectrum.shape[-2:]
    return np.roll(spectrum, (h // 2, w // 2), axis=(-2, -1))


def ifftshift(spectrum: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`fftshift` for odd and even sizes."""
    h, w = spectrum.shape[-2:]
    return np.roll(spectrum, (-(h // 2), -(w // 2)), axis=(-2, -1))


def reference_dft2(channel: np.ndarray) -> np.ndarray:
    """Direct double-sum evaluation of the 2D DFT, for testing only.

    Cost is O((H*W)^2), so grids are capped at 4096 samples.
    """
    x = np.asarray(channel, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"reference_dft2 takes a single 2D channel, got shape {x.shape}")
    h, w = x.shape
    if h * w > REFERENCE_MAX_SIZE:
        raise ValueError(f"grid {h}x{w} exceeds the reference size cap of {REFERENCE_MAX_SIZE}")
    hh = np.arange(h)[:, None]
    ww = np.arange(w)[None, :]
    out = np.empty((h, w), dtype=np.complex128)
    for u in range(h):
        row_phase = ((u * hh) % h) / h
        for v in range(w):
            phase = row_phase + ((v * ww) % w) / w
            out[u, v] = np.sum(x * np.exp(-2j * np.pi * phase))
    return out


def log_power_map(spectrum: np.ndarray) -> np.ndarray:
    """``log(1 + |F|)`` rescaled to [0, 1]; a flat spectrum maps to zeros."""
    mag = np.log1p(np.abs(spectrum))
    lo, hi = mag.min(), mag.max()
    if hi <= lo:
        return np.zeros(mag.shape, dtype=np.float64)
    return (mag - lo) / (hi - lo)


def image_spectrum(image: np.ndarray) -> np.ndarray:
    """Per-channel centered spectra of an ``(H, W, C)`` image, shape ``(C, H, W)``."""
    return fftshift(dft2(np.moveaxis(np.asarray(image, dtype=np.float64), -1, 0)))
