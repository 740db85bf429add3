"""Super-resolution, deblurring, and denoising corruptions.

Resampling and blurring are separable, so each is expressed as a pair of
dense ``(out, in)`` operator matrices applied to rows and columns. Borders
use half-sample symmetric reflection (``d c b a | a b c d | d c b a``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from mfm.spectral import image_spectrum

DEFAULT_KERNEL_SIZES = (7, 9, 11, 13, 15, 17, 19, 21)
SR_SCALES = (2, 4, 8, 16)


class DegradeTask(enum.Enum):
    SR = "sr"
    DEBLUR = "deblur"
    DENOISE = "denoise"


@dataclass(frozen=True)
class DegradeConfig:
    task: DegradeTask = DegradeTask.SR
    sr_scale: int = 8
    blur_sigma: float = 5.0
    blur_kernel_choices: tuple[int, ...] = field(default=DEFAULT_KERNEL_SIZES)
    noise_sigma: float = 75.0

    def __post_init__(self):
        if self.sr_scale < 2:
            raise ValueError(f"sr_scale must be >= 2, got {self.sr_scale}")
        if self.blur_sigma <= 0 or self.noise_sigma <= 0:
            raise ValueError("sigmas must be positive")
        if not self.blur_kernel_choices:
            raise ValueError("need at least one blur kernel size")
        for k in self.blur_kernel_choices:
            if k < 3 or k % 2 == 0:
                raise ValueError(f"blur kernel sizes must be odd and >= 3, got {k}")


def reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Fold arbitrary integer indices into ``[0, n)`` by half-sample reflection."""
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def cubic_kernel(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution kernel; ``a = -0.5`` is Catmull-Rom."""
    x = np.abs(x)
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


@lru_cache(maxsize=128)
def resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` bicubic resampling operator with pixel-center alignment.

    When shrinking, the kernel is stretched by the scale factor so it
    low-passes before decimating. Rows are normalized to sum to 1.
    """
    scale = n_out / n_in
    support = 2.0 / min(scale, 1.0)
    centers = (np.arange(n_out) + 0.5) / scale - 0.5
    first = np.floor(centers - support).astype(int) + 1
    taps = int(math.ceil(2 * support)) + 1
    src = first[:, None] + np.arange(taps)[None, :]
    dist = centers[:, None] - src
    wts = cubic_kernel(dist * min(scale, 1.0))
    wts /= wts.sum(axis=1, keepdims=True)
    mat = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), taps)
    np.add.at(mat, (rows, reflect_index(src, n_in).ravel()), wts.ravel())
    mat.setflags(write=False)
    return mat


def resize(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bicubic resize of an ``(H, W, C)`` image (unclipped)."""
    rh = resize_matrix(image.shape[0], height)
    rw = resize_matrix(image.shape[1], width)
    return np.einsum("ij,jkc,lk->ilc", rh, image, rw, optimize=True)


def degrade_sr(image: np.ndarray, scale: int) -> np.ndarray:
    """Bicubic downsample by ``scale`` then upsample back to the input size."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    if scale < 2:
        raise ValueError(f"scale must be >= 2, got {scale}")
    if h < scale or w < scale:
        raise ValueError(f"image {h}x{w} is smaller than scale {scale}")
    small = resize(image, max(1, round(h / scale)), max(1, round(w / scale)))
    return np.clip(resize(small, h, w), 0.0, 1.0)


def gaussian_kernel_1d(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - size // 2
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def gaussian_kernel_2d(size: int, sigma: float) -> np.ndarray:
    """Normalized truncated isotropic Gaussian; equal to the outer product of 1D kernels."""
    g = gaussian_kernel_1d(size, sigma)
    return np.outer(g, g)


@lru_cache(maxsize=128)
def blur_matrix(n: int, size: int, sigma: float) -> np.ndarray:
    g = gaussian_kernel_1d(size, sigma)
    half = size // 2
    src = np.arange(n)[:, None] + np.arange(-half, half + 1)[None, :]
    mat = np.zeros((n, n))
    rows = np.repeat(np.arange(n), size)
    np.add.at(mat, (rows, reflect_index(src, n).ravel()), np.tile(g, n))
    mat.setflags(write=False)
    return mat


def gaussian_blur(image: np.ndarray, size: int, sigma: float) -> np.ndarray:
    bh = blur_matrix(image.shape[0], size, sigma)
    bw = blur_matrix(image.shape[1], size, sigma)
    return np.einsum("ij,jkc,lk->ilc", bh, image, bw, optimize=True)


def degrade_blur(image: np.ndarray, sigma: float, rng: np.random.Generator,
                 kernel_choices=DEFAULT_KERNEL_SIZES) -> np.ndarray:
    """Gaussian blur with a kernel size drawn uniformly from ``kernel_choices``; clipped."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    size = int(kernel_choices[rng.integers(len(kernel_choices))])
    image = np.asarray(image, dtype=np.float64)
    return np.clip(gaussian_blur(image, size, sigma), 0.0, 1.0)


def degrade_noise(image: np.ndarray, sigma255: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Gaussian noise with std ``sigma255 / 255``; left unclipped."""
    if sigma255 <= 0:
        raise ValueError(f"sigma must be positive, got {sigma255}")
    image = np.asarray(image, dtype=np.float64)
    return image + rng.normal(0.0, sigma255 / 255.0, size=image.shape)


def degrade(image: np.ndarray, cfg: DegradeConfig, rng: np.random.Generator) -> np.ndarray:
    task = DegradeTask(cfg.task)
    if task is DegradeTask.SR:
        return degrade_sr(image, cfg.sr_scale)
    if task is DegradeTask.DEBLUR:
        return degrade_blur(image, cfg.blur_sigma, rng, cfg.blur_kernel_choices)
    return degrade_noise(image, cfg.noise_sigma, rng)


def outer_annulus(height: int, width: int, inner_fraction: float = 0.5) -> np.ndarray:
    """Centered-layout bins at least ``inner_fraction`` of the Nyquist radius from DC."""
    du = (np.arange(height) - height // 2)[:, None] / (height / 2)
    dv = (np.arange(width) - width // 2)[None, :] / (width / 2)
    return np.hypot(du, dv) >= inner_fraction


def mean_log_power(image: np.ndarray, region: np.ndarray | None = None) -> float:
    """Mean of ``log(1 + |F|^2)`` over the centered spectrum bins in ``region`` (all if None)."""
    spec = image_spectrum(image)
    logp = np.log1p(spec.real ** 2 + spec.imag ** 2)
    return float(logp.mean() if region is None else logp[:, region].mean())


def mean_power(image: np.ndarray) -> float:
    """Mean per-bin spectral power ``|F|^2`` over all bins and channels."""
    spec = image_spectrum(image)
    return float(np.mean(spec.real ** 2 + spec.imag ** 2))
