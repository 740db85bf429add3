"""Binary low-/high-pass spectrum masks and frequency-domain image corruption.

Masks live in the centered layout produced by :func:`mfm.spectral.fftshift`,
so the DC bin sits at ``(H // 2, W // 2)``. Bit 1 keeps a frequency, bit 0
removes it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from mfm.spectral import dft2, fftshift, idft2, ifftshift

REFERENCE_RESOLUTION = 224
REFERENCE_RADIUS = 16


class MaskShape(enum.Enum):
    CIRCLE = "circle"
    SQUARE = "square"
    RHOMBUS = "rhombus"


class MaskKind(enum.Enum):
    LOW_PASS = "low"
    HIGH_PASS = "high"


class DimensionMismatchError(ValueError):
    pass


def default_radius(height: int, width: int) -> int:
    """Scale the reference radius (16 at 224 px) to another resolution."""
    r = math.floor(REFERENCE_RADIUS * min(height, width) / REFERENCE_RESOLUTION + 0.5)
    return max(1, r)


@dataclass(frozen=True)
class MaskConfig:
    """How :func:`sample_filter` draws a mask.

    ``radius`` is an int for a fixed radius, an inclusive ``(lo, hi)`` pair for
    a uniformly drawn one, or None to use :func:`default_radius`.
    ``p`` is the probability of drawing a low-pass filter.
    """

    shape: MaskShape = MaskShape.CIRCLE
    radius: int | tuple[int, int] | None = None
    p: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        r = self.radius
        if isinstance(r, tuple):
            lo, hi = r
            if lo < 1 or hi < lo:
                raise ValueError(f"invalid radius range {r}")
        elif r is not None and r < 1:
            raise ValueError(f"radius must be >= 1, got {r}")


@dataclass(frozen=True)
class FrequencyMask:
    bits: np.ndarray
    kind: MaskKind
    radius: int
    shape: MaskShape = MaskShape.CIRCLE

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def complement(self) -> FrequencyMask:
        other = MaskKind.HIGH_PASS if self.kind is MaskKind.LOW_PASS else MaskKind.LOW_PASS
        return build_mask(self.shape, self.radius, other, self.height, self.width)


def _distance(shape: MaskShape, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    if shape is MaskShape.CIRCLE:
        return np.sqrt(du * du + dv * dv)
    if shape is MaskShape.SQUARE:
        return np.maximum(np.abs(du), np.abs(dv))
    return np.abs(du) + np.abs(dv)


@lru_cache(maxsize=256)
def _mask_bits(shape: MaskShape, radius: int, kind: MaskKind, height: int, width: int) -> np.ndarray:
    du = (np.arange(height) - height // 2)[:, None].astype(np.float64)
    dv = (np.arange(width) - width // 2)[None, :].astype(np.float64)
    inside = _distance(shape, du, dv) < radius
    bits = inside if kind is MaskKind.LOW_PASS else ~inside
    bits = bits.astype(np.float64)
    # shared between callers through the cache
    bits.setflags(write=False)
    return bits


def build_mask(shape: MaskShape, radius: int, kind: MaskKind, height: int, width: int) -> FrequencyMask:
    """Low-pass keeps bins strictly closer than ``radius`` to the center; high-pass is the complement."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if height < 1 or width < 1:
        raise ValueError(f"invalid mask size {height}x{width}")
    shape, kind = MaskShape(shape), MaskKind(kind)
    return FrequencyMask(_mask_bits(shape, int(radius), kind, int(height), int(width)), kind, int(radius), shape)


def sample_filter(config: MaskConfig, rng: np.random.Generator, height: int, width: int) -> FrequencyMask:
    """Draw low-pass with probability ``config.p``, else high-pass."""
    kind = MaskKind.LOW_PASS if rng.random() < config.p else MaskKind.HIGH_PASS
    r = config.radius
    if r is None:
        r = default_radius(height, width)
    elif isinstance(r, tuple):
        r = int(rng.integers(r[0], r[1] + 1))
    return build_mask(config.shape, r, kind, height, width)


def _check_dims(image: np.ndarray, mask: FrequencyMask):
    if image.shape[:2] != mask.bits.shape:
        raise DimensionMismatchError(f"image {image.shape[:2]} vs mask {mask.bits.shape}")


def filter_channels(channels: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Apply centered-layout mask ``bits`` to ``(..., H, W)`` channels.

    Returns the complex inverse transform; the imaginary part is only
    round-off residue for real inputs.
    """
    spectrum = fftshift(dft2(channels)) * bits
    return idft2(ifftshift(spectrum))


def corrupt_image(image: np.ndarray, mask: FrequencyMask) -> np.ndarray:
    """Filter each channel of an ``(H, W, C)`` image with ``mask``. Not clipped."""
    image = np.asarray(image, dtype=np.float64)
    _check_dims(image, mask)
    out = filter_channels(np.moveaxis(image, -1, 0), mask.bits).real
    return np.ascontiguousarray(np.moveaxis(out, 0, -1))


def corrupt_batch(images: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Filter an ``(N, H, W, C)`` batch with per-image masks ``(N, H, W)``."""
    chans = np.moveaxis(images, -1, 1)
    out = filter_channels(chans, bits[:, None]).real
    return np.ascontiguousarray(np.moveaxis(out, 1, -1))


def imaginary_residue(image: np.ndarray, mask: FrequencyMask) -> float:
    """Largest imaginary magnitude discarded by :func:`corrupt_image`."""
    image = np.asarray(image, dtype=np.float64)
    _check_dims(image, mask)
    return float(np.abs(filter_channels(np.moveaxis(image, -1, 0), mask.bits).imag).max())


def decompose(image: np.ndarray, shape: MaskShape, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Split an image into its low-pass and high-pass parts for one radius."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    low = corrupt_image(image, build_mask(shape, radius, MaskKind.LOW_PASS, h, w))
    high = corrupt_image(image, build_mask(shape, radius, MaskKind.HIGH_PASS, h, w))
    return low, high
