"""Frequency reconstruction loss, its analytic gradient, and spatial baselines.

The per-bin frequency distance between a prediction and its target is
``((dRe)^2 + (dIm)^2) ** (gamma / 2)`` on the centered spectra. The loss
averages it over the bins a mask removed (``MASKED``) or over every bin
(``FULL``), then averages across channels.

Since the DFT is linear, the prediction's spectrum minus the target's is the
spectrum of ``pred - target``, and the gradient with respect to the pixels is

    H * W * Re(idft2(weight * gamma * |D|^(gamma - 2) * D)) / C

where ``D`` is the difference spectrum and ``weight`` is ``1/count`` on
scored bins. For ``gamma < 2`` bins with ``|D| < epsilon`` are given zero
gradient.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from mfm.masking import DimensionMismatchError, FrequencyMask
from mfm.spectral import dft2, fftshift, idft2, ifftshift


class TargetArea(enum.Enum):
    MASKED = "masked"
    FULL = "full"


class SpatialNorm(enum.Enum):
    L1 = "l1"
    L2 = "l2"


class EmptyMaskAreaError(ValueError):
    """Raised when a masked-only loss is asked for on a mask that removes nothing."""


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 1.0
    epsilon: float = 1e-8
    target_area: TargetArea = TargetArea.MASKED

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def freq_distance_map(pred_spec: np.ndarray, target_spec: np.ndarray, gamma: float) -> np.ndarray:
    if pred_spec.shape != target_spec.shape:
        raise DimensionMismatchError(f"{pred_spec.shape} vs {target_spec.shape}")
    diff = pred_spec - target_spec
    sq = diff.real ** 2 + diff.imag ** 2
    return sq ** (0.5 * gamma)


def _score_weights(bits: np.ndarray | None, shape: tuple[int, ...], cfg: LossConfig) -> np.ndarray:
    """Per-bin averaging weights, broadcastable to ``(N, 1, H, W)``."""
    n, h, w = shape[0], shape[-2], shape[-1]
    if cfg.target_area is TargetArea.FULL or bits is None:
        return np.full((n, 1, h, w), 1.0 / (h * w))
    scored = 1.0 - np.broadcast_to(bits, (n, h, w))
    counts = scored.sum(axis=(-2, -1))
    if np.any(counts == 0):
        raise EmptyMaskAreaError("mask keeps every frequency; nothing to score")
    return (scored / counts[:, None, None])[:, None]


def batch_freq_loss(pred: np.ndarray, target: np.ndarray, bits: np.ndarray | None,
                    cfg: LossConfig, with_grad: bool = True):
    """Per-image losses (and pixel gradients) for ``(N, H, W, C)`` batches.

    ``bits`` is ``(N, H, W)`` or ``(H, W)`` in centered layout, or None for
    full-spectrum scoring. Returns ``(losses, grad)`` with ``losses`` of shape
    ``(N,)``; ``grad`` is None when ``with_grad`` is false.
    """
    if pred.shape != target.shape:
        raise DimensionMismatchError(f"{pred.shape} vs {target.shape}")
    diff = np.moveaxis(np.asarray(pred, dtype=np.float64) - target, -1, 1)
    n, c, h, w = diff.shape
    weights = _score_weights(bits, diff.shape, cfg)
    spec = fftshift(dft2(diff))
    sq = spec.real ** 2 + spec.imag ** 2
    dist = sq ** (0.5 * cfg.gamma)
    losses = (dist * weights).sum(axis=(-2, -1)).mean(axis=1)
    if not with_grad:
        return losses, None
    if cfg.gamma == 2.0:
        scale = 2.0 * weights
    else:
        mod = np.sqrt(sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = cfg.gamma * mod ** (cfg.gamma - 2.0)
        if cfg.gamma < 2.0:
            scale = np.where(mod < cfg.epsilon, 0.0, scale)
        scale = scale * weights
    g = idft2(ifftshift(scale * spec)).real * (h * w / c)
    return losses, np.ascontiguousarray(np.moveaxis(g, 1, -1))


def _prep(pred, target, mask, cfg):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionMismatchError(f"{pred.shape} vs {target.shape}")
    bits = None
    if mask is not None:
        if mask.bits.shape != pred.shape[:2]:
            raise DimensionMismatchError(f"image {pred.shape[:2]} vs mask {mask.bits.shape}")
        bits = mask.bits
    elif cfg.target_area is TargetArea.MASKED:
        raise ValueError("masked-only loss needs a mask")
    return pred[None], target[None], bits


def masked_freq_loss(pred: np.ndarray, target: np.ndarray, mask: FrequencyMask | None,
                     cfg: LossConfig = LossConfig()) -> float:
    """Frequency loss between two ``(H, W, C)`` images."""
    p, t, bits = _prep(pred, target, mask, cfg)
    losses, _ = batch_freq_loss(p, t, bits, cfg, with_grad=False)
    return float(losses[0])


def masked_freq_loss_grad(pred: np.ndarray, target: np.ndarray, mask: FrequencyMask | None,
                          cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Gradient of :func:`masked_freq_loss` with respect to ``pred``."""
    p, t, bits = _prep(pred, target, mask, cfg)
    _, grad = batch_freq_loss(p, t, bits, cfg)
    return grad[0]


def spatial_loss(pred: np.ndarray, target: np.ndarray, norm: SpatialNorm = SpatialNorm.L2) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != np.shape(target):
        raise DimensionMismatchError(f"{pred.shape} vs {np.shape(target)}")
    diff = pred - target
    if SpatialNorm(norm) is SpatialNorm.L1:
        return float(np.abs(diff).mean())
    return float((diff ** 2).mean())


def batch_spatial_loss(pred: np.ndarray, target: np.ndarray, norm: SpatialNorm):
    """Per-image spatial losses and their gradients for ``(N, H, W, C)`` batches."""
    diff = pred - target
    count = diff[0].size
    axes = tuple(range(1, diff.ndim))
    if SpatialNorm(norm) is SpatialNorm.L1:
        return np.abs(diff).mean(axis=axes), np.sign(diff) / count
    return (diff ** 2).mean(axis=axes), 2.0 * diff / count
