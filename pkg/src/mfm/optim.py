"""AdamW with decoupled weight decay, global-norm clipping, and a warmup + cosine schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mfm.model import Model


@dataclass(frozen=True)
class AdamWConfig:
    betas: tuple[float, float] = (0.9, 0.95)
    eps: float = 1e-8
    weight_decay: float = 0.05

    def __post_init__(self):
        b1, b2 = self.betas
        if not (0 < b1 < 1 and 0 < b2 < 1):
            raise ValueError(f"betas must lie in (0, 1), got {self.betas}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> OptimizerState:
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def lr_schedule(step: int, total_steps: int, warmup_steps: int, peak_lr: float) -> float:
    """Linear warmup from 0 to ``peak_lr``, then half-cosine decay reaching 0 at ``total_steps``."""
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    if step < warmup_steps:
        return peak_lr * step / warmup_steps
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def global_norm(grads: list[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads))


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    """Rescale ``grads`` so their joint L2 norm is at most ``max_norm``; returns the pre-clip norm too."""
    norm = global_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


def adamw_step(params: list[np.ndarray], grads: list[np.ndarray], state: OptimizerState,
               lr: float, cfg: AdamWConfig, decay_mask: list[bool] | None = None) -> None:
    """One bias-corrected AdamW update, in place on ``params`` and ``state``.

    ``decay_mask`` selects which tensors get weight decay (all by default).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state disagree in length")
    b1, b2 = cfg.betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch at tensor {i}: {p.shape} vs {g.shape}")
        if cfg.weight_decay and (decay_mask is None or decay_mask[i]):
            p -= lr * cfg.weight_decay * p
        m, v = state.m[i], state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def model_decay_mask(model: Model) -> list[bool]:
    """Weights decay, biases do not."""
    return [i % 2 == 0 for i in range(len(model.params))]

