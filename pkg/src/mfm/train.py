"""Self-supervised pre-training loop.

Each step: augment a minibatch, corrupt it according to the pretext task,
predict the clean image, score the prediction with the frequency loss, then
clip gradients and take one AdamW step on a warmup + cosine schedule.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from mfm.data import SyntheticDataset, generate_dataset, random_resized_crop
from mfm.degradations import DegradeConfig, DegradeTask, degrade
from mfm.loss import LossConfig, SpatialNorm, TargetArea, batch_freq_loss, batch_spatial_loss
from mfm.masking import MaskConfig, corrupt_batch, sample_filter
from mfm.model import Model, ModelConfig, backward, forward, init_model, save_checkpoint
from mfm.optim import AdamWConfig, OptimizerState, adamw_step, clip_grad_norm, lr_schedule, model_decay_mask

log = logging.getLogger(__name__)


class Task(enum.Enum):
    MFM = "mfm"
    SR = "sr"
    DEBLUR = "deblur"
    DENOISE = "denoise"
    NONE = "none"


class LossKind(enum.Enum):
    FREQ = "freq"
    L1 = "l1"
    L2 = "l2"


class NumericError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class RunConfig:
    task: Task = Task.MFM
    seed: int = 0
    epochs: int = 30
    batch_size: int = 64
    peak_lr: float = 3e-3
    warmup_epochs: int = 2
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.95)
    adam_eps: float = 1e-8
    clip_norm: float = 3.0
    n_per_class: int = 200
    image_size: int = 32
    data_seed: int | None = None
    crop_scale: tuple[float, float] = (0.6, 1.0)
    flip_p: float = 0.5
    loss_kind: LossKind = LossKind.FREQ
    mask: MaskConfig = field(default_factory=MaskConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    degrade: DegradeConfig = field(default_factory=DegradeConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError(f"warmup_epochs must be in [0, epochs), got {self.warmup_epochs}")
        if self.peak_lr < 0:
            raise ValueError("peak_lr must be nonnegative")

    @property
    def model_config(self) -> ModelConfig:
        return replace(self.model, seed=self.seed)

    @property
    def adamw(self) -> AdamWConfig:
        return AdamWConfig(self.betas, self.adam_eps, self.weight_decay)


@dataclass
class LossHistory:
    epoch_losses: list[float] = field(default_factory=list)
    rows: list[tuple[int, int, float, float]] = field(default_factory=list)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "step", "lr", "loss"])
            for epoch, step, lr, loss in self.rows:
                writer.writerow([epoch, step, repr(lr), repr(loss)])


def _corrupt(run: RunConfig, clean: np.ndarray, rng: np.random.Generator):
    """Network inputs and scoring masks (None means score the full spectrum)."""
    task = Task(run.task)
    n, h, w, _ = clean.shape
    if task is Task.MFM:
        bits = np.stack([sample_filter(run.mask, rng, h, w).bits for _ in range(n)])
        return corrupt_batch(clean, bits), bits
    if task is Task.NONE:
        return clean, None
    cfg = replace(run.degrade, task=DegradeTask(task.value))
    return np.stack([degrade(img, cfg, rng) for img in clean]), None


def train_step_loss(run: RunConfig, model: Model, inputs, targets, bits):
    """Mean loss over the batch and parameter gradients."""
    pred, cache = forward(model, inputs)
    kind = LossKind(run.loss_kind)
    if kind is LossKind.FREQ:
        loss_cfg = run.loss if bits is not None else replace(run.loss, target_area=TargetArea.FULL)
        losses, dpred = batch_freq_loss(pred, targets, bits, loss_cfg)
    else:
        losses, dpred = batch_spatial_loss(pred, targets, SpatialNorm(kind.value))
    n = len(losses)
    return float(losses.mean()), backward(model, cache, dpred / n)


def pretrain(run: RunConfig, dataset: SyntheticDataset | None = None,
             checkpoint_path: str | Path | None = None, history_path: str | Path | None = None,
             on_epoch: Callable[[int, float, float], None] | None = None) -> tuple[Model, LossHistory]:
    """Pre-train a fresh model and return it with its loss history.

    A fresh mask (for the frequency-masking task) is drawn per image per step.
    Everything is determined by ``run.seed`` (and ``run.data_seed``).
    """
    if dataset is None:
        data_seed = run.seed if run.data_seed is None else run.data_seed
        dataset = generate_dataset(run.n_per_class, run.image_size, data_seed, run.model.in_channels)
    model = init_model(run.model_config)
    state = OptimizerState.zeros_like(model.params)
    decay = model_decay_mask(model)
    shuffle_rng, aug_rng, corrupt_rng = (np.random.default_rng(s)
                                         for s in np.random.SeedSequence(run.seed).spawn(3))

    n = len(dataset)
    steps_per_epoch = math.ceil(n / run.batch_size)
    total = run.epochs * steps_per_epoch
    warmup = run.warmup_epochs * steps_per_epoch
    history = LossHistory()
    step = 0
    for epoch in range(run.epochs):
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, run.batch_size):
            idx = order[start:start + run.batch_size]
            clean = np.stack([random_resized_crop(dataset.images[i], aug_rng, run.crop_scale, run.flip_p)
                              for i in idx])
            inputs, bits = _corrupt(run, clean, corrupt_rng)
            loss, grads = train_step_loss(run, model, inputs, clean, bits)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch} step {step}")
            grads, _ = clip_grad_norm(grads, run.clip_norm)
            lr = lr_schedule(step, total, warmup, run.peak_lr)
            adamw_step(model.params, grads, state, lr, run.adamw, decay)
            history.rows.append((epoch, step, lr, loss))
            losses.append(loss)
            step += 1
        epoch_loss = float(np.mean(losses))
        history.epoch_losses.append(epoch_loss)
        log.info("epoch %d loss %.6g lr %.3g", epoch, epoch_loss, lr)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss, lr)
    if not all(np.all(np.isfinite(p)) for p in model.params):
        raise NumericError("non-finite parameters after the final update")
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    if history_path is not None:
        history.write_csv(history_path)
    return model, history
