"""Small stride-1 convolutional encoder with a 1x1 linear decoder head.

Layout is NHWC throughout. Every encoder block is a same-padded ``k x k``
convolution followed by ReLU; the decoder is a 1x1 convolution back to the
input channel count, so predictions have the same shape as inputs.

Parameters are a flat list ``[w0, b0, w1, b1, ..., w_dec, b_dec]`` with
weights shaped ``(k, k, c_in, c_out)``. Gradients use the same list layout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from mfm.loss import LossConfig, batch_freq_loss
from mfm.masking import FrequencyMask, corrupt_image

CHECKPOINT_MAGIC = b"MFM1"


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 3
    widths: tuple[int, ...] = (16, 32, 32)
    kernel_size: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.in_channels not in (1, 3):
            raise ValueError(f"in_channels must be 1 or 3, got {self.in_channels}")
        if not self.widths or min(self.widths) < 1:
            raise ValueError(f"invalid widths {self.widths}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")

    def layer_shapes(self) -> list[tuple[int, int, int, int]]:
        k = self.kernel_size
        shapes = []
        c_in = self.in_channels
        for c_out in self.widths:
            shapes.append((k, k, c_in, c_out))
            c_in = c_out
        shapes.append((1, 1, c_in, self.in_channels))
        return shapes

    def parameter_count(self) -> int:
        return sum(int(np.prod(s)) + s[-1] for s in self.layer_shapes())


@dataclass
class Model:
    config: ModelConfig
    params: list[np.ndarray] = field(default_factory=list)

    @property
    def weights(self) -> list[np.ndarray]:
        return self.params[0::2]

    @property
    def biases(self) -> list[np.ndarray]:
        return self.params[1::2]

    def copy(self) -> Model:
        return Model(self.config, [p.copy() for p in self.params])

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params)


def init_model(cfg: ModelConfig) -> Model:
    """Kaiming-uniform weights (bound ``sqrt(6 / fan_in)``) and zero biases."""
    rng = np.random.default_rng(cfg.seed)
    params = []
    for shape in cfg.layer_shapes():
        fan_in = shape[0] * shape[1] * shape[2]
        bound = np.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-bound, bound, size=shape))
        params.append(np.zeros(shape[-1]))
    return Model(cfg, params)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """``(N, H, W, C)`` -> ``(N*H*W, k*k*C)`` patches with zero same-padding."""
    n, h, w, c = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (N, H, W, C, k, k)
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, k * k * c)


def _conv_input_grad(g: np.ndarray, wt: np.ndarray) -> np.ndarray:
    """Adjoint of a same-padded convolution: correlate with the flipped, transposed kernel."""
    k = wt.shape[0]
    flipped = wt[::-1, ::-1].transpose(0, 1, 3, 2)
    cols = _im2col(g, k)
    return cols @ flipped.reshape(-1, flipped.shape[-1])


@dataclass
class ForwardCache:
    input_shape: tuple[int, ...]
    cols: list[np.ndarray]
    pre: list[np.ndarray]
    features: np.ndarray


def _check_input(model: Model, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[-1] != model.config.in_channels:
        raise ValueError(f"expected (N, H, W, {model.config.in_channels}) input, got {x.shape}")
    return x


def encode(model: Model, x: np.ndarray, keep: bool = False):
    """Run the encoder blocks; returns the last activation (and the cache pieces)."""
    x = _check_input(model, x)
    n, h, w, _ = x.shape
    k = model.config.kernel_size
    cols_list, pre_list = [], []
    act = x
    for wt, b in zip(model.weights[:-1], model.biases[:-1]):
        cols = _im2col(act, k)
        pre = cols @ wt.reshape(-1, wt.shape[-1]) + b
        act = np.maximum(pre, 0.0).reshape(n, h, w, -1)
        if keep:
            cols_list.append(cols)
            pre_list.append(pre)
    return act, cols_list, pre_list


def forward(model: Model, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Predict an ``(N, H, W, C)`` batch; the cache feeds :func:`backward`."""
    feats, cols, pre = encode(model, batch, keep=True)
    n, h, w, c = feats.shape
    wd, bd = model.weights[-1], model.biases[-1]
    out = feats.reshape(-1, c) @ wd.reshape(c, -1) + bd
    cache = ForwardCache(tuple(np.shape(batch)), cols, pre, feats)
    return out.reshape(n, h, w, -1), cache


def backward(model: Model, cache: ForwardCache, grad_output: np.ndarray) -> list[np.ndarray]:
    """Gradients of ``sum(predictions * grad_output)`` for every parameter."""
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != cache.input_shape:
        raise ValueError(f"grad_output {grad_output.shape} does not match cached forward {cache.input_shape}")
    if len(cache.cols) != len(model.weights) - 1:
        raise ValueError("cache does not belong to this model")
    n, h, w, _ = cache.input_shape
    weights = model.weights
    grads: list[np.ndarray] = [None] * len(model.params)

    c_last = cache.features.shape[-1]
    g = grad_output.reshape(n * h * w, -1)
    grads[-2] = (cache.features.reshape(-1, c_last).T @ g).reshape(weights[-1].shape)
    grads[-1] = g.sum(axis=0)
    g = g @ weights[-1].reshape(c_last, -1).T

    for layer in range(len(weights) - 2, -1, -1):
        wt = weights[layer]
        g = g * (cache.pre[layer] > 0)
        cols = cache.cols[layer]
        grads[2 * layer] = (cols.T @ g).reshape(wt.shape)
        grads[2 * layer + 1] = g.sum(axis=0)
        if layer > 0:
            g = _conv_input_grad(g.reshape(n, h, w, -1), wt)
    return grads


def loss_and_grads(model: Model, inputs: np.ndarray, targets: np.ndarray, bits, loss_cfg: LossConfig):
    """Mean per-image frequency loss of ``model(inputs)`` against ``targets`` and its parameter gradients."""
    pred, cache = forward(model, inputs)
    losses, dpred = batch_freq_loss(pred, targets, bits, loss_cfg)
    n = len(losses)
    return float(losses.mean()), backward(model, cache, dpred / n)


def _chain_loss(model, inputs, targets, bits, loss_cfg):
    pred, _ = forward(model, inputs)
    losses, _ = batch_freq_loss(pred, targets, bits, loss_cfg, with_grad=False)
    return float(losses.mean())


def kink_margin(model: Model, x: np.ndarray) -> float:
    """Smallest ``|pre-activation|`` over all ReLUs for input batch ``x``.

    Central differences with step ``h`` are only a valid gradient oracle when
    no perturbation pushes a pre-activation across zero, so checks should use
    inputs whose margin is well above ``h``.
    """
    _, _, pre = encode(model, x, keep=True)
    return float(min(np.abs(p).min() for p in pre))


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float | None = None) -> float:
    """Max elementwise ``|a - n| / max(|a|, |n|, floor)``.

    The default floor is ``1e-6 * max |n|``, so entries that are zero in both
    up to finite-difference noise do not dominate.
    """
    a = np.ravel(analytic)
    b = np.ravel(numeric)
    if floor is None:
        floor = max(1e-6 * np.abs(b).max(initial=0.0), 1e-12)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max(initial=0.0))


def grad_check(model: Model, image: np.ndarray, loss_cfg: LossConfig, mask: FrequencyMask | None,
               h: float = 1e-5, target: np.ndarray | None = None) -> float:
    """Compare backprop through loss and network against central differences.

    The network input is ``image`` corrupted by ``mask`` and the target is the
    clean ``image`` unless ``target`` is given. Returns the max relative
    error over all parameters; costs two forward passes per parameter.
    """
    image = np.asarray(image, dtype=np.float64)
    inputs = corrupt_image(image, mask) if mask is not None else image
    target = image if target is None else np.asarray(target, dtype=np.float64)
    bits = mask.bits if mask is not None else None
    inputs, target = inputs[None], target[None]
    _, analytic = loss_and_grads(model, inputs, target, bits, loss_cfg)
    numerics = []
    for p in model.params:
        numeric = np.empty_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = _chain_loss(model, inputs, target, bits, loss_cfg)
            flat[i] = orig - h
            down = _chain_loss(model, inputs, target, bits, loss_cfg)
            flat[i] = orig
            nflat[i] = (up - down) / (2 * h)
        numerics.append(numeric)
    return relative_error(np.concatenate([g.ravel() for g in analytic]),
                          np.concatenate([g.ravel() for g in numerics]))


def save_checkpoint(model: Model, path: str | Path) -> None:
    """Write the little-endian ``MFM1`` checkpoint described in the README."""
    cfg = model.config
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IIqI", cfg.in_channels, cfg.kernel_size, cfg.seed, len(cfg.widths))
    header += struct.pack(f"<{len(cfg.widths)}I", *cfg.widths)
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params)
    Path(path).write_bytes(header + body)


class CheckpointError(ValueError):
    pass


def load_checkpoint(path: str | Path) -> Model:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not an MFM1 checkpoint")
    try:
        in_ch, k, seed, n_w = struct.unpack_from("<IIqI", data, 4)
        off = 4 + struct.calcsize("<IIqI")
        widths = struct.unpack_from(f"<{n_w}I", data, off)
        off += 4 * n_w
        cfg = ModelConfig(in_ch, tuple(widths), k, seed)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: bad header ({exc})") from exc
    params = []
    for shape in cfg.layer_shapes():
        for shp in (shape, (shape[-1],)):
            count = int(np.prod(shp))
            end = off + 8 * count
            if end > len(data):
                raise CheckpointError(f"{path}: truncated")
            params.append(np.frombuffer(data[off:end], dtype="<f8").astype(np.float64).reshape(shp))
            off = end
    if off != len(data):
        raise CheckpointError(f"{path}: {len(data) - off} trailing bytes")
    return Model(cfg, params)
