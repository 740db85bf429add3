"""Frozen-feature linear probe: pooled encoder features + multinomial logistic regression."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mfm.model import Model, encode


@dataclass(frozen=True)
class ProbeConfig:
    l2: float = 1e-4
    max_iter: int = 10_000
    tol: float = 1e-6
    train_fraction: float = 0.8
    split_seed: int = 0


def extract_features(model: Model, images: np.ndarray, batch_size: int = 128) -> np.ndarray:
    """Global-average-pooled last encoder activation, one row per image."""
    feats = []
    for start in range(0, len(images), batch_size):
        act, _, _ = encode(model, images[start:start + batch_size])
        feats.append(act.mean(axis=(1, 2)))
    return np.concatenate(feats) if feats else np.zeros((0, model.config.widths[-1]))


def stratified_split(labels: np.ndarray, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        cut = int(round(train_fraction * len(idx)))
        train.append(idx[:cut])
        test.append(idx[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit_logistic(x: np.ndarray, y: np.ndarray, n_classes: int, l2: float,
                 max_iter: int, tol: float) -> np.ndarray:
    """Full-batch gradient descent on L2-regularized softmax cross-entropy.

    ``x`` must already include a bias column (left unregularized). Step size
    is ``1 / L`` with ``L = 0.5 * sigma_max(x)^2 / n + l2``.
    """
    n, d = x.shape
    onehot = np.eye(n_classes)[y]
    lipschitz = 0.5 * np.linalg.norm(x, 2) ** 2 / n + l2
    step = 1.0 / lipschitz
    reg = np.full((d, 1), l2)
    reg[-1] = 0.0
    w = np.zeros((d, n_classes))
    for _ in range(max_iter):
        grad = x.T @ (_softmax(x @ w) - onehot) / n + reg * w
        if np.linalg.norm(grad) < tol:
            break
        w -= step * grad
    return w


def linear_probe(features: np.ndarray, labels: np.ndarray, cfg: ProbeConfig = ProbeConfig()) -> float:
    """Test accuracy of a logistic-regression probe on a stratified split."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    classes, y = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("linear probe needs at least 2 classes")
    train, test = stratified_split(y, cfg.train_fraction, cfg.split_seed)
    mu = features[train].mean(axis=0)
    sd = features[train].std(axis=0)
    sd[sd < 1e-12] = 1.0

    def design(rows):
        z = (features[rows] - mu) / sd
        return np.hstack([z, np.ones((len(rows), 1))])

    w = fit_logistic(design(train), y[train], len(classes), cfg.l2, cfg.max_iter, cfg.tol)
    pred = np.argmax(design(test) @ w, axis=1)
    return float(np.mean(pred == y[test]))


def append_probe_report(path: str | Path, seed: int, task: str, accuracy: float) -> None:
    """Append a ``seed,task,accuracy`` row, writing the header for a new file."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(["seed", "task", "accuracy"])
        writer.writerow([seed, task, f"{accuracy:.6f}"])
