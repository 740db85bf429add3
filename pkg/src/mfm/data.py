"""Synthetic toy dataset, fractal test images, and training-time augmentation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mfm.degradations import resize
from mfm.spectral import dft2, idft2

SHAPES = ("disc", "square", "triangle", "ring")
BANDS = ("low", "high")
N_CLASSES = len(SHAPES) * len(BANDS)

# stripe frequencies in cycles per pixel
BAND_RANGES = {"low": (0.06, 0.10), "high": (0.30, 0.40)}

DATASET_MAGIC = b"MFMD"


@dataclass
class SyntheticDataset:
    images: np.ndarray  # (N, H, W, C)
    labels: np.ndarray  # (N,)

    def __len__(self) -> int:
        return len(self.labels)

    @staticmethod
    def class_name(label: int) -> str:
        return f"{SHAPES[label // len(BANDS)]}/{BANDS[label % len(BANDS)]}"

    def save(self, path: str | Path) -> None:
        """Raw dump: magic, four uint32 dims, float64 pixels, int64 labels (little-endian)."""
        n, h, w, c = self.images.shape
        header = DATASET_MAGIC + np.array([n, h, w, c], dtype="<u4").tobytes()
        Path(path).write_bytes(header + self.images.astype("<f8").tobytes()
                               + self.labels.astype("<i8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> SyntheticDataset:
        data = Path(path).read_bytes()
        if data[:4] != DATASET_MAGIC:
            raise ValueError(f"{path}: not a dataset dump")
        n, h, w, c = (int(v) for v in np.frombuffer(data[4:20], dtype="<u4"))
        npix = n * h * w * c
        images = np.frombuffer(data[20:20 + 8 * npix], dtype="<f8").reshape(n, h, w, c)
        labels = np.frombuffer(data[20 + 8 * npix:], dtype="<i8")
        if labels.size != n:
            raise ValueError(f"{path}: truncated")
        return cls(images.astype(np.float64), labels.astype(np.int64))


def _shape_sdf(shape: str, dy: np.ndarray, dx: np.ndarray, radius: float) -> np.ndarray:
    """Approximate signed distance (pixels) to the shape boundary; negative inside."""
    if shape == "disc":
        return np.hypot(dy, dx) - radius
    if shape == "square":
        return np.maximum(np.abs(dy), np.abs(dx)) - 0.85 * radius
    if shape == "ring":
        d = np.hypot(dy, dx)
        return np.maximum(d - radius, 0.5 * radius - d)
    # upright equilateral triangle inscribed in the circle of this radius
    normals = [(-1.0, 0.0), (0.5, np.sqrt(3) / 2), (0.5, -np.sqrt(3) / 2)]
    return np.max([ny * dy + nx * dx - 0.5 * radius for ny, nx in normals], axis=0)


def render_image(label: int, size: int, channels: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one image of class ``label``: a striped bright shape over a darker noisy background."""
    shape = SHAPES[label // len(BANDS)]
    band = BANDS[label % len(BANDS)]
    radius = rng.uniform(0.2, 0.3) * size
    margin = radius + 1.0
    cy, cx = rng.uniform(margin, size - 1 - margin, size=2)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    alpha = np.clip(0.5 - _shape_sdf(shape, yy - cy, xx - cx, radius), 0.0, 1.0)[..., None]

    freq = rng.uniform(*BAND_RANGES[band])
    theta = rng.uniform(0.0, np.pi)
    phase = rng.uniform(0.0, 2 * np.pi)
    stripes = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    fill = rng.uniform(0.6, 0.8, size=3) + 0.2 * stripes[..., None]
    background = rng.uniform(0.15, 0.35, size=3)

    img = alpha * fill + (1.0 - alpha) * background
    img = img + rng.normal(0.0, 0.03, size=img.shape)
    if channels == 1:
        img = img.mean(axis=-1, keepdims=True)
    return np.clip(img, 0.0, 1.0)


def generate_dataset(n_per_class: int, image_size: int = 32, seed: int = 0,
                     channels: int = 3) -> SyntheticDataset:
    """Balanced 8-class toy set (4 shapes x 2 stripe bands), shuffled, fully seeded."""
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(N_CLASSES), n_per_class)
    rng.shuffle(labels)
    images = np.stack([render_image(int(lab), image_size, channels, rng) for lab in labels])
    return SyntheticDataset(images, labels.astype(np.int64))


def fractal_noise(size: int, rng: np.random.Generator, beta: float = 2.0, channels: int = 3) -> np.ndarray:
    """Random image with a ``1/f^beta`` power spectrum, min-max scaled to [0, 1]."""
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    f = np.hypot(fy, fx)
    f[0, 0] = 1.0 / size
    amp = f ** (-beta / 2.0)
    white = rng.normal(size=(channels, size, size))
    field = idft2(dft2(white) * amp).real
    lo = field.min(axis=(-2, -1), keepdims=True)
    hi = field.max(axis=(-2, -1), keepdims=True)
    return np.moveaxis((field - lo) / (hi - lo), 0, -1)


def random_resized_crop(image: np.ndarray, rng: np.random.Generator,
                        scale: tuple[float, float] = (0.6, 1.0), flip_p: float = 0.5) -> np.ndarray:
    """Square crop covering ``scale`` of the area, resized back with bicubic, then maybe flipped."""
    h, w = image.shape[:2]
    area = rng.uniform(*scale)
    ch = max(1, min(h, int(round(h * np.sqrt(area)))))
    cw = max(1, min(w, int(round(w * np.sqrt(area)))))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    crop = image[top:top + ch, left:left + cw]
    if (ch, cw) != (h, w):
        crop = np.clip(resize(crop, h, w), 0.0, 1.0)
    if rng.random() < flip_p:
        crop = crop[:, ::-1]
    return np.ascontiguousarray(crop)
