"""Binary 8-bit PGM (P5) and PPM (P6) reading and writing."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class NetpbmError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated header integers, skipping ``#`` comments."""
    values = []
    pos = 2
    n = len(data)
    while len(values) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise NetpbmError("malformed header")
        values.append(int(data[start:pos]))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise NetpbmError("missing whitespace after header")
    return values, pos + 1


def decode(data: bytes) -> np.ndarray:
    """Decode P5/P6 bytes to a uint8 array of shape ``(H, W, C)``."""
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise NetpbmError(f"unsupported format {magic!r}; only binary P5/P6 are read")
    (width, height, maxval), offset = _tokens(data, 3)
    if width < 1 or height < 1:
        raise NetpbmError(f"invalid size {width}x{height}")
    if maxval != 255:
        raise NetpbmError(f"only 8-bit images (maxval 255) are supported, got {maxval}")
    size = width * height * channels
    pixels = data[offset:offset + size]
    if len(pixels) != size:
        raise NetpbmError(f"expected {size} pixel bytes, found {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, channels).copy()


def encode(pixels: np.ndarray) -> bytes:
    """Encode a uint8 ``(H, W)`` or ``(H, W, 1|3)`` array as P5 or P6."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise NetpbmError(f"expected uint8 pixels, got {pixels.dtype}")
    if pixels.ndim == 2:
        pixels = pixels[..., None]
    h, w, c = pixels.shape
    if c not in (1, 3):
        raise NetpbmError(f"expected 1 or 3 channels, got {c}")
    magic = b"P5" if c == 1 else b"P6"
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes()


def quantize(image: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1], scale to 255 and round half up."""
    scaled = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def read_image(path: str | Path) -> np.ndarray:
    """Load a P5/P6 file as float64 ``(H, W, C)`` in [0, 1]."""
    return decode(Path(path).read_bytes()).astype(np.float64) / 255.0


def write_image(path: str | Path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode(quantize(image)))
