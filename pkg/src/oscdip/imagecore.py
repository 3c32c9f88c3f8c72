"""Image containers, PNG I/O and the scalar metrics shared by every module.

Images are plain ``float64`` numpy arrays laid out channel-major ``(C, H, W)``
with nominal range [0, 1]. Masks are ``(H, W)`` arrays holding exactly 0 or 1
and broadcast across channels.
"""

from __future__ import annotations

import math
import os
from typing import Sequence

import numpy as np
import png

#: Returned by :func:`psnr` when the two images are identical.
PSNR_IDENTICAL = math.inf


class ImageError(ValueError):
    """Invalid image data or shape."""


class ImageDecodeError(ImageError):
    """A file could not be decoded as a supported PNG."""


def as_image(data, *, copy: bool = False) -> np.ndarray:
    """Validate ``data`` as a ``(C, H, W)`` image and return it as float64.

    A 2-D array is promoted to a single-channel image.
    """
    arr = np.array(data, dtype=np.float64, copy=copy) if copy else np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ImageError(f"expected (C, H, W) with C in {{1, 3}}, got shape {arr.shape}")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ImageError(f"zero-sized image {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ImageError("image contains NaN or Inf")
    return arr


def as_mask(data) -> np.ndarray:
    """Validate a binary ``(H, W)`` mask and return it as float64."""
    arr = np.asarray(data)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ImageError(f"mask must be 2-D, got shape {arr.shape}")
    arr = arr.astype(np.float64)
    if not np.all((arr == 0) | (arr == 1)):
        raise ImageError("mask values must be exactly 0 or 1")
    if not arr.any():
        raise ImageError("mask has no known pixels")
    return arr


def _read_png(path: str | os.PathLike) -> tuple[np.ndarray, int, int]:
    """Return ``(pixels (H, W, planes), bitdepth, planes)`` for a PNG file."""
    try:
        reader = png.Reader(filename=os.fspath(path))
        width, height, rows, info = reader.asDirect()
        bitdepth = info["bitdepth"]
        planes = info["planes"]
        if bitdepth not in (8, 16):
            raise ImageDecodeError(f"{path}: unsupported PNG bit depth {bitdepth}")
        dtype = np.uint16 if bitdepth == 16 else np.uint8
        pixels = np.vstack([np.asarray(row, dtype=dtype) for row in rows])
    except ImageDecodeError:
        raise
    except FileNotFoundError:
        raise
    except (png.Error, OSError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    return pixels.reshape(height, width, planes), bitdepth, planes


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load an 8- or 16-bit PNG as a ``(C, H, W)`` float image in [0, 1].

    Grayscale files give one channel and RGB files three; alpha is dropped.
    """
    pixels, bitdepth, planes = _read_png(path)
    if planes in (2, 4):
        pixels = pixels[..., : planes - 1]
    scale = float((1 << bitdepth) - 1)
    return np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float64) / scale


def quantize(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize to bytes by ``round(v * 255)``."""
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write ``img`` as an 8-bit grayscale or RGB PNG."""
    img = as_image(img)
    data = quantize(img)
    channels, height, width = data.shape
    writer = png.Writer(width, height, greyscale=channels == 1, bitdepth=8)
    rows = data.transpose(1, 2, 0).reshape(height, width * channels)
    with open(path, "wb") as fh:
        writer.write(fh, rows.tolist())


def load_mask(path: str | os.PathLike) -> np.ndarray:
    """Load a mask PNG where 0 marks missing pixels and 255 known ones."""
    pixels, bitdepth, planes = _read_png(path)
    if bitdepth != 8:
        raise ImageDecodeError(f"{path}: mask must be an 8-bit PNG")
    if planes in (2, 4):
        pixels = pixels[..., : planes - 1]
    if pixels.shape[2] > 1 and np.any(pixels != pixels[..., :1]):
        raise ImageError(f"{path}: color mask planes disagree")
    values = pixels[..., 0]
    if not np.all((values == 0) | (values == 255)):
        raise ImageError(f"{path}: mask pixels must be 0 or 255")
    return as_mask(values == 255)


def save_mask(mask: np.ndarray, path: str | os.PathLike) -> None:
    mask = as_mask(mask)
    writer = png.Writer(mask.shape[1], mask.shape[0], greyscale=True, bitdepth=8)
    with open(path, "wb") as fh:
        writer.write(fh, (mask * 255).astype(np.uint8).tolist())


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, with the MSE taken over all channels.

    Returns :data:`PSNR_IDENTICAL` (``inf``) when the images are equal.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ImageError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(peak * peak / mse)


def minmax_normalize(series: Sequence[float]) -> np.ndarray:
    """Affinely map ``series`` onto [0, 1]; a constant series maps to zeros."""
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need a 1-D series with at least two values")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)
