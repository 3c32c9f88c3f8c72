"""Forward degradation operators: Lanczos downsampling and mask application."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .imagecore import ImageError, as_image, as_mask

SUPPORTED_FACTORS = (4, 8)
DEFAULT_LOBES = 3


def lanczos(x: np.ndarray, lobes: int = DEFAULT_LOBES) -> np.ndarray:
    """Lanczos window ``sinc(x) * sinc(x / lobes)`` on ``|x| < lobes``."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < lobes, np.sinc(x) * np.sinc(x / lobes), 0.0)


def reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Map arbitrary integer indices into ``[0, n)`` by mirror reflection
    about the edge samples (numpy ``mode='reflect'``), repeating as needed."""
    idx = np.asarray(idx)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    m = np.mod(idx, period)
    return np.where(m >= n, period - m, m)


@dataclass(frozen=True)
class LanczosKernel:
    """Precomputed 1-D downsampling filter for one axis.

    ``weights`` is an ``(n // scale, n)`` matrix whose rows hold the
    normalized taps of each output sample with border reflection folded in.
    Output sample ``k`` sits at input coordinate ``(k + 0.5) * scale - 0.5``.
    """

    taps: int
    scale: int
    size: int
    weights: np.ndarray

    @classmethod
    def build(cls, size: int, scale: int, taps: int = DEFAULT_LOBES) -> "LanczosKernel":
        return _build_kernel(size, scale, taps)


@lru_cache(maxsize=64)
def _build_kernel(size: int, scale: int, taps: int) -> LanczosKernel:
    n_out = size // scale
    radius = taps * scale
    offsets = np.arange(-radius, radius + 1)
    weights = np.zeros((n_out, size))
    for k in range(n_out):
        center = (k + 0.5) * scale - 0.5
        base = int(np.floor(center))
        src = base + offsets
        w = lanczos((src - center) / scale, taps)
        w /= w.sum()
        # Summation order over taps is fixed by ``offsets``.
        np.add.at(weights[k], reflect_index(src, size), w)
    weights.setflags(write=False)
    return LanczosKernel(taps=taps, scale=scale, size=size, weights=weights)


def _check_factor(factor: int) -> None:
    if factor not in SUPPORTED_FACTORS:
        raise ValueError(f"unsupported downscale factor {factor}; expected one of {SUPPORTED_FACTORS}")


def lanczos_downsample(img: np.ndarray, factor: int, taps: int = DEFAULT_LOBES) -> np.ndarray:
    """Downscale ``img`` by an integer ``factor`` with a separable Lanczos filter.

    Rows are filtered first, then columns. The operator is linear.
    """
    _check_factor(factor)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise ImageError(f"expected (C, H, W), got shape {img.shape}")
    _, h, w = img.shape
    if h % factor or w % factor:
        raise ImageError(f"image size {h}x{w} is not divisible by {factor}")
    kh = LanczosKernel.build(h, factor, taps).weights
    kw = LanczosKernel.build(w, factor, taps).weights
    out = np.einsum("ph,chw->cpw", kh, img)
    return np.einsum("cpw,qw->cpq", out, kw)


def lanczos_downsample_adjoint(grad: np.ndarray, factor: int, out_shape, taps: int = DEFAULT_LOBES) -> np.ndarray:
    """Exact adjoint of :func:`lanczos_downsample` for a full-size ``out_shape``."""
    _check_factor(factor)
    grad = np.asarray(grad, dtype=np.float64)
    c, h, w = out_shape
    if h % factor or w % factor:
        raise ImageError(f"image size {h}x{w} is not divisible by {factor}")
    if grad.shape != (c, h // factor, w // factor):
        raise ImageError(f"gradient shape {grad.shape} does not match {out_shape} / {factor}")
    kh = LanczosKernel.build(h, factor, taps).weights
    kw = LanczosKernel.build(w, factor, taps).weights
    out = np.einsum("cpq,qw->cpw", grad, kw)
    return np.einsum("ph,cpw->chw", kh, out)


def apply_mask(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Hadamard product of every channel of ``img`` with a binary ``(H, W)`` mask."""
    img = as_image(img)
    mask = as_mask(mask)
    if img.shape[1:] != mask.shape:
        raise ImageError(f"mask shape {mask.shape} does not match image {img.shape[1:]}")
    return img * mask[None]
