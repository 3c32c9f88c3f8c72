"""Seeded pseudo-noise generators.

Two families are provided: i.i.d. Gaussian noise (used for denoising and
super-resolution) and per-row sinusoids (used for inpainting). All randomness
comes from numpy's PCG64 generator seeded through :class:`numpy.random.SeedSequence`.
The sinusoid generator spawns one child sequence per row, so row ``b`` always
draws its amplitude and frequency from the ``b``-th child of the seed.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SIGMA = 1.0 / 25.0

AMPLITUDE_RANGE = (1.0 / 50.0, 1.0 / 25.0)
# Angular frequency bounds are these multiples of pi / width.
FREQUENCY_RANGE = (20.0, 40.0)

_MAGIC = b"OSCPN\x00"
_VERSION = 1
_KINDS = ("gaussian", "row-sinusoid")


@dataclass
class PseudoNoise:
    values: np.ndarray
    kind: str
    seed: int
    sigma: float | None = None
    amplitudes: np.ndarray | None = field(default=None, repr=False)
    frequencies: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def energy(self) -> float:
        """Mean square value, i.e. the e-value of a perfect reconstruction."""
        return float(np.mean(self.values * self.values))

    def regenerate(self) -> "PseudoNoise":
        """Rebuild the noise from its stored kind, shape and seed."""
        if self.kind == "gaussian":
            return gen_gaussian_pn(self.shape, self.sigma, self.seed)
        return gen_sinusoid_pn(self.shape, self.seed)


def _check_shape(shape) -> tuple[int, int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3:
        raise ValueError(f"shape must be (channels, height, width), got {shape}")
    if min(shape) < 1:
        raise ValueError(f"zero-sized shape {shape}")
    return shape


def gen_gaussian_pn(shape, sigma: float = DEFAULT_SIGMA, seed: int = 0) -> PseudoNoise:
    """Zero-mean i.i.d. Gaussian noise with standard deviation ``sigma``."""
    shape = _check_shape(shape)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    values = rng.normal(0.0, sigma, size=shape)
    return PseudoNoise(values=values, kind="gaussian", seed=seed, sigma=float(sigma))


def gen_sinusoid_pn(shape, seed: int = 0) -> PseudoNoise:
    """Row sinusoids ``A_b * sin(theta_b * c)`` shared by every channel.

    ``A_b`` is uniform on [1/50, 1/25] and ``theta_b`` uniform on
    [20 pi / W, 40 pi / W]; the column index ``c`` starts at 0.
    """
    channels, height, width = _check_shape(shape)
    children = np.random.SeedSequence(seed).spawn(height)
    amplitudes = np.empty(height)
    frequencies = np.empty(height)
    lo, hi = FREQUENCY_RANGE
    for b, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        amplitudes[b] = rng.uniform(*AMPLITUDE_RANGE)
        frequencies[b] = rng.uniform(np.pi * lo / width, np.pi * hi / width)
    cols = np.arange(width, dtype=np.float64)
    rows = amplitudes[:, None] * np.sin(frequencies[:, None] * cols[None, :])
    values = np.broadcast_to(rows, (channels, height, width)).copy()
    return PseudoNoise(
        values=values,
        kind="row-sinusoid",
        seed=seed,
        amplitudes=amplitudes,
        frequencies=frequencies,
    )


def save_pn(pn: PseudoNoise, path: str | os.PathLike) -> None:
    """Dump pseudo-noise as a small header followed by little-endian float64 values.

    Header: magic, version (u16), kind index (u8), seed (u64), sigma (f64,
    NaN when unused), shape (3 x u32). Sinusoid parameters follow the
    values as two length-H float64 vectors.
    """
    sigma = np.nan if pn.sigma is None else pn.sigma
    header = _MAGIC + struct.pack("<HBQd3I", _VERSION, _KINDS.index(pn.kind), pn.seed, sigma, *pn.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(pn.values, dtype="<f8").tobytes())
        if pn.kind == "row-sinusoid":
            fh.write(np.asarray(pn.amplitudes, dtype="<f8").tobytes())
            fh.write(np.asarray(pn.frequencies, dtype="<f8").tobytes())


def load_pn(path: str | os.PathLike) -> PseudoNoise:
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(_MAGIC):
        raise ValueError(f"{path}: not a pseudo-noise file")
    offset = len(_MAGIC)
    fmt = "<HBQd3I"
    version, kind_idx, seed, sigma, c, h, w = struct.unpack_from(fmt, raw, offset)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    offset += struct.calcsize(fmt)
    n = c * h * w
    values = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).reshape(c, h, w).copy()
    offset += 8 * n
    pn = PseudoNoise(values=values, kind=_KINDS[kind_idx], seed=seed)
    if pn.kind == "gaussian":
        pn.sigma = sigma
    else:
        pn.amplitudes = np.frombuffer(raw, dtype="<f8", count=h, offset=offset).copy()
        pn.frequencies = np.frombuffer(raw, dtype="<f8", count=h, offset=offset + 8 * h).copy()
    return pn
