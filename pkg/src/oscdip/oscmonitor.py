"""Streaming stopping monitor driven by the pseudo-noise component.

Each iterate ``x_i`` is reduced to a scalar ``e_i``, the mean product of the
iterate with the injected pseudo-noise. Once ``H + h`` further iterates have
arrived, the curvature of the ``e`` curve around index ``j = i - H - h`` is
estimated, and the iterate with the largest curvature is kept.

Iteration indices are 1-based throughout: ``e_series[0]`` is ``e_1``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .imagecore import ImageError
from .noisegen import PseudoNoise


@dataclass
class MonitorConfig:
    H: int = 200
    h: int = 20
    e_ref: float = 1.0
    patience: int = 500

    def validate(self) -> None:
        if not (self.H > self.h >= 1):
            raise ValueError(f"need H > h >= 1, got H={self.H}, h={self.h}")
        if not (self.e_ref > 0 and math.isfinite(self.e_ref)):
            raise ValueError(f"e_ref must be positive, got {self.e_ref}")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")

    @property
    def lag(self) -> int:
        return self.H + self.h

    @property
    def min_iterations(self) -> int:
        """Iterations needed before the first curvature exists."""
        return 2 * self.lag + 1


def _values(pn) -> np.ndarray:
    return pn.values if isinstance(pn, PseudoNoise) else np.asarray(pn, dtype=np.float64)


def compute_e(x: np.ndarray, pn) -> float:
    """Mean elementwise product of ``x`` and the pseudo-noise."""
    p = _values(pn)
    if np.shape(x) != p.shape:
        raise ImageError(f"shape mismatch {np.shape(x)} vs {p.shape}")
    return float(np.mean(x * p))


def compute_e_masked(x: np.ndarray, pn, mask: np.ndarray) -> float:
    """Masked mean product; the divisor counts mask ones times channels."""
    p = _values(pn)
    if np.shape(x) != p.shape:
        raise ImageError(f"shape mismatch {np.shape(x)} vs {p.shape}")
    if mask.shape != p.shape[1:]:
        raise ImageError(f"mask shape {mask.shape} does not match {p.shape[1:]}")
    count = float(mask.sum()) * p.shape[0]
    if count == 0:
        raise ImageError("mask has no known pixels")
    return float(np.sum(x * p * mask[None]) / count)


def curvature_at(e_series, j: int, cfg: MonitorConfig) -> float:
    """Quadratic coefficient of a parabola fitted around 1-based index ``j``.

    Anchor values are the means of ``e`` over ``[c - h, c + h]`` for the
    centers ``c = j - H, j, j + H``. Points are rescaled to
    ``u = (idx - j) / H`` and ``v = (e - y2) / e_ref``, rotated so the chord
    between the outer anchors is horizontal (origin at the middle anchor),
    and fitted by least squares over ``idx in [j - H, j + H]``.
    """
    H, h = cfg.H, cfg.h
    e = np.asarray(e_series, dtype=np.float64)
    lo, hi = j - H - h, j + H + h
    if lo < 1 or hi > e.size:
        raise ValueError(f"curvature at {j} needs e_{lo}..e_{hi}, have {e.size} values")
    return _window_curvature(e[lo - 1 : hi], cfg)


def _window_curvature(window: np.ndarray, cfg: MonitorConfig) -> float:
    """Curvature at the center of ``window`` (length ``2 (H + h) + 1``)."""
    H, h = cfg.H, cfg.h
    mid = H + h
    assert window.size == 2 * mid + 1
    n = 2 * h + 1
    y1 = window[:n].sum() / n
    y2 = window[mid - h : mid + h + 1].sum() / n
    y3 = window[-n:].sum() / n

    u = np.arange(-H, H + 1, dtype=np.float64) / H
    v = (window[h : h + 2 * H + 1] - y2) / cfg.e_ref
    du = 2.0
    dv = (y3 - y1) / cfg.e_ref
    norm = math.hypot(du, dv)
    cos, sin = du / norm, dv / norm
    ur = u * cos + v * sin
    vr = v * cos - u * sin
    return _fit_quadratic(ur, vr)


def _fit_quadratic(u: np.ndarray, v: np.ndarray) -> float:
    """Leading coefficient of the least-squares parabola through ``(u, v)``.

    Solves the 3x3 normal equations by Cramer's rule. ``u`` stays within a
    few units of zero, so the moment matrix is well conditioned. einsum
    avoids BLAS, which keeps the summation order independent of threading.
    """
    basis = np.stack((u * u, u, np.ones_like(u)))
    (s4, s3, s2), (_, _, s1), (_, _, s0) = np.einsum("ik,jk->ij", basis, basis).tolist()
    r2, r1, r0 = np.einsum("ik,k->i", basis, v).tolist()
    det = s4 * (s2 * s0 - s1 * s1) - s3 * (s3 * s0 - s1 * s2) + s2 * (s3 * s1 - s2 * s2)
    num = r2 * (s2 * s0 - s1 * s1) - s3 * (r1 * s0 - s1 * r0) + s2 * (r1 * s1 - s2 * r0)
    return num / det


def curvature_series(e_series, cfg: MonitorConfig) -> np.ndarray:
    """Curvature at every ``j = H + h + 1 .. n - H - h`` (offline)."""
    e = np.asarray(e_series, dtype=np.float64)
    first, last = cfg.lag + 1, e.size - cfg.lag
    return np.array([curvature_at(e, j, cfg) for j in range(first, last + 1)])


def select_best(curvatures, first_index: int) -> tuple[int, float]:
    """Global maximum of a curvature series, earliest index on ties."""
    c = np.asarray(curvatures)
    if c.size == 0:
        raise ValueError("no curvature values")
    k = int(np.argmax(c))  # argmax returns the first occurrence
    return first_index + k, float(c[k])


@dataclass
class Best:
    index: int
    curvature: float
    image: np.ndarray | None = field(default=None, repr=False)
    found_at: int = 0  # iteration at which this curvature was computed


@dataclass
class Update:
    """What one :meth:`MonitorState.ingest` call produced."""

    i: int
    e: float
    j: int | None = None
    curvature: float | None = None
    best_index: int | None = None
    stop: bool = False


class MonitorState:
    """Online version of the curvature argmax with bounded image memory.

    ``e_op`` maps an iterate to its pseudo-noise component; pass
    ``keep_images=False`` to track only scalars.
    """

    def __init__(self, cfg: MonitorConfig, e_op: Callable[[np.ndarray], float] | None = None, keep_images: bool = True):
        cfg.validate()
        self.cfg = cfg
        self.e_op = e_op
        self.keep_images = keep_images
        self.e_series: list[float] = []
        self.curvature_series: list[float] = []
        self.image_ring: deque = deque(maxlen=cfg.lag + 1)
        self.best: Best | None = None

    @property
    def iteration(self) -> int:
        return len(self.e_series)

    @property
    def first_curvature_index(self) -> int:
        return self.cfg.lag + 1

    def ingest(self, x: np.ndarray | None = None, *, i: int | None = None, e: float | None = None) -> Update:
        """Record iterate ``i`` (defaults to the next index).

        Either ``x`` (reduced with ``e_op``) or a precomputed ``e`` must be given.
        """
        expected = self.iteration + 1
        if i is not None and i != expected:
            raise ValueError(f"out-of-order ingestion: got iteration {i}, expected {expected}")
        i = expected
        if e is None:
            if x is None or self.e_op is None:
                raise ValueError("need an image and an e_op, or a precomputed e")
            e = self.e_op(x)
        self.e_series.append(float(e))
        if self.keep_images:
            self.image_ring.append(None if x is None else np.array(x, copy=True))

        update = Update(i=i, e=float(e))
        j = i - self.cfg.lag
        if j >= self.first_curvature_index:
            window = np.asarray(self.e_series[-(2 * self.cfg.lag + 1) :])
            c = _window_curvature(window, self.cfg)
            self.curvature_series.append(c)
            update.j, update.curvature = j, c
            if self.best is None or c > self.best.curvature:
                # The oldest ring entry is x_j.
                image = self.image_ring[0] if self.keep_images else None
                self.best = Best(index=j, curvature=c, image=image, found_at=i)
        if self.best is not None:
            update.best_index = self.best.index
            update.stop = self.cfg.patience > 0 and i - self.best.found_at >= self.cfg.patience
        return update

    def finalize(self) -> tuple[int, np.ndarray | None, np.ndarray]:
        """Return ``(i_star, x_star, curvature_series)``."""
        if self.best is None:
            raise ValueError(
                f"run too short: {self.iteration} iterations, need at least {self.cfg.min_iterations}"
            )
        return self.best.index, self.best.image, np.asarray(self.curvature_series)
