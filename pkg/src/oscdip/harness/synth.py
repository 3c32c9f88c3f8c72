"""Synthetic e-curves for exercising the monitor without training a network."""

from __future__ import annotations

import numpy as np

SYNTH_KINDS = ("sigmoid", "linear", "piecewise")


def synth_curve(kind: str, params: dict | None = None, length: int = 1000, noise_sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    """Return ``e_1 .. e_length`` for one of the synthetic shapes.

    ``sigmoid``: ``base + amp / (1 + exp(-(i - center) / width))``, inflection at ``center``.
    ``linear``: ``intercept + slope * i``.
    ``piecewise``: flat at ``base`` until ``knee``, then rising with ``slope``.

    Gaussian noise of standard deviation ``noise_sigma`` is added when positive.
    """
    params = dict(params or {})
    if length < 1:
        raise ValueError("length must be positive")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    i = np.arange(1, length + 1, dtype=np.float64)
    if kind == "sigmoid":
        center = params.get("center", length / 2)
        width = params.get("width", length / 20)
        if width <= 0:
            raise ValueError("sigmoid width must be positive")
        e = params.get("base", 0.0) + params.get("amp", 1.0) / (1.0 + np.exp(-(i - center) / width))
    elif kind == "linear":
        e = params.get("intercept", 0.0) + params.get("slope", 1e-3) * i
    elif kind == "piecewise":
        knee = params.get("knee", length / 2)
        e = params.get("base", 0.0) + params.get("slope", 1e-3) * np.maximum(0.0, i - knee)
    else:
        raise ValueError(f"unknown curve kind {kind!r}; expected one of {SYNTH_KINDS}")
    if noise_sigma > 0:
        e = e + np.random.default_rng(seed).normal(0.0, noise_sigma, size=length)
    return e
