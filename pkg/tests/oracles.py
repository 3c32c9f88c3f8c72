"""Slow, independent reference implementations used as test oracles."""

import numpy as np


def lanczos_1d(x, a=3):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < a
    out[inside] = np.sinc(x[inside]) * np.sinc(x[inside] / a)
    return out


def downsample_2d(img, factor, a=3):
    """Direct 2-D windowed-sinc filtering with reflect padding, pixel by pixel."""
    c, h, w = img.shape
    pad = a * factor + 2
    padded = np.pad(img, ((0, 0), (pad, pad), (pad, pad)), mode="reflect")
    out = np.zeros((c, h // factor, w // factor))
    for p in range(h // factor):
        cy = (p + 0.5) * factor - 0.5
        for q in range(w // factor):
            cx = (q + 0.5) * factor - 0.5
            acc = np.zeros(c)
            total = 0.0
            for r in range(int(np.floor(cy)) - a * factor, int(np.floor(cy)) + a * factor + 1):
                for s in range(int(np.floor(cx)) - a * factor, int(np.floor(cx)) + a * factor + 1):
                    wt = lanczos_1d([(r - cy) / factor])[0] * lanczos_1d([(s - cx) / factor])[0]
                    if wt == 0.0:
                        continue
                    acc += wt * padded[:, r + pad, s + pad]
                    total += wt
            out[:, p, q] = acc / total
    return out


def curvature(e, j, H, h, e_ref):
    """Chord-rotated quadratic coefficient at 1-based ``j``, via ``np.polyfit``."""
    e = np.asarray(e, dtype=float)
    val = lambda idx: e[idx - 1]  # noqa: E731
    y1 = sum(val(k) for k in range(j - H - h, j - H + h + 1)) / (2 * h + 1)
    y2 = sum(val(k) for k in range(j - h, j + h + 1)) / (2 * h + 1)
    y3 = sum(val(k) for k in range(j + H - h, j + H + h + 1)) / (2 * h + 1)
    angle = np.arctan2((y3 - y1) / e_ref, 2.0)
    rot = np.array([[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]])
    pts = np.array([[(k - j) / H, (val(k) - y2) / e_ref] for k in range(j - H, j + H + 1)])
    uv = pts @ rot.T
    return np.polyfit(uv[:, 0], uv[:, 1], 2)[0]


def curvature_argmax(e, H, h, e_ref):
    first = H + h + 1
    values = [curvature(e, j, H, h, e_ref) for j in range(first, len(e) - H - h + 1)]
    return first + int(np.argmax(values)), np.array(values)
