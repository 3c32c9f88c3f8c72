"""CSV and SVG output for a :class:`~oscdip.harness.runner.RunRecord`."""

from __future__ import annotations

import csv
import os

import numpy as np

from ..imagecore import minmax_normalize


def _fmt(value) -> str:
    # repr gives the shortest string that parses back to the same double.
    return "" if value is None else repr(float(value))


def emit_csv(record, path: str | os.PathLike) -> None:
    """Write one row per iteration.

    Columns are ``iter, loss, e, curvature`` and ``psnr`` when ground truth
    was available. The curvature in row ``i`` is the value computed at that
    iteration, i.e. for index ``i - H - h``; earlier rows leave it blank.
    """
    header = ["iter", "loss", "e", "curvature"]
    if record.psnr is not None:
        header.append("psnr")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(record.iterations):
            row = [str(k + 1), _fmt(record.loss[k]), _fmt(record.e[k]), _fmt(record.curvature[k])]
            if record.psnr is not None:
                row.append(_fmt(record.psnr[k]))
            writer.writerow(row)


def read_csv(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Parse a CSV written by :func:`emit_csv`; blanks become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {
        name: np.array([float(r[k]) if r[k] else np.nan for r in body])
        for k, name in enumerate(header)
    }


def plot_series(record, reference=None) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """The normalized ``(x, y)`` curves that :func:`emit_plot` draws.

    With a ``reference`` record (a run without pseudo-noise), this run's PSNR
    curve is scaled by the reference PSNR range instead of its own.
    """
    iters = np.arange(1, record.iterations + 1)
    series = {"e": (iters, minmax_normalize(record.e))}
    j, c = record.curvature_points()
    series["curvature"] = (j, minmax_normalize(c))
    if record.psnr:
        if reference is not None and reference.psnr:
            lo, hi = min(reference.psnr), max(reference.psnr)
            series["reference psnr"] = (np.arange(1, reference.iterations + 1), minmax_normalize(reference.psnr))
            span = hi - lo if hi > lo else 1.0
            series["psnr"] = (iters, (np.asarray(record.psnr) - lo) / span)
        else:
            series["psnr"] = (iters, minmax_normalize(record.psnr))
    return series


def emit_plot(record, path: str | os.PathLike, reference=None) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Draw the normalized curves and a marker at the selected iterate as SVG.

    Returns the plotted series, plus the marker coordinates under ``"i*"``,
    so callers can cross-check them.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = plot_series(record, reference)
    # A fixed hash salt makes the generated SVG element ids reproducible.
    with matplotlib.rc_context({"svg.hashsalt": "oscdip"}):
        marker = _draw(plt, record, series, path)
    series["i*"] = (np.asarray(marker.get_xdata(), dtype=float), np.asarray(marker.get_ydata(), dtype=float))
    return series


def _draw(plt, record, series, path):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, (x, y) in series.items():
        ax.plot(x, y, label=name, linewidth=1.0, gid=name.replace(" ", "-"))
    marker = ax.axvline(record.i_star, color="k", linestyle="--", linewidth=0.8, gid="i-star", label=f"i* = {record.i_star}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("normalized value")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return marker
