"""End-to-end restoration runs with automatic stopping."""

from __future__ import annotations

import json
import logging
import os
import time
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .. import dipnet
from ..imagecore import ImageError, load_image, load_mask, psnr, save_image
from ..noisegen import PseudoNoise, gen_gaussian_pn, gen_sinusoid_pn
from ..oscmonitor import MonitorState, compute_e, compute_e_masked
from .config import ConfigError, RunConfig

log = logging.getLogger(__name__)


class RunError(RuntimeError):
    """A failure during optimization, tagged with the iteration it happened at."""

    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"iteration {iteration}: {cause}")
        self.iteration = iteration


@dataclass
class RunRecord:
    loss: list[float] = field(default_factory=list)
    e: list[float] = field(default_factory=list)
    # curvature[i-1] is the value computed at iteration i (for j = i - H - h)
    curvature: list[float | None] = field(default_factory=list)
    psnr: list[float] | None = None
    H: int = 200
    h: int = 20
    i_star: int | None = None
    psnr_at_i_star: float | None = None
    max_psnr: float | None = None
    accuracy_ratio: float | None = None
    stopped_early: bool = False
    config: str = ""
    wall_clock: float = 0.0
    x_star: np.ndarray | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.e)

    def curvature_points(self) -> tuple[np.ndarray, np.ndarray]:
        """``(j, C(e_j))`` for every computed curvature."""
        lag = self.H + self.h
        pairs = [(i + 1 - lag, c) for i, c in enumerate(self.curvature) if c is not None]
        if not pairs:
            return np.empty(0, dtype=int), np.empty(0)
        j, c = zip(*pairs)
        return np.array(j), np.array(c)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "i_star": self.i_star,
            "psnr_at_i_star": self.psnr_at_i_star,
            "max_psnr": self.max_psnr,
            "accuracy": self.accuracy_ratio if self.accuracy_ratio is not None else "n/a",
            "stopped_early": self.stopped_early,
            "wall_clock_s": round(self.wall_clock, 3),
        }


def accuracy(record: RunRecord) -> float:
    """PSNR of the selected iterate divided by the best PSNR seen in the run."""
    if not record.psnr:
        raise ValueError("record has no PSNR track (run without ground truth)")
    if record.i_star is None:
        raise ValueError("record has no selected iterate")
    return record.psnr[record.i_star - 1] / max(record.psnr)


def derive_seeds(seed: int) -> tuple[int, int]:
    """Independent ``(network, pseudo-noise)`` seeds from one run seed."""
    net_seq, pn_seq = np.random.SeedSequence(seed).spawn(2)
    return int(net_seq.generate_state(1, np.uint64)[0]), int(pn_seq.generate_state(1, np.uint64)[0])


def _make_pn(cfg: RunConfig, shape, seed: int) -> PseudoNoise:
    if cfg.resolved_pn_kind() == "row-sinusoid":
        return gen_sinusoid_pn(shape, seed)
    return gen_gaussian_pn(shape, cfg.sigma, seed)


def build_task(cfg: RunConfig) -> tuple[dipnet.TaskSpec, np.ndarray | None]:
    """Load inputs and assemble the task; returns ``(task, ground_truth)``."""
    x0 = load_image(cfg.input)
    c, h, w = x0.shape
    shape = (c, h * cfg.factor, w * cfg.factor) if cfg.task == "super-resolve" else x0.shape
    mask = None
    if cfg.task == "inpaint":
        mask = load_mask(cfg.mask)
        if mask.shape != shape[1:]:
            raise ConfigError(f"mask shape {mask.shape} does not match image {shape[1:]}")
    gt = None
    if cfg.gt:
        gt = load_image(cfg.gt)
        if gt.shape != shape:
            raise ConfigError(f"ground truth shape {gt.shape} does not match restored shape {shape}")
    _, pn_seed = derive_seeds(cfg.seed)
    pn = _make_pn(cfg, shape, pn_seed)
    task = dipnet.TaskSpec(cfg.task, x0, pn, factor=cfg.factor, mask=mask)
    return task, gt


def run(cfg: RunConfig, *, write: bool = True) -> RunRecord:
    """Optimize, monitor and select; writes outputs to ``cfg.out`` when ``write``."""
    cfg.validate()
    limits = threadpool_limits(limits=1) if cfg.determinism else nullcontext()
    with limits:
        return _run(cfg, write)


def _run(cfg: RunConfig, write: bool) -> RunRecord:
    start = time.perf_counter()
    task, gt = build_task(cfg)
    pn = task.pn
    if task.kind == "inpaint":
        e_op = lambda x: compute_e_masked(x, pn, task.mask)  # noqa: E731
    else:
        e_op = lambda x: compute_e(x, pn)  # noqa: E731

    monitor = MonitorState(cfg.monitor_config(pn.energy()), e_op)
    net_seed, _ = derive_seeds(cfg.seed)
    state = dipnet.net_init(cfg.net_config(pn.shape[0], net_seed), pn.shape)
    record = RunRecord(H=cfg.H, h=cfg.h, config=cfg.to_text(), psnr=[] if gt is not None else None)

    n_iter = cfg.iterations()
    for i in range(1, n_iter + 1):
        try:
            state, x, loss = dipnet.backward_step(state, task, cfg.lr)
            update = monitor.ingest(x, i=i)
        except (dipnet.DivergenceError, ImageError, ValueError, FloatingPointError) as exc:
            raise RunError(i, exc) from exc
        record.loss.append(loss)
        record.e.append(update.e)
        record.curvature.append(update.curvature)
        if gt is not None:
            record.psnr.append(psnr(x, gt))
        if i % 500 == 0:
            log.info("iter %d loss %.6g e %.6g best %s", i, loss, update.e, update.best_index)
        if update.stop:
            record.stopped_early = True
            log.info("early stop at iteration %d (best %d)", i, update.best_index)
            break

    if monitor.best is None:
        raise RunError(record.iterations, ValueError("run too short for any curvature"))
    i_star, x_star, _ = monitor.finalize()
    record.i_star = i_star
    record.x_star = x_star
    if gt is not None:
        record.psnr_at_i_star = record.psnr[i_star - 1]
        record.max_psnr = max(record.psnr)
        record.accuracy_ratio = accuracy(record)
    record.wall_clock = time.perf_counter() - start
    if write:
        write_outputs(record, cfg)
    return record


def write_outputs(record: RunRecord, cfg: RunConfig) -> None:
    from .report import emit_csv, emit_plot

    os.makedirs(cfg.out, exist_ok=True)
    save_image(record.x_star, os.path.join(cfg.out, "restored.png"))
    emit_csv(record, os.path.join(cfg.out, "run.csv"))
    with open(os.path.join(cfg.out, "config.txt"), "w") as fh:
        fh.write(record.config)
    summary = record.summary()
    summary.pop("wall_clock_s")
    with open(os.path.join(cfg.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg.plot and len(record.curvature_points()[0]) >= 2:
        emit_plot(record, os.path.join(cfg.out, "curves.svg"))
