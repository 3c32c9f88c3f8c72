"""Run configuration: a flat ``key = value`` file plus command-line overrides.

Grammar, one entry per line::

    # comment
    key = value          # trailing comments are allowed
    channels_per_level = 16, 32, 64

Blank lines are ignored. Keys are the field names of :class:`RunConfig`;
dashes and underscores are interchangeable. Tuple fields take
comma-separated integers. Unknown keys are an error.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from ..dipnet import NetConfig, TASK_KINDS
from ..noisegen import DEFAULT_SIGMA
from ..oscmonitor import MonitorConfig


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# Iteration budgets used for each task unless max_iters is given.
DEFAULT_ITERATIONS = {"denoise": 3000, ("super-resolve", 4): 2000, ("super-resolve", 8): 8000, "inpaint": 5000}


@dataclass
class RunConfig:
    task: str = "denoise"
    input: str = ""
    mask: str | None = None
    factor: int | None = None
    gt: str | None = None
    out: str = "osc_out"
    seed: int = 0
    max_iters: int | None = None

    # pseudo-noise
    sigma: float = DEFAULT_SIGMA
    pn_kind: str | None = None  # default: gaussian, or row-sinusoid for inpainting

    # monitor
    H: int = 200
    h: int = 20
    patience: int = 500
    e_ref: float | None = None  # default: mean square of the pseudo-noise

    # network / optimizer
    lr: float = 0.002
    input_channels: int = 8
    channels_per_level: tuple[int, ...] = (16, 32, 64)
    skip_channels: tuple[int, ...] = (4, 4, 4)
    lanczos_lobes: int = 3

    determinism: bool = True
    plot: bool = True

    def iterations(self) -> int:
        if self.max_iters is not None:
            return self.max_iters
        key = (self.task, self.factor) if self.task == "super-resolve" else self.task
        return DEFAULT_ITERATIONS.get(key, 3000)

    def resolved_pn_kind(self) -> str:
        if self.pn_kind is not None:
            return self.pn_kind
        return "row-sinusoid" if self.task == "inpaint" else "gaussian"

    def monitor_config(self, e_ref: float) -> MonitorConfig:
        return MonitorConfig(H=self.H, h=self.h, e_ref=e_ref if self.e_ref is None else self.e_ref, patience=self.patience)

    def net_config(self, output_channels: int, seed: int) -> NetConfig:
        return NetConfig(
            input_channels=self.input_channels,
            channels_per_level=tuple(self.channels_per_level),
            skip_channels=tuple(self.skip_channels),
            output_channels=output_channels,
            seed=seed,
        )

    def validate(self) -> None:
        if self.task not in TASK_KINDS:
            raise ConfigError(f"task must be one of {TASK_KINDS}, got {self.task!r}")
        if not self.input:
            raise ConfigError("an input image is required")
        if self.task == "super-resolve" and self.factor not in (4, 8):
            raise ConfigError("super-resolution needs factor 4 or 8")
        if self.task == "inpaint" and not self.mask:
            raise ConfigError("inpainting needs a mask")
        if not self.sigma > 0:
            raise ConfigError(f"pseudo-noise sigma must be > 0, got {self.sigma}")
        if self.pn_kind not in (None, "gaussian", "row-sinusoid"):
            raise ConfigError(f"unknown pseudo-noise kind {self.pn_kind!r}")
        if not (self.H > self.h >= 1):
            raise ConfigError(f"need H > h >= 1, got H={self.H}, h={self.h}")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")
        if self.e_ref is not None and not self.e_ref > 0:
            raise ConfigError("e_ref must be > 0")
        if self.iterations() < 2 * (self.H + self.h) + 1:
            raise ConfigError(f"max_iters must be at least 2(H+h)+1 = {2 * (self.H + self.h) + 1}")
        if not self.lr >= 0:
            raise ConfigError("lr must be >= 0")
        if len(self.channels_per_level) != len(self.skip_channels):
            raise ConfigError("channels_per_level and skip_channels must have the same length")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ", ".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    if raw.lower() in ("", "none"):
        if "None" in str(kind):
            return None
        raise ConfigError(f"{name} cannot be empty")
    try:
        if "tuple" in str(kind):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if "bool" in str(kind):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in str(kind) and "float" not in str(kind):
            return int(raw)
        if "float" in str(kind):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def _canonical(key: str) -> str:
    key = key.strip().replace("-", "_")
    if key in _FIELDS:
        return key
    if key == "max_iterations":
        return "max_iters"
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        name = _canonical(key)
        values[name] = _convert(name, raw.strip())
    return values


def load_config(path: str | os.PathLike | None = None, **overrides) -> RunConfig:
    """Build a :class:`RunConfig` from an optional file, then apply overrides.

    Overrides whose value is ``None`` are ignored.
    """
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    for key, value in overrides.items():
        if value is None:
            continue
        name = _canonical(key)
        values[name] = _convert(name, value) if isinstance(value, str) else value
    cfg = dataclasses.replace(RunConfig(), **values)
    cfg.validate()
    return cfg
