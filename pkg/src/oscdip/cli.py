"""Command-line entry point: ``oscdip --task denoise --input noisy.png --out results``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness.config import ConfigError, load_config
from .harness.runner import RunError, run
from .imagecore import ImageError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="oscdip",
        description="Restore an image with a deep image prior and stop automatically.",
        allow_abbrev=False,
    )
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--task", choices=["denoise", "super-resolve", "inpaint"])
    p.add_argument("--input", help="corrupted observation (PNG)")
    p.add_argument("--mask", help="inpainting mask PNG (0 = missing, 255 = known)")
    p.add_argument("--factor", type=int, help="super-resolution factor (4 or 8)")
    p.add_argument("--gt", help="ground truth PNG, used only to report PSNR")
    p.add_argument("--sigma", type=float, help="std of the Gaussian pseudo-noise")
    p.add_argument("--H", type=int, dest="H", help="curvature half-window")
    p.add_argument("--h", type=int, dest="h", help="averaging half-window")
    p.add_argument("--patience", type=int, help="iterations past the best before stopping (0 = run to max-iters)")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-plot", dest="plot", action="store_false", default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    try:
        cfg = load_config(args.config, **overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        record = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunError, ImageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    summary = record.summary()
    acc = summary["accuracy"]
    print(f"i* = {record.i_star} after {record.iterations} iterations", end="")
    if isinstance(acc, float):
        print(f"; PSNR {record.psnr_at_i_star:.2f} dB vs max {record.max_psnr:.2f} dB (accuracy {acc:.2%})")
    else:
        print("; accuracy n/a (no ground truth)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
