"""Command line entry point.

    anithresh simulate <config.yaml> [--set key=value ...] [--output DIR]
    anithresh preset <name> [--set key=value ...] [--output DIR]
    anithresh converge <config.yaml> [...]
    anithresh kernel-info <config.yaml> [...]
    anithresh presets

Outputs go to ``--output`` or to ``$ANITHRESH_OUTPUT_ROOT/<name>``
(default root: ``./anithresh-runs``).  Exit status is 0 on success, 2 for
configuration errors and 1 for failures during a run.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ..errors import AnithreshError, ConfigError
from .config import parse_config
from .presets import preset_names, run_preset
from .runner import emit_report, run_experiment

OUTPUT_ENV = "ANITHRESH_OUTPUT_ROOT"
DEFAULT_ROOT = "anithresh-runs"


def output_dir(name: str, explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_ROOT)) / name


def _common(p: argparse.ArgumentParser):
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (dotted path), may be repeated")
    p.add_argument("--output", help="output directory (overrides the env root)")
    p.add_argument("--quiet", action="store_true", help="do not print the summary")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anithresh", description="Anisotropic threshold dynamics experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "run a free or substrate evolution from a config file"),
        ("converge", "run a convergence study from a config file"),
        ("kernel-info", "tabulate induced tension and mobility of kernels"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="YAML config file")
        _common(p)
    p = sub.add_parser("preset", help="run a named preset")
    p.add_argument("name", help=f"one of: {', '.join(preset_names())}")
    _common(p)
    sub.add_parser("presets", help="list preset names")
    return ap


_MODE_FOR = {"converge": "convergence", "kernel-info": "kernel-info"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return 0
    try:
        if args.command == "preset":
            if args.name not in preset_names():
                raise ConfigError(f"unknown preset {args.name!r}; choose from {preset_names()}")
            rep = run_preset(args.name, args.overrides)
        else:
            base = {"mode": _MODE_FOR[args.command]} if args.command in _MODE_FOR else None
            cfg = parse_config(Path(args.config), args.overrides, base=base)
            if args.command == "simulate" and cfg.mode not in ("free", "substrate"):
                raise ConfigError(f"simulate needs mode free or substrate, got {cfg.mode}")
            if args.command in _MODE_FOR and cfg.mode != _MODE_FOR[args.command]:
                raise ConfigError(f"{args.command} needs mode {_MODE_FOR[args.command]}, got {cfg.mode}")
            rep = run_experiment(cfg)
        out = output_dir(rep.name, args.output)
        emit_report(rep, out)
    except ConfigError as exc:
        print(f"anithresh: configuration error: {exc}", file=sys.stderr)
        return 2
    except (AnithreshError, OSError, ValueError) as exc:
        print(f"anithresh: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        for k, v in rep.summary.items():
            print(f"{k}: {v}")
        print(f"output: {out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
