"""Command-line entry point: ``mkdvlab <experiment> [--config PATH] [--out DIR] [--seed N] [--threads N]``.

Exit status is 0 when every criterion of the run passes, 1 when any fails
and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .experiments import KINDS, ConfigError, default_config, load_config, run

log = logging.getLogger("mkdvlab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mkdvlab", description="mKdV soliton/breather numerical experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="YAML or JSON run configuration (defaults are used when omitted)")
        p.add_argument("--out", help="output directory for report.json and CSV tables")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker threads for independent tasks")
        p.add_argument("-q", "--quiet", action="store_true", help="only print the final status line")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else default_config(args.command)
        if cfg.kind != args.command:
            raise ConfigError(f"config describes a {cfg.kind!r} run, not {args.command!r}")
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            cfg.seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be >= 1")
            cfg.threads = args.threads
        report = run(cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.lines():
        log.info(line)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {cfg.kind} ({sum(c.passed for c in report.criteria)}/{len(report.criteria)} criteria, {report.wall_clock:.1f}s)")
    if cfg.out:
        log.info("report written to %s", cfg.out)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
