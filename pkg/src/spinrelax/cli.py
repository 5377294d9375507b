"""Command-line front end: ``spinrelax run|table|validate <config>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .errors import DegenerateParametersError, InsufficientHorizonError, SolverError, SweepRangeError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

_CONVENTION_KEYS = {
    "literal-q": ("q_convention", "literal-q"),
    "scaled-q": ("q_convention", "scaled-q"),
    "rate": ("units", "rate"),
    "angular": ("units", "angular"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinrelax",
        description="Spin relaxation in field gradients with depolarizing walls.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run the scenario and write CSV, SVG and a run manifest"),
        ("table", "write the second-order perturbation table for the config's parameters"),
        ("validate", "parse and validate the config only"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path, help="TOML config or JSON run manifest")
        p.add_argument("--workers", type=int, default=1, help="parallel sweep workers (default 1)")
        p.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory (default ./out)")
        p.add_argument("--convention", action="append", default=[], choices=sorted(_CONVENTION_KEYS),
                       help="slow-down placement (literal-q|scaled-q) or gyro units (rate|angular); repeatable")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    for conv in args.convention:
        key, value = _CONVENTION_KEYS[conv]
        overrides[("run", key)] = value

    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.mode})")
        return EXIT_OK

    from .runner import run_config

    try:
        result = run_config(cfg, args.out_dir, workers=args.workers, table=args.command == "table")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, InsufficientHorizonError, SweepRangeError, DegenerateParametersError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if result.failed:
        print(f"{result.failed} of {len(result.rows)} points failed; see the error column", file=sys.stderr)
        return EXIT_SOLVER
    print(f"wrote {len(result.rows)} rows to {args.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
