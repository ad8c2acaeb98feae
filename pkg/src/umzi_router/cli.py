"""Command-line entry point: ``umzi-router <scenario> [--config F] [--seed N] [--out DIR] [--set k=v ...]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, build_config, default_config_dict, validate_and_load
from .experiments import RUNNERS

DESCRIPTIONS = {
    "fig3": "coincidence histograms at phi = pi/2 and pi, three-peak fit, CAR",
    "fig4": "phase sweeps of the antibunched and bunched virtual ports with fringe fits",
    "fig5": "spatial-beating delay scan of the pure antibunched state",
    "sweep": "phase sweep of a single port pair",
    "simulate": "one acquisition at the configured phase",
    "validate": "check a config file and print the merged configuration",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config (defaults are used when omitted)")
    p.add_argument("--seed", type=int, help="master RNG seed; overrides the config file")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: ./results)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field by dotted path, e.g. umzi.phi_rad=1.5708 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="umzi-router",
        description="Simulate a phase-controlled two-photon router built from an unbalanced Mach-Zehnder "
                    "interferometer. Precedence of settings: --set > --config file > built-in defaults.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, text in DESCRIPTIONS.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "validate":
            p.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate" and args.print_defaults:
        print(json.dumps(default_config_dict(), indent=2))
        return 0
    scenario = None if args.command == "validate" else args.command
    try:
        if args.config is not None:
            cfg = validate_and_load(args.config, args.overrides, args.seed, scenario)
        else:
            cfg = build_config({}, args.overrides, args.seed, scenario)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(json.dumps(cfg.raw, indent=2, sort_keys=True))
        print(f"ok: config_sha256={cfg.digest()}", file=sys.stderr)
        return 0
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        report = RUNNERS[args.command](cfg, args.out)
    except OSError as e:
        print(f"error: {e.filename or args.out}: {e.strerror or e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"{args.command}: wrote {report['scenario']} outputs to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
