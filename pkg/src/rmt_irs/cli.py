"""Command-line interface.

Subcommands: da, mc, optimize, sweep (evaluation) and preset (emit config
JSON). Exit codes: 0 success, 1 configuration/usage error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .det_equiv import FixedPointError
from .harness import (
    PRESET_NAMES,
    ConfigError,
    ExperimentConfig,
    load_config,
    preset_variants,
    run_sweep,
    save_config,
)

_METHOD_OVERRIDE = {"da": ("da",), "mc": ("mc",), "optimize": ("ao",)}


class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors (exit 1); 2 is reserved for solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="rmt-irs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p: _Parser, with_run_flags: bool) -> None:
        p.add_argument("--config", metavar="PATH", help="JSON experiment configuration")
        p.add_argument("--preset", metavar="NAME", choices=PRESET_NAMES,
                       help="built-in figure preset (all variants)")
        p.add_argument("--out", metavar="PATH",
                       help="output CSV file (single config) or directory (preset family)")
        if with_run_flags:
            p.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
            p.add_argument("--threads", type=int, metavar="N",
                           help="worker threads (default: RMT_IRS_THREADS or 1)")
            p.add_argument("--no-timing", action="store_true",
                           help="leave wall_time_ms empty for byte-reproducible output")

    for name, help_text in (
        ("da", "deterministic rate approximation at the configured initial point"),
        ("mc", "Monte Carlo ergodic rate at the configured initial point"),
        ("optimize", "alternating optimization; reports the optimized approximation"),
        ("sweep", "run every method listed in the configuration"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p, with_run_flags=True)

    p = sub.add_parser("preset", help="write preset configuration JSON files")
    p.add_argument("name", nargs="?", choices=PRESET_NAMES, help="preset name")
    p.add_argument("--preset", metavar="NAME", choices=PRESET_NAMES, dest="preset")
    p.add_argument("--out", metavar="DIR", help="directory for the config files (default: .)")
    return parser


def _load_configs(args) -> list[ExperimentConfig]:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config or --preset is required")
    if args.config:
        return [load_config(args.config)]
    return preset_variants(args.preset)


def _emit_preset(args) -> int:
    name = args.preset or args.name
    if name is None:
        raise ConfigError("preset name required (positional or --preset)")
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for cfg in preset_variants(name):
        path = out_dir / f"{cfg.label}.json"
        save_config(cfg, path)
        print(path)
    return 0


def _run(args, command: str) -> int:
    configs = _load_configs(args)
    override = _METHOD_OVERRIDE.get(command)
    multi = len(configs) > 1
    out_dir = Path(args.out) if (multi and args.out) else None
    for cfg in configs:
        if override is not None:
            try:
                cfg = replace(cfg, methods=override)
            except ConfigError as err:
                if multi:
                    # e.g. the rayleigh baseline variant under `da`/`optimize`
                    print(f"skipping {cfg.label}: {err}")
                    continue
                raise
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if multi:
            stem = cfg.label or "sweep"
            target = (out_dir or Path(".")) / f"{stem}.csv"
        else:
            target = args.out or cfg.output or f"{cfg.label or 'sweep'}.csv"
        records = run_sweep(cfg, threads=args.threads, out=target,
                            measure_time=not args.no_timing)
        print(f"wrote {target} ({len(records)} records)")
        for r in records:
            extra = f" stderr={r.stderr:.3g}" if r.stderr is not None else ""
            extra += f" iters={r.iterations}" if r.iterations is not None else ""
            print(f"  {r.method:>2} snr={r.snr_db:g} dB  "
                  f"rate={r.rate_bits_per_antenna:.6f} bits/antenna{extra}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "preset":
            return _emit_preset(args)
        return _run(args, args.command)
    except ConfigError as err:
        print(f"rmt-irs: config error: {err}", file=sys.stderr)
        return 1
    except FixedPointError as err:
        print(f"rmt-irs: solver failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
