"""CLI: `irs-figures render --spec spec.json` (exit 0 ok, 1 schema/spec error)."""

from __future__ import annotations

import argparse
import sys

from .render import SchemaError, load_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="irs-figures", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from a JSON spec")
    p.add_argument("--spec", required=True, metavar="PATH", help="figure spec JSON")
    args = parser.parse_args(argv)
    try:
        summary = render(load_spec(args.spec))
    except SchemaError as err:
        print(f"irs-figures: {err}", file=sys.stderr)
        return 1
    print(f"rendered {len(summary['series'])} series ({summary['points']} points)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
