"""CLI: ``lqrplots render --panel <type> --in <files...> --out <png>``.

Exit codes: 0 success, 2 validation/schema error, 3 rendering failure.
"""

from __future__ import annotations

import argparse
import sys

from .render import PANELS, FigureSpec, SchemaError, render


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lqrplots", description="Render benchmark result figures")
    subs = parser.add_subparsers(dest="command", required=True)
    sub = subs.add_parser("render", help="render one panel from result files")
    sub.add_argument("--panel", choices=list(PANELS), required=True)
    sub.add_argument("--in", dest="inputs", nargs="+", required=True, help="input CSV/JSON files")
    sub.add_argument("--out", required=True, help="output PNG path")
    sub.add_argument("--linear-y", action="store_true", help="disable the default log y-axis")
    sub.add_argument("--log-x", action="store_true")
    sub.add_argument("--title", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        spec = FigureSpec(
            inputs=tuple(args.inputs),
            panel=args.panel,
            out=args.out,
            log_y=not args.linear_y,
            log_x=args.log_x,
            title=args.title,
        )
        out = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # rendering/backend failure
        print(f"render failure: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
