"""Command line for rendering figures from bifsim CSV outputs."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .io import SchemaError
from .render import FIGURE_KINDS, FigureSpec, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bifsim-figures",
        description="render vector figures from bifsim CSV outputs",
    )
    parser.add_argument(
        "kind",
        choices=[k.replace("_", "-") for k in FIGURE_KINDS],
        help="figure kind",
    )
    parser.add_argument("--inputs", nargs="+", required=True, help="input CSV paths")
    parser.add_argument("--output", required=True, help="output image path (.svg or .pdf)")
    parser.add_argument("--bins", type=int, default=60, help="histogram bin count")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            kind=args.kind.replace("-", "_"),
            inputs=tuple(args.inputs),
            output=args.output,
            bins=args.bins,
        )
    except ValueError as exc:
        print(f"bifsim-figures: error: {exc}", file=sys.stderr)
        return 2
    try:
        path = render(spec)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"bifsim-figures: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"bifsim-figures: i/o error: {exc}", file=sys.stderr)
        return 4
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
