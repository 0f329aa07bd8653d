"""figure <kind> <inputs...> -o <path>"""

from __future__ import annotations

import argparse
import sys

from .plots import KINDS, FigureSpec, plot


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figure",
        description="Render figures from solver CSV tables and checkpoints",
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("inputs", nargs="+", help="input CSV/checkpoint files")
    parser.add_argument("-o", "--output", required=True, help="output image path")
    parser.add_argument("--title", default=None)
    parser.add_argument("--swept", default=None,
                        help="swept parameter name for sweep figures (alpha or d_phi)")
    args = parser.parse_args(argv)
    style = {}
    if args.title:
        style["title"] = args.title
    if args.swept:
        style["swept"] = args.swept
    try:
        artifacts = plot(FigureSpec(args.kind, list(args.inputs), args.output, style))
    except Exception as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 2
    summary = " ".join(f"{key}={value}" for key, value in artifacts.items())
    print(f"wrote {args.output} ({summary})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
