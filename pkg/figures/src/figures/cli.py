"""`plot` command: one figure kind per invocation, CSV in, image out."""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")

from .plotting import KINDS, EmptyInputError, FigureSpec, SchemaError, plot


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="plot",
        description="Render a figure from detection-harness result CSVs.",
    )
    p.add_argument("--spec", required=True, choices=sorted(KINDS), help="figure kind")
    p.add_argument(
        "--in",
        dest="inputs",
        nargs="+",
        required=True,
        metavar="CSV",
        help="input CSV file(s); rows are concatenated",
    )
    p.add_argument("--out", required=True, help="output image path (.png or .svg)")
    p.add_argument("--logx", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--logy", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--dpi", type=int, default=150)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.spec,
        inputs=tuple(args.inputs),
        out=args.out,
        logx=args.logx,
        logy=args.logy,
        dpi=args.dpi,
    )
    try:
        out = plot(spec)
    except (SchemaError, EmptyInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
