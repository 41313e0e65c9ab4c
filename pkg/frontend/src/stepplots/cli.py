"""stepadapt-plots: render record files into figures.

    stepadapt-plots render --spec spec.json
    stepadapt-plots render runs/*.csv --metric alpha --out alpha_overlay
"""

from __future__ import annotations

import argparse
import sys

from .reader import SchemaError
from .render import METRICS, PlotSpec, load_spec, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stepadapt-plots")
    sub = p.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("render", help="render one figure (PNG + SVG)")
    pr.add_argument("records", nargs="*", help="record CSV files")
    pr.add_argument("--spec", default=None, help="JSON plot spec (overrides positional args)")
    pr.add_argument("--metric", choices=METRICS, default="loss")
    pr.add_argument("--smoothing", type=int, default=1)
    pr.add_argument("--log-x", action="store_true")
    pr.add_argument("--log-y", dest="log_y", action="store_true", default=None)
    pr.add_argument("--no-log-y", dest="log_y", action="store_false")
    pr.add_argument("--out", default="figure")
    pr.add_argument("--title", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.spec is not None:
            spec = load_spec(args.spec)
        else:
            if not args.records:
                print("error: provide record files or --spec", file=sys.stderr)
                return 2
            spec = PlotSpec(records=tuple(args.records), metric=args.metric,
                            smoothing=args.smoothing, log_x=args.log_x,
                            log_y=args.log_y, out=args.out, title=args.title)
        for path in render(spec):
            print(path)
        return 0
    except (SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
