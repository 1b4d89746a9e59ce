"""Command-line entry point: render one figure from artifact files."""

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a figure from experiment artifact files.")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="figure kind")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="PATH",
                        help="input artifact files (chain CSVs or summary "
                             "JSONs, depending on the kind)")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="output image path (.png gets metadata)")
    parser.add_argument("--bandwidth", type=float, default=None,
                        help="KDE bandwidth for posterior-density; default: "
                             "per-curve rule of thumb, recorded in the "
                             "caption and metadata")
    parser.add_argument("--bins", type=int, default=20,
                        help="histogram bins for beta-distribution "
                             "(default: 20)")
    parser.add_argument("--dpi", type=int, default=120,
                        help="output resolution (default: 120)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs, out=args.out,
                          bandwidth=args.bandwidth, bins=args.bins,
                          dpi=args.dpi)
        info = render(spec)
    except SchemaError as err:
        print("schema error: %s" % err, file=sys.stderr)
        return 1
    except (OSError, ValueError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    detail = {k: v for k, v in info.items() if k not in ("kind", "out")}
    print("wrote %s (%s)" % (info["out"], ", ".join(
        "%s=%s" % (k, v) for k, v in sorted(detail.items()))))
    return 0


if __name__ == "__main__":
    sys.exit(main())
