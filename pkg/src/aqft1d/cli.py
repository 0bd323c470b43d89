"""Command line: ``verify``, ``propagate`` and ``commutator``.

Exit codes: 0 success, 1 failed checks or numerical trouble, 2 bad input.
"""
import argparse
import csv
import sys

import numpy as np

from . import __version__
from .config import load_config, parse_tolerance_overrides
from .errors import AQFTError, ConfigError
from .fields import bump_field
from .geometry import Section, inverse_proper_time
from .green import causal_propagator, green_advanced, green_retarded
from .quantize import ExpressionError, anticommutator, commutator, parse_expression
from .report import dumps, summary_line
from .suite import Scenario, run_verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="aqft1d", description="Free fields on 1+0 dimensional spacetime families.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the verification suite for a scenario")
    v.add_argument("--config", required=True)
    v.add_argument("--report", help="write the JSON report here instead of stdout")
    v.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                   help="override one tolerance; repeatable")
    v.add_argument("--timings", action="store_true", help="record wall time per check")

    g = sub.add_parser("propagate", help="tabulate a Green operator applied to a bump")
    g.add_argument("--config", required=True)
    g.add_argument("--csv", required=True, help="output path, '-' for stdout")
    g.add_argument("--samples", type=int, default=101)

    c = sub.add_parser("commutator", help="(anti)commutator of two algebra elements")
    c.add_argument("--config", required=True)
    c.add_argument("left")
    c.add_argument("right")
    return p


def cmd_verify(args):
    cfg = load_config(args.config, parse_tolerance_overrides(args.tol))
    report = run_verify(cfg, timings=args.timings)
    text = dumps(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(summary_line(report), file=sys.stderr)
    return EXIT_OK if report["summary"]["passed"] else EXIT_FAIL


def cmd_propagate(args):
    if args.samples < 1:
        raise ConfigError("--samples", "need at least one sample")
    cfg = load_config(args.config)
    sc = Scenario(cfg)
    spec = cfg.propagate
    n = 2 if cfg.fermionic else 1
    phi = bump_field(sc.family, spec["center"], spec["width"], spec["amplitude"], components=n)
    op = {"retarded": green_retarded, "advanced": green_advanced,
          "causal": causal_propagator}[spec["operator"]]
    out = op(sc.operator, phi)
    anchor = Section.constant(0.0)
    T = np.linspace(*spec["range"], args.samples)
    dim = sc.base.dimension

    header = ["T"] + [f"x{i + 1}" for i in range(dim)]
    if out.scalar_kind == "complex":
        for k in range(n):
            header += [f"re{k + 1}", f"im{k + 1}"]
    else:
        header += [f"u{k + 1}" for k in range(n)]

    fh = sys.stdout if args.csv == "-" else open(args.csv, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x in sc.base.samples():
            ts = np.array([inverse_proper_time(sc.family, Tk, x, anchor) for Tk in T])
            vals = out(ts, x)
            for Tk, row in zip(T, vals):
                cells = [Tk] + list(x)
                for v in row:
                    cells += [v.real, v.imag] if out.scalar_kind == "complex" else [v.real]
                w.writerow(["%.17g" % float(c) for c in cells])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_commutator(args):
    cfg = load_config(args.config)
    sc = Scenario(cfg)
    alg = sc.model().algebra(sc.x0)
    a = parse_expression(args.left, alg)
    b = parse_expression(args.right, alg)
    result = anticommutator(a, b) if cfg.fermionic else commutator(a, b)
    print(result.render())
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"verify": cmd_verify, "propagate": cmd_propagate, "commutator": cmd_commutator}
    try:
        return handler[args.command](args)
    except (ConfigError, ExpressionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AQFTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
