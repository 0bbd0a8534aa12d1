"""Command-line driver: ``dgstokes run --case smooth --smoother prob --levels 2..6``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import CASES, MESHES, SMOOTHERS, ExperimentConfig, format_table, run_case


def parse_levels(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return int(a), int(b)
        n = int(text)
        return n, n
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must look like A..B, got {text!r}") from None


def parse_etas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"eta must be X[,Y,...], got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgstokes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write a CSV report")
    run.add_argument("--case", choices=CASES, default="smooth")
    run.add_argument("--smoother", choices=SMOOTHERS, default="prob")
    run.add_argument("--mesh", choices=MESHES, default=None,
                     help="default: crisscross, or diagonal for locking")
    run.add_argument("--levels", type=parse_levels, default=(0, 5), metavar="A..B")
    run.add_argument("--eta", type=parse_etas, default=None, metavar="X[,Y,...]",
                     help="default: 6, or 10,100,1000 for locking")
    run.add_argument("--penalty", choices=("full", "weak"), default="full")
    run.add_argument("--ell", type=int, default=1)
    run.add_argument("--mu", type=float, default=1.0)
    run.add_argument("--solver", choices=("auto", "direct", "minres"), default="auto")
    run.add_argument("--out", default=None, metavar="FILE")
    run.add_argument("--plot-data", default=None, metavar="FILE",
                     help="optional long-format (series, ntri, error) CSV")
    run.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExperimentConfig(
            case=args.case, smoother=args.smoother, mesh=args.mesh, levels=args.levels,
            etas=args.eta, penalty=args.penalty, ell=args.ell, mu=args.mu,
            out=args.out, solver=args.solver)
    except ValueError as exc:
        print(f"dgstokes: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_case(config, verbose=not args.quiet)
    except (RuntimeError, ValueError) as exc:
        print(f"dgstokes: run failed: {exc}", file=sys.stderr)
        return 1
    print(format_table(report))
    for note in report.metadata.get("notes", []):
        print(f"note: {note}")
    if args.plot_data:
        Path(args.plot_data).write_text(report.plot_data())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
