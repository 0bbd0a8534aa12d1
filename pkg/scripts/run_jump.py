"""Jumping-pressure experiment: velocity decay rates of the three smoothers.

Usage: python3 scripts/run_jump.py [--max-level 7] [--outdir results]
"""

import argparse
from pathlib import Path

from dgstokes.experiments import ExperimentConfig, format_table, run_case


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--min-level", type=int, default=2)
    parser.add_argument("--max-level", type=int, default=7)
    parser.add_argument("--outdir", default="results")
    args = parser.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for smoother in ("stnd", "qopt", "prob"):
        cfg = ExperimentConfig(case="jump", smoother=smoother,
                               levels=(args.min_level, args.max_level),
                               out=str(out / f"jump_{smoother}.csv"))
        report = run_case(cfg, verbose=True)
        print(f"smoother {smoother}")
        print(format_table(report))
        (out / f"jump_{smoother}_plot.csv").write_text(report.plot_data())


if __name__ == "__main__":
    main()
