"""Penalty study on diagonal meshes in the dG1 norm, full and weak penalization.

Usage: python3 scripts/run_locking.py [--max-level 5] [--outdir results]
"""

import argparse
from pathlib import Path

from dgstokes.experiments import ExperimentConfig, format_table, run_case


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--min-level", type=int, default=0)
    parser.add_argument("--max-level", type=int, default=5)
    parser.add_argument("--smoother", default="prob", choices=("stnd", "qopt", "prob"))
    parser.add_argument("--outdir", default="results")
    args = parser.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for penalty in ("full", "weak"):
        cfg = ExperimentConfig(case="locking", smoother=args.smoother, penalty=penalty,
                               levels=(args.min_level, args.max_level),
                               out=str(out / f"locking_{penalty}.csv"))
        report = run_case(cfg, verbose=True)
        print(f"penalty {penalty}")
        print(format_table(report))
        (out / f"locking_{penalty}_plot.csv").write_text(report.plot_data())


if __name__ == "__main__":
    main()
