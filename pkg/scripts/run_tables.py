"""Smooth-solution convergence on crisscross meshes for all three smoothers.

Usage: python3 scripts/run_tables.py [--max-level 6] [--outdir results]
"""

import argparse
from pathlib import Path

from dgstokes.experiments import ExperimentConfig, format_table, run_case


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--min-level", type=int, default=0)
    parser.add_argument("--max-level", type=int, default=6)
    parser.add_argument("--outdir", default="results")
    args = parser.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for smoother in ("stnd", "qopt", "prob"):
        cfg = ExperimentConfig(case="smooth", smoother=smoother,
                               levels=(args.min_level, args.max_level),
                               out=str(out / f"smooth_{smoother}.csv"))
        print(f"smoother {smoother}")
        print(format_table(run_case(cfg, verbose=True)))


if __name__ == "__main__":
    main()
