"""Run one of the shipped figure configs and print where the CSVs went.

    python3 scripts/run_fig.py fig5 [--workers 2] [--seed 3]
"""
import argparse
import sys
from dataclasses import replace
from pathlib import Path

from jtcran.experiments import parse_config, run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FIGS = {"fig4": "fig4_ratio.ini", "fig5": "fig5_coverage.ini",
        "fig5-calibrated": "fig5_coverage_calibrated.ini", "fig6": "fig6_se.ini"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("figure", choices=sorted(FIGS))
    ap.add_argument("--workers", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--output")
    args = ap.parse_args(argv)
    spec = parse_config(CONFIGS / FIGS[args.figure])
    changes = {k: v for k, v in (("workers", args.workers), ("master_seed", args.seed),
                                 ("output", args.output)) if v is not None}
    res = run_experiment(replace(spec, **changes))
    for f in res.files:
        print(f)
    print(res.manifest)
    for k, v in res.diagnostics.items():
        print(f"{k} = {v}")


if __name__ == "__main__":
    sys.exit(main())
