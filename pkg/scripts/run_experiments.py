"""Run the bundled experiment configs and print one status line per run.

    python3 scripts/run_experiments.py                 # every config in scripts/configs
    python3 scripts/run_experiments.py burgers contraction --output out
"""
import argparse
import sys
import time
from pathlib import Path

from dysonflow import experiments as ex

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", help="config stems; default is all")
    ap.add_argument("--output", default="out", help="parent directory for run outputs")
    args = ap.parse_args(argv)

    names = args.names or sorted(p.stem for p in CONFIG_DIR.glob("*.yaml"))
    worst = 0
    for name in names:
        cfg = ex.ExperimentConfig.load(CONFIG_DIR / f"{name}.yaml")
        t0 = time.perf_counter()
        status, out = ex.run(cfg, Path(args.output) / name)
        print(f"{name:20s} {'PASS' if status == 0 else 'FAIL'}  {time.perf_counter() - t0:7.1f}s  {out}")
        worst = max(worst, status)
    return worst


if __name__ == "__main__":
    sys.exit(main())
