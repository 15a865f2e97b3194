"""Command line: ``run <config> [--output DIR]``, ``replay <manifest>``, ``list-kinds``."""
from __future__ import annotations

import argparse
import sys

from . import experiments as ex


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dysonflow", description="GDBM and mean-field experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a YAML config")
    p_run.add_argument("config")
    p_run.add_argument("--output", default=None, help="output directory (overrides the config)")
    p_rep = sub.add_parser("replay", help="re-run a manifest and compare outputs byte for byte")
    p_rep.add_argument("manifest")
    sub.add_parser("list-kinds", help="print the available experiment kinds")
    args = parser.parse_args(argv)

    if args.command == "list-kinds":
        for k in ex.KINDS:
            print(k)
        return 0
    if args.command == "run":
        try:
            cfg = ex.ExperimentConfig.load(args.config)
        except ex.ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        status, out = ex.run(cfg, args.output)
        print(f"{'PASS' if status == 0 else 'FAIL'}: outputs in {out}")
        return status
    try:
        ex.replay(args.manifest)
    except ex.ReproducibilityError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print("replay identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
