#!/usr/bin/env python3
"""Run one of the bundled scenario configs and print a short summary.

Usage: python scripts/run_scenario.py scenarios/baseline_honest.json [--out DIR]
"""

import argparse
import sys

from cidnsim.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    argv = ["run", "--config", args.config, "--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    rc = cli_main(argv)
    if rc == 0:
        rc = cli_main(["report", "--dir", args.out])
    return rc


if __name__ == "__main__":
    sys.exit(main())
