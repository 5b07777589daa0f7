"""Run every shipped scenario and print a one-line verdict per scenario."""

import argparse
import sys
import time
from pathlib import Path

from hyperflux.cli import run_scenario, shipped_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("reports"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quiet", action="store_true", help="suppress per-check tables")
    args = ap.parse_args()

    worst = 0
    for name in shipped_scenarios():
        t0 = time.perf_counter()
        stream = open("/dev/null", "w") if args.quiet else sys.stdout
        code = run_scenario(name, args.out / name, seed=args.seed, fixed_clock=True, stream=stream)
        verdict = {0: "ok", 1: "FAILED CHECKS", 2: "INVALID"}[code]
        print(f"{name:24s} {verdict:14s} {time.perf_counter() - t0:6.2f}s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
