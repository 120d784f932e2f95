"""Evaluate acceptance criteria 1-9 for a configuration and print one line each.

    python3 scripts/run_acceptance.py [--config PATH] [--threads N]
"""

import argparse
import sys
import time

from nuhlab.config import RunConfig
from nuhlab.suite import Suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    t0 = time.time()
    crit = Suite(cfg, args.threads).criteria()
    for c in crit:
        print(c.line())
    print(f"elapsed {time.time() - t0:.0f}s", file=sys.stderr)
    return 0 if all(c.passed for c in crit) else 1


if __name__ == "__main__":
    sys.exit(main())
