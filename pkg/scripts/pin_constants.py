"""Create the frozen regression pins used by the test suite.

Runs a configuration once and writes its sup-ratios to the pin file. An
existing pin file is never overwritten; delete it by hand to re-pin.

    python scripts/pin_constants.py [--config configs/default.json] [--pins tests/data/pins.json]
"""
import argparse
import os
import sys

from anisohardy import report
from anisohardy.cli import run_checks
from anisohardy.config import load_config

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=os.path.join(ROOT, "configs", "default.json"))
    ap.add_argument("--pins", default=os.path.join(ROOT, "tests", "data", "pins.json"))
    args = ap.parse_args(argv)
    if os.path.exists(args.pins):
        print(f"{args.pins} exists; refusing to re-pin", file=sys.stderr)
        return 1
    reports = run_checks(load_config(args.config))
    bad = [r.check for r in reports if not r.verdict]
    if bad:
        print("not pinning, intrinsic checks fail: " + ", ".join(bad), file=sys.stderr)
        return 1
    pins = report.write_pins(args.pins, reports)
    for name, value in sorted(pins.items()):
        print(f"{name:<18} {value:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
