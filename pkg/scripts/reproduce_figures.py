#!/usr/bin/env python3
"""Run the three figure presets and write CSV/JSON/gnuplot outputs.

Each preset lands in its own subdirectory of --out.  Defaults use the
full trial budget; pass --trials for a quick smoke run.
"""

import argparse
import sys

from nspradar import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="figures", help="output root directory")
    parser.add_argument("--trials", type=int, default=10_000,
                        help="trials per grid point (default: 10000)")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    for preset in ("fig3", "fig4", "fig5"):
        out = f"{args.out}/{preset}"
        print(f"running preset {preset} -> {out}")
        code = cli.main([
            "--preset", preset,
            "--seed", str(args.seed),
            "--trials", str(args.trials),
            "--workers", str(args.workers),
            "--out", out,
            "--emit-plot",
        ])
        if code != cli.EXIT_OK:
            print(f"preset {preset} failed with exit code {code}", file=sys.stderr)
            return code
    print("done; render plots with: gnuplot <dir>/plot.gp")
    return 0


if __name__ == "__main__":
    sys.exit(main())
