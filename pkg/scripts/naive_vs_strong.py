"""Run the bundled naive and strong counterexample configs side by side.

Writes compare.json plus the three overlaid figures (h vs t, interevent
times, phase portrait) to --out.
"""
import argparse
import sys

from etsafe.cli import main

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out", default="out/naive_vs_strong")
    args = p.parse_args()
    sys.exit(main(["compare", "counterexample_naive", "counterexample_strong",
                   "--out", args.out, "--plots", "on"]))
