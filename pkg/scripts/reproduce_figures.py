#!/usr/bin/env python3
"""Regenerate every figure recipe from a config into one output tree."""

import argparse
import sys
from pathlib import Path

from he2coherence.cli import run
from he2coherence.recipes import RECIPES


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    common = ["--out", str(args.out), "--seed", str(args.seed)]
    if args.config:
        common += ["--config", str(args.config)]
    worst = 0
    for name in RECIPES:
        code = run(["run", name, *common])
        print(f"{name}: exit {code}")
        worst = max(worst, code)
    code = run(["simulate-kick", "--out", str(args.out / "kick"), *common[2:]])
    print(f"simulate-kick: exit {code}")
    return max(worst, code)


if __name__ == "__main__":
    sys.exit(main())
