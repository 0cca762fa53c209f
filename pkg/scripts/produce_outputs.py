"""Run every CLI subcommand once and collect the outputs in one directory.

    python3 scripts/produce_outputs.py results --seeds 20
"""
import argparse
import sys
from pathlib import Path

from qlab.cli import main

GROUPS = ("low-high", "approximation", "broad-narrow", "level-set", "bilinear-broad", "bilinear")


def run(args: list[str]) -> int:
    print("qlab", " ".join(args), flush=True)
    return main(args)


def cli() -> int:
    p = argparse.ArgumentParser()
    p.add_argument("outdir", type=Path)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--R", type=int, default=3 ** 8)
    ns = p.parse_args()
    ns.outdir.mkdir(parents=True, exist_ok=True)
    out = lambda name: str(ns.outdir / name)
    codes = [run(["count", "--max-M", "200", "--out", out("counts.csv")]),
             run(["search", "--out", out("klower.csv")]),
             run(["theorem", "--R", str(ns.R), "--out", out("theorem.csv")]),
             run(["decouple", "--R", str(ns.R), "--seeds", "3", "--out", out("states")])]
    for g in GROUPS:
        codes.append(run(["verify", "--lemma", g, "--R", str(ns.R), "--seeds", str(ns.seeds),
                          "--out", out(f"verify_{g}.json")]))
    return max(codes)


if __name__ == "__main__":
    sys.exit(cli())
