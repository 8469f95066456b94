"""Run a sweep config, write its CSV and print a short comparison.

    python scripts/run_sweep.py scripts/block_length.cfg [--workers 4] [--out block_length.csv]
"""
import argparse
import math
from dataclasses import replace

from meccoop.experiments import format_rows, load_config, run_sweep


def main():
    p = argparse.ArgumentParser()
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args()
    config = replace(load_config(args.config), workers=args.workers)
    rows = run_sweep(config)
    out = args.out or config.output
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_rows(config, rows))

    names = config.schemes
    print(f"{config.sweep_variable:>8} " + " ".join(f"{n:>20}" for n in names) + "  best")
    for r in rows:
        energies = {n: r.results[n].energy_j if r.results[n].feasible else math.inf for n in names}
        best = min(energies, key=energies.get)
        print(f"{r.sweep_value:8.3g} " + " ".join(f"{energies[n]:20.6e}" for n in names)
              + f"  {best}")


if __name__ == "__main__":
    main()
