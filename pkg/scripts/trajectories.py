"""Write trajectory CSVs for every reference cell and mode.

One directory per (configuration, r_w, mode) under ``--out``, each holding
``trajectory.csv``, ``errors.csv`` and ``diagnostics.txt``.  Cells whose mode
cannot run (singular H, non-Hurwitz estimator) are listed and skipped.

    python3 scripts/trajectories.py --out runs/ [--modes baseline nash social]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from opinion_game.errors import NumericalError
from opinion_game.experiment import MODES, run_experiment
from opinion_game.scenarios import reference_grid


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs"))
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    p.add_argument("--grid-steps", type=int, default=1000)
    args = p.parse_args(argv)

    skipped = []
    for (stub, coupled, r_w), s in reference_grid(grid_steps=args.grid_steps):
        tag = f"stub{stub:g}_{'coupled' if coupled else 'unrelated'}_rw{r_w:g}"
        for mode in args.modes:
            try:
                run_experiment(s, mode, args.out / tag / mode)
            except NumericalError as exc:
                skipped.append(f"{tag}/{mode}: {exc}")
    for line in skipped:
        print("skipped", line)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
