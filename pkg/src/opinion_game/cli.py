"""Command line: ``opinion-game solve <scenario.json> --mode ...``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (singular H,
non-Hurwitz estimator).  ``OPINION_GAME_SEED`` is reserved for stochastic
extensions and currently ignored: every run is deterministic.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

from .errors import NumericalError, ValidationError
from .experiment import MODES, _fmt, run_experiment
from .scenario_io import expand_sweep, load_document, scenario_from_dict

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opinion-game", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="solve one scenario file")
    s.add_argument("scenario", type=Path, help="JSON scenario file")
    s.add_argument("--mode", choices=MODES, default="nash")
    s.add_argument("--sweep", action="store_true",
                   help="run every cell of the file's sweep, one sub-directory per cell")
    s.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    s.add_argument("--grid-steps", type=int, default=None,
                   help="time samples on [0, t_f]; overrides the file's grid_steps")
    s.add_argument("--estimator", choices=("local", "stacked"), default="stacked",
                   help="estimator form used in distributed mode (default: stacked)")
    return p


def _with_steps(s, steps):
    if steps is None:
        return s
    if steps < 1:
        raise ValidationError("--grid-steps must be positive")
    return dataclasses.replace(s, grid_steps=steps)


def _print_errors(label: str, report) -> None:
    e = report.errors
    print(f"[{label}] mode={report.mode} hash={report.scenario_hash}")
    for i, Ei in enumerate(e.E):
        extra = ""
        if e.E_hat is not None:
            extra += f"  E_hat={e.E_hat[i]:.6g}"
        if e.J is not None:
            extra += f"  J={e.J[i]:.6g}"
        print(f"  agent {i + 1}: E={Ei:.6g}{extra}")
    if e.E_o is not None:
        print(f"  E_o={e.E_o:.6g}")


def solve(args) -> int:
    doc = load_document(args.scenario)
    if not args.sweep:
        s = _with_steps(scenario_from_dict(doc), args.grid_steps)
        report = run_experiment(s, args.mode, args.out, args.estimator)
        _print_errors(s.name or args.scenario.stem, report)
        for w in report.diagnostics.get("warnings", []):
            print(f"  warning: {w}", file=sys.stderr)
        return EXIT_OK

    cells = expand_sweep(doc)
    args.out.mkdir(parents=True, exist_ok=True)
    failed = 0
    with open(args.out / "sweep_summary.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["cell", "agent", "E", "E_hat", "J", "E_o", "status"])
        for label, s in cells:
            s = _with_steps(s, args.grid_steps)
            try:
                report = run_experiment(s, args.mode, args.out / label, args.estimator)
            except NumericalError as exc:
                failed += 1
                wr.writerow([label, "", "", "", "", "", f"failed: {exc}"])
                print(f"[{label}] FAILED: {exc}", file=sys.stderr)
                continue
            _print_errors(label, report)
            e = report.errors
            for i, Ei in enumerate(e.E):
                wr.writerow([label, i + 1, _fmt(Ei),
                             _fmt(e.E_hat[i]) if e.E_hat is not None else "",
                             _fmt(e.J[i]) if e.J is not None else "",
                             _fmt(e.E_o) if i == 0 else "", "ok"])
    return EXIT_NUMERICAL if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return solve(args)
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
