"""Terminal-error tables for the reference network.

Runs the (stubbornness, coupling, r_w) grid with r = 2, t_f = 10 and prints
E_i, the distributed E_hat_i and E_o next to the reported values.  With
``--no-disturbance`` it instead solves the game with r = 1 and the
disturbance channel switched off (xi_i = 0), which is the setting that the
two non-stubborn tables match digit for digit.

    python3 scripts/reproduce_tables.py [--no-disturbance] [--csv out.csv]
"""
from __future__ import annotations

import argparse
import csv
import sys
import warnings

import numpy as np

from opinion_game.distributed import distributed_errors, hurwitz_margin
from opinion_game.errors import NumericalError
from opinion_game.nash import Scenario, assemble_game, terminal_error
from opinion_game.scenarios import (
    REFERENCE_TABLES,
    REFERENCE_X0,
    SWEEP_R_W,
    reference_network,
    reference_scenario,
)
from opinion_game.social import assemble_social, total_terminal_error


def cells(no_disturbance: bool):
    for (stub, coupled) in REFERENCE_TABLES:
        if no_disturbance:
            net = reference_network(stub, coupled, xi=[np.zeros((2, 2))] * 5)
            yield (stub, coupled, None), Scenario.build(net, REFERENCE_X0, 10.0, r=1.0, r_w=1.0)
        else:
            for r_w in SWEEP_R_W:
                yield (stub, coupled, r_w), reference_scenario(stub, coupled, r_w=r_w)


def evaluate(s: Scenario) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = assemble_game(s)
        row = {"E": [terminal_error(g, s, i) for i in range(s.network.n)]}
        row["E_hat"] = distributed_errors(s, g) if hurwitz_margin(s, g) > 0 else None
        try:
            row["E_o"] = total_terminal_error(assemble_social(s), s)
        except NumericalError:
            row["E_o"] = None
    return row


def worst_ratio(got, ref) -> float:
    r = np.asarray(got) / np.asarray(ref)
    return float(np.max(np.maximum(r, 1 / r)))


def fmt(v) -> str:
    if v is None:
        return "n/a"
    return " ".join(f"{x:.4e}" for x in np.atleast_1d(v))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--no-disturbance", action="store_true")
    p.add_argument("--csv", help="also write one row per agent and cell")
    args = p.parse_args(argv)

    rows = []
    for (stub, coupled, r_w), s in cells(args.no_disturbance):
        ref = REFERENCE_TABLES[(stub, coupled)]
        try:
            got = evaluate(s)
        except NumericalError as exc:
            print(f"W_ii={stub:g} {'coupled' if coupled else 'unrelated'} r_w={r_w}: {exc}")
            continue
        label = f"W_ii={stub:g} {'coupled  ' if coupled else 'unrelated'} " + \
            ("r=1, xi=0" if r_w is None else f"r_w={r_w:g}")
        print(label)
        print(f"  E      {fmt(got['E'])}")
        print(f"  table  {fmt(ref['E'])}   worst ratio {worst_ratio(got['E'], ref['E']):.3g}")
        print(f"  E_hat  {fmt(got['E_hat'])}")
        print(f"  E_o    {fmt(got['E_o'])}   table {ref['E_o']:.4e}")
        for i in range(5):
            rows.append([stub, int(coupled), "" if r_w is None else r_w, i + 1, repr(got["E"][i]),
                         "" if got["E_hat"] is None else repr(got["E_hat"][i]), ref["E"][i],
                         "" if got["E_o"] is None else repr(got["E_o"]), ref["E_o"]])

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["stubbornness", "coupled", "r_w", "agent", "E", "E_hat", "E_table",
                         "E_o", "E_o_table"])
            wr.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
