"""Discrete KKT oracle against the closed form as the grid is refined.

The oracle is a forward-Euler discretisation, so its distance to the
closed-form trajectory should halve with every doubling of the step count.
Prints the relative sup-norm state error, the relative L2 control error and
the observed order for each reference configuration.

    python3 scripts/oracle_convergence.py [--r-w 2.0] [--steps 250 500 1000 2000 4000]
"""
from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from opinion_game.nash import assemble_game, discrete_kkt_oracle, inputs_at, nash_trajectory
from opinion_game.scenarios import reference_scenario


def errors(s, g, steps):
    tr = nash_trajectory(g, s, steps)
    o = discrete_kkt_oracle(s, steps)
    ex = np.max(np.abs(o.x - tr.x)) / np.max(np.abs(tr.x))
    u, _ = inputs_at(g, s, o.control_times)
    U = np.hstack(u)
    eu = np.linalg.norm(np.hstack(o.u) - U) / max(np.linalg.norm(U), 1e-300)
    return float(ex), float(eu)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--r-w", type=float, default=2.0)
    p.add_argument("--steps", type=int, nargs="+", default=[250, 500, 1000, 2000, 4000])
    args = p.parse_args(argv)

    for stub in (0.0, 1.0):
        for coupled in (False, True):
            s = reference_scenario(stub, coupled, r_w=args.r_w)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                g = assemble_game(s)
            print(f"W_ii={stub:g} {'coupled' if coupled else 'unrelated'} r_w={args.r_w:g}"
                  f"  cond(H)={g.cond_H:.3g}")
            prev = None
            for n in args.steps:
                ex, eu = errors(s, g, n)
                order = "" if prev is None else \
                    f"  order x {np.log2(prev[0] / ex):.2f}, u {np.log2(prev[1] / eu):.2f}"
                print(f"  {n:6d} steps: x {ex:.3e}  u {eu:.3e}{order}")
                prev = (ex, eu)
    return 0


if __name__ == "__main__":
    sys.exit(main())
