"""Run a scenario in one of four modes and write its CSV and diagnostics files."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributed import closed_loop_simulate, hurwitz_margin
from .errors import NumericalError
from .graph import extended_laplacian, quadratic_disagreement
from .linalg import rk4
from .nash import (
    Scenario,
    TrajectorySet,
    agent_error,
    assemble_game,
    nash_trajectory,
    terminal_error,
    worst_case_cost,
)
from .scenario_io import scenario_hash
from .social import assemble_social, social_trajectory, total_terminal_error

MODES = ("baseline", "nash", "distributed", "social")


@dataclass
class ErrorReport:
    E: list[float]
    E_hat: list[float] | None = None
    J: list[float] | None = None
    E_o: float | None = None


@dataclass
class RunReport:
    scenario_id: str
    scenario_hash: str
    mode: str
    trajectory: TrajectorySet
    errors: ErrorReport
    diagnostics: dict = field(default_factory=dict)
    x_hat: np.ndarray | None = None


def run_baseline(s: Scenario, steps: int | None = None) -> TrajectorySet:
    """Uncontrolled, undisturbed dynamics x' = -L x, integrated with RK4."""
    steps = s.grid_steps if steps is None else int(steps)
    net = s.network
    L = extended_laplacian(net)
    x = rk4(lambda t, y: -L @ y, s.x0.copy(), 0.0, s.t_f / steps, steps)
    times = np.linspace(0.0, s.t_f, steps + 1)
    u = [np.zeros((steps + 1, d)) for d in net.control_dims()]
    w = [np.zeros((steps + 1, k)) for k in net.disturbance_dims()]
    return TrajectorySet(times, x, u, w)


def _errors_at(s: Scenario, x: np.ndarray) -> list[float]:
    return [agent_error(s.network, i, x, s.x0) for i in range(s.network.n)]


def run_experiment(s: Scenario, mode: str, out_dir=None, estimator: str = "stacked") -> RunReport:
    """Execute one pipeline; with ``out_dir`` also write the three output files.

    Numerical failures propagate as :class:`NumericalError` subclasses with
    the scenario name prepended.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    diag: dict = {"scenario_id": s.name or "-", "scenario_hash": scenario_hash(s), "mode": mode}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            report = _dispatch(s, mode, estimator, diag)
        except NumericalError as exc:
            raise type(exc)(f"[{s.name or diag['scenario_hash']}, mode={mode}] {exc}") from exc
    diag["warnings"] = [str(w.message) for w in caught]
    report.diagnostics = diag
    if out_dir is not None:
        write_outputs(report, s, out_dir)
    return report


def _social_error(s: Scenario, diag: dict) -> float | None:
    try:
        sm = assemble_social(s)
    except NumericalError as exc:
        diag["social"] = f"unavailable: {exc}"
        return None
    diag["cond_H_bar"] = sm.cond
    return total_terminal_error(sm, s)


def _game_diagnostics(g, diag: dict) -> None:
    diag["loewner_dominance"] = ["holds" if ok else "VIOLATED" for ok in g.dominated]
    diag["connected_per_topic"] = g.connected
    diag["cond_H"] = g.cond_H
    diag["min_re_eig_H"] = float(np.min(np.linalg.eigvals(g.H).real))
    diag["psi_rank"] = g.psi_rank


def _dispatch(s: Scenario, mode: str, estimator: str, diag: dict) -> RunReport:
    sid, h = s.name or "-", diag["scenario_hash"]
    if mode == "baseline":
        tr = run_baseline(s)
        errs = ErrorReport(_errors_at(s, tr.x[-1]), E_o=quadratic_disagreement(s.network, tr.x[-1], s.x0))
        return RunReport(sid, h, mode, tr, errs)

    if mode == "social":
        sm = assemble_social(s)
        diag["cond_H_bar"] = sm.cond
        diag["global_loewner"] = "holds" if sm.dominated else "VIOLATED"
        tr = social_trajectory(sm, s)
        errs = ErrorReport(_errors_at(s, sm.x_tf), E_o=total_terminal_error(sm, s))
        return RunReport(sid, h, mode, tr, errs)

    g = assemble_game(s)
    _game_diagnostics(g, diag)
    E = [terminal_error(g, s, i) for i in range(s.network.n)]
    J = [worst_case_cost(g, s, i) for i in range(s.network.n)]
    E_o = _social_error(s, diag)
    margin = hurwitz_margin(s, g)
    diag["hurwitz_margin"] = margin
    diag["estimator_hurwitz"] = margin > 1e-9
    if mode == "nash":
        return RunReport(sid, h, mode, nash_trajectory(g, s), ErrorReport(E, None, J, E_o))

    diag["estimator_form"] = estimator
    diag["estimator_constants"] = "diagonal blocks of Phi(t_f,0), Psi_i(t_f,0) precomputed centrally"
    run = closed_loop_simulate(s, g, which=estimator)
    diag["estimator_discrepancy"] = run.discrepancy
    tr = TrajectorySet(run.times, run.x, run.u, run.w)
    return RunReport(sid, h, mode, tr, ErrorReport(E, run.E_hat, J, E_o), x_hat=run.x_hat)


# --- output ---------------------------------------------------------------------


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_outputs(report: RunReport, s: Scenario, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = s.network
    tr = report.trajectory
    with open(out / "trajectory.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "agent", "topic", "value", "series"])
        series = [("x", tr.times, tr.x.reshape(len(tr.times), net.n, net.m))]
        if report.x_hat is not None:
            series.append(("x_hat", tr.times, report.x_hat.reshape(len(tr.times), net.n, net.m)))
        for name, times, arr in series:
            for k, t in enumerate(times):
                for i in range(net.n):
                    for p in range(net.m):
                        wr.writerow([_fmt(t), i + 1, p + 1, _fmt(arr[k, i, p]), name])
        # input channels are written in the "topic" column
        for name, per_agent in (("u", tr.u), ("w", tr.w)):
            for i, samples in enumerate(per_agent):
                for k, t in enumerate(tr.control_times):
                    for c, v in enumerate(samples[k]):
                        wr.writerow([_fmt(t), i + 1, c + 1, _fmt(v), name])

    e = report.errors
    with open(out / "errors.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["agent", "E", "E_hat", "J", "E_o"])
        for i in range(net.n):
            wr.writerow([i + 1, _fmt(e.E[i]),
                         _fmt(e.E_hat[i]) if e.E_hat is not None else "",
                         _fmt(e.J[i]) if e.J is not None else "",
                         _fmt(e.E_o) if i == 0 else ""])

    lines = [f"{k}: {_diag_value(v)}" for k, v in report.diagnostics.items() if k != "warnings"]
    warns = report.diagnostics.get("warnings", [])
    lines.append(f"warnings: {len(warns)}")
    lines += [f"  - {w}" for w in warns]
    (out / "diagnostics.txt").write_text("\n".join(lines) + "\n")


def _diag_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(f"agent {i + 1}: {_diag_value(x)}" for i, x in enumerate(v))
    return str(v)
