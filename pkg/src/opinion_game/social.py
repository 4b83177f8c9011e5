"""Socially optimal actions: one planner minimising the sum of all costs."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import AssumptionWarning, NoUniqueEquilibriumError
from .graph import extended_laplacian, input_matrix, quadratic_disagreement, stacked_terms
from .linalg import LUSolver, Propagator, gram_integral, laplacian_propagator, loewner_leq
from .nash import (
    COND_LIMIT,
    Scenario,
    TrajectorySet,
    _check_time,
    bump_gradient,
    cell_quadrature,
    closed_form_trajectory,
    terminal_cost_fn,
)


@dataclass(eq=False)
class SocialMatrices:
    L: np.ndarray
    F_bar: np.ndarray
    B: np.ndarray                 # [B_1, ..., B_n]
    B_w: np.ndarray
    R: np.ndarray                 # diag(R_1, ..., R_n)
    R_w: np.ndarray
    phi: np.ndarray
    energy: np.ndarray            # B_w R_w^{-1} B_w^T - B R^{-1} B^T
    psi_bar: np.ndarray
    H_bar: np.ndarray
    G_bar: np.ndarray
    gain: np.ndarray              # (F_bar + L) H_bar^{-1} G_bar - F_bar
    costate_tf: np.ndarray
    x_tf: np.ndarray
    cond: float
    propagator: Propagator
    dominated: bool               # B R^-1 B^T <= B_w R_w^-1 B_w^T


def assemble_social(s: Scenario, propagator: Propagator | None = None,
                    tol: float = 1e-12) -> SocialMatrices:
    net = s.network
    L = extended_laplacian(net)
    if propagator is None:
        propagator = laplacian_propagator(L)
    _, _, F_bar = stacked_terms(net)
    B = np.hstack([input_matrix(net, i) for i in range(net.n)])
    B_w = np.hstack([input_matrix(net, i, disturbance=True) for i in range(net.n)])
    R = block_diag(*s.R)
    R_w = block_diag(*s.R_w)
    ctrl = B @ np.linalg.solve(R, B.T)
    dist = B_w @ np.linalg.solve(R_w, B_w.T)
    dominated = loewner_leq(ctrl, dist)
    if not dominated:
        warnings.warn("planner's control energy is not dominated by the disturbance energy "
                      "(global Loewner assumption violated)", AssumptionWarning, stacklevel=2)
    energy = dist - ctrl
    psi_bar = gram_integral(propagator, energy, 0.0, s.t_f, tol)
    psi_bar = 0.5 * (psi_bar + psi_bar.T)
    phi = propagator(s.t_f)
    H_bar = np.eye(net.size) - psi_bar @ (F_bar + L)
    G_bar = phi - psi_bar @ F_bar
    lu = LUSolver(H_bar)
    if not np.isfinite(lu.cond) or lu.cond > COND_LIMIT:
        raise NoUniqueEquilibriumError(
            f"H_bar(t_f) is numerically singular (condition estimate {lu.cond:.3e}); "
            "no unique social optimum")
    gain = (F_bar + L) @ lu.solve(G_bar) - F_bar
    x_tf = lu.solve(G_bar @ s.x0)
    return SocialMatrices(L=L, F_bar=F_bar, B=B, B_w=B_w, R=R, R_w=R_w, phi=phi,
                          energy=energy, psi_bar=psi_bar, H_bar=H_bar, G_bar=G_bar,
                          gain=gain, costate_tf=gain @ s.x0, x_tf=x_tf, cond=lu.cond,
                          propagator=propagator, dominated=dominated)


def _split(v: np.ndarray, dims) -> list[np.ndarray]:
    return np.split(v, np.cumsum(dims)[:-1], axis=-1)


def social_profile(sm: SocialMatrices, s: Scenario, t: float):
    """``(u, w, x)`` at time ``t``: stacked actions, disturbances and opinions."""
    t = _check_time(s, t)
    lam = sm.propagator(s.t_f - t).T @ sm.costate_tf
    u = -np.linalg.solve(sm.R, sm.B.T @ lam)
    w = np.linalg.solve(sm.R_w, sm.B_w.T @ lam)
    if t == 0.0:
        return u, w, s.x0.copy()
    psi_t = gram_integral(sm.propagator, sm.energy, 0.0, t)
    x = sm.propagator(t) @ s.x0 + psi_t @ lam
    return u, w, x


def social_trajectory(sm: SocialMatrices, s: Scenario, steps: int | None = None) -> TrajectorySet:
    steps = s.grid_steps if steps is None else int(steps)
    times, x, adj = closed_form_trajectory(sm.propagator, s.t_f, s.x0, [sm.energy],
                                           [sm.costate_tf], steps)
    lam = adj[0]
    u = -lam @ np.linalg.solve(sm.R, sm.B.T).T
    w = lam @ np.linalg.solve(sm.R_w, sm.B_w.T).T
    net = s.network
    return TrajectorySet(times, x, _split(u, net.control_dims()), _split(w, net.disturbance_dims()))


def total_terminal_error(sm: SocialMatrices, s: Scenario) -> float:
    """E_o: stubbornness deviations plus one disagreement term per edge, at t_f."""
    return quadratic_disagreement(s.network, sm.x_tf, s.x0)


def social_cost(sm: SocialMatrices, s: Scenario) -> float:
    """Running part of J at the social solution: -1/2 lambda^T Psi_bar lambda."""
    return float(-0.5 * sm.costate_tf @ sm.psi_bar @ sm.costate_tf)


def social_stationarity(sm: SocialMatrices, s: Scenario, steps: int | None = None,
                        eps: float = 1e-5, nodes: int = 4) -> float:
    """Normalised FD gradient of the global cost w.r.t. the stacked control.

    Disturbances are held at their worst case; cell-indicator bumps as in the
    per-agent stationarity check.
    """
    steps = s.grid_steps if steps is None else int(steps)
    cq = cell_quadrature(sm.propagator, s.t_f, steps, nodes)
    lam = np.einsum("kqba,b->kqa", cq.phi_to_tf, sm.costate_tf)
    u = -np.einsum("de,kqe->kqd", np.linalg.solve(sm.R, sm.B.T), lam)
    term = terminal_cost_fn(s.network, s.x0, sm.x_tf)
    fd, run = bump_gradient(cq, sm.B, sm.R, u, +1.0, term, eps)
    scale = np.linalg.norm(run)
    return float(np.linalg.norm(fd) / scale) if scale > 0 else float(np.linalg.norm(fd))
