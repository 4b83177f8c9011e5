"""Terminal-state estimator, distributed strategies and closed-loop simulation.

Each agent integrates an estimate of its own terminal opinion.  Two forms of
the estimator are available: the per-agent ``local`` form, which only uses
the diagonal m x m blocks of Phi(t_f, 0) and Psi_i(t_f, 0), and the
``stacked`` form x_hat' = Delta (G x0 - H x_hat), whose fixed point is the
equilibrium terminal state.  The two do not coincide on general graphs; runs
always report how far apart they drift.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import NotHurwitzError, ValidationError
from .graph import input_matrix
from .linalg import LUSolver, min_real_eigenvalue, rk4, spectrum_has_positive_real_parts
from .nash import GameMatrices, Scenario, agent_error, uniform_grid

ESTIMATOR_FORMS = ("local", "stacked")


def gain_matrix(s: Scenario) -> np.ndarray:
    """Delta = diag(delta_1, ..., delta_n) kron I_m."""
    return np.kron(np.diag(s.delta), np.eye(s.network.m))


def stacked_system(s: Scenario, g: GameMatrices) -> tuple[np.ndarray, np.ndarray]:
    """``(K, c)`` with x_hat' = K x_hat + c for the stacked estimator."""
    D = gain_matrix(s)
    return -D @ g.H, D @ (g.G @ s.x0)


def local_system(s: Scenario, g: GameMatrices) -> tuple[np.ndarray, np.ndarray]:
    """``(K, c)`` with x_hat' = K x_hat + c for the per-agent estimator.

    Row block i reads
    delta_i {(Phi_ii - Psi_i,ii W_ii) x_i(0) - x_hat_i + Psi_i,ii sum_j W_ij (x_hat_j - x_hat_i)}.
    """
    net = s.network
    N = net.size
    K = np.zeros((N, N))
    c = np.zeros(N)
    for i in range(net.n):
        bi = net.block(i)
        phi_ii = g.phi[bi, bi]
        psi_ii = g.psi[i][bi, bi]
        c[bi] = s.delta[i] * (phi_ii - psi_ii @ net.stubbornness[i]) @ s.x0[bi]
        K[bi, bi] -= s.delta[i] * np.eye(net.m)
        for j, W in net.neighbors(i):
            bj = net.block(j)
            K[bi, bj] += s.delta[i] * psi_ii @ W
            K[bi, bi] -= s.delta[i] * psi_ii @ W
    return K, c


def estimator_rhs_local(s: Scenario, g: GameMatrices, x_hat: np.ndarray, i: int) -> np.ndarray:
    """Right-hand side of agent ``i``'s local estimator (an m-vector)."""
    net = s.network
    bi = net.block(i)
    phi_ii = g.phi[bi, bi]
    psi_ii = g.psi[i][bi, bi]
    coupling = sum((W @ (x_hat[net.block(j)] - x_hat[bi]) for j, W in net.neighbors(i)),
                   np.zeros(net.m))
    return s.delta[i] * ((phi_ii - psi_ii @ net.stubbornness[i]) @ s.x0[bi]
                         - x_hat[bi] + psi_ii @ coupling)


def estimator_rhs_stacked(s: Scenario, g: GameMatrices, x_hat: np.ndarray) -> np.ndarray:
    """Delta ((Phi - Psi F) x0 - H x_hat)."""
    return gain_matrix(s) @ (g.G @ s.x0 - g.H @ x_hat)


def estimator_fixed_point(s: Scenario, g: GameMatrices, which: str = "stacked") -> np.ndarray:
    K, c = _system(s, g, which)
    return LUSolver(-K).solve(c)


def _system(s, g, which):
    if which == "stacked":
        return stacked_system(s, g)
    if which == "local":
        return local_system(s, g)
    raise ValidationError(f"estimator form must be one of {ESTIMATOR_FORMS}, got {which!r}")


def hurwitz_margin(s: Scenario, g: GameMatrices) -> float:
    """min Re eig(Delta H); the stacked estimator converges iff this is positive."""
    return min_real_eigenvalue(gain_matrix(s) @ g.H)


def check_hurwitz(s: Scenario, g: GameMatrices) -> float:
    DH = gain_matrix(s) @ g.H
    margin = min_real_eigenvalue(DH)
    if not spectrum_has_positive_real_parts(DH):
        raise NotHurwitzError(
            f"-Delta H(t_f) is not Hurwitz (min Re eig(Delta H) = {margin:.4g}); "
            "the estimator does not converge to the equilibrium terminal state")
    return margin


@dataclass(eq=False)
class EstimatorRun:
    times: np.ndarray
    x_hat: np.ndarray              # (steps+1, nm) for the requested form
    which: str
    discrepancy: float             # max_t |x_hat_local(t) - x_hat_stacked(t)|
    margin: float                  # min Re eig(Delta H)


def integrate_estimator(s: Scenario, g: GameMatrices, which: str = "stacked",
                        horizon: float | None = None, steps: int | None = None,
                        x_hat0=None) -> EstimatorRun:
    """Integrate the estimator with RK4 on ``[0, horizon]`` (default ``[0, t_f]``).

    Refuses with :class:`NotHurwitzError` unless -Delta H(t_f) is Hurwitz.
    ``x_hat0`` defaults to each agent's own initial opinion.
    """
    margin = check_hurwitz(s, g)
    horizon = s.t_f if horizon is None else float(horizon)
    steps = s.grid_steps if steps is None else int(steps)
    if horizon <= 0 or steps < 1:
        raise ValidationError("horizon and steps must be positive")
    y0 = s.x0.copy() if x_hat0 is None else np.asarray(x_hat0, dtype=float)
    h = horizon / steps
    series = {}
    for form in ESTIMATOR_FORMS:
        K, c = _system(s, g, form)
        series[form] = rk4(lambda t, y, K=K, c=c: K @ y + c, y0, 0.0, h, steps)
    disc = float(np.max(np.linalg.norm(series["local"] - series["stacked"], axis=1)))
    _system(s, g, which)  # validates the name
    return EstimatorRun(uniform_grid(horizon, steps), series[which], which, disc, margin)


def log_error_slope(times: np.ndarray, x_hat: np.ndarray, target: np.ndarray,
                    floor: float = 1e-10) -> float:
    """Least-squares slope of log|x_hat(t) - target| over the second half of the decay.

    Samples whose error has dropped below ``floor`` times the initial error
    are ignored, so roundoff plateaus do not bend the fit.
    """
    err = np.linalg.norm(x_hat - target, axis=1)
    if err[0] == 0.0:
        return float("-inf")
    keep = np.nonzero(err > floor * err[0])[0]
    keep = keep[len(keep) // 2:]
    if len(keep) < 2:
        raise ValidationError("too few samples above the noise floor to fit a decay rate")
    slope, _ = np.polyfit(times[keep], np.log(err[keep]), 1)
    return float(slope)


# --- distributed strategies -----------------------------------------------------


def distributed_bracket(s: Scenario, i: int, x_hat: np.ndarray, x_i0: np.ndarray) -> np.ndarray:
    """W_ii (x_hat_i - x_i(0)) + sum_j W_ij (x_hat_i - x_hat_j).

    This is agent i's own block of (F_i + L_i) x_hat - F_i x0, i.e. the
    terminal costate evaluated at the estimate.
    """
    net = s.network
    bi = net.block(i)
    out = net.stubbornness[i] @ (x_hat[bi] - x_i0)
    for j, W in net.neighbors(i):
        out = out + W @ (x_hat[bi] - x_hat[net.block(j)])
    return out


def distributed_action(s: Scenario, i: int, x_hat: np.ndarray, x_i0: np.ndarray) -> np.ndarray:
    b = s.network.control_maps[i]
    return -np.linalg.solve(s.R[i], b.T @ distributed_bracket(s, i, x_hat, x_i0))


def distributed_disturbance(s: Scenario, i: int, x_hat: np.ndarray, x_i0: np.ndarray) -> np.ndarray:
    xi = s.network.disturbance_maps[i]
    return np.linalg.solve(s.R_w[i], xi.T @ distributed_bracket(s, i, x_hat, x_i0))


def _input_gains(s: Scenario) -> np.ndarray:
    """Block-diagonal Q with sum_i (B_i u_hat_i + B_wi w_hat_i) = Q b, b the stacked brackets."""
    net = s.network
    Q = np.zeros((net.size, net.size))
    for i in range(net.n):
        B = input_matrix(net, i)
        Bw = input_matrix(net, i, disturbance=True)
        gain = -B @ np.linalg.solve(s.R[i], B.T) + Bw @ np.linalg.solve(s.R_w[i], Bw.T)
        Q += gain
    return Q


@dataclass(eq=False)
class ClosedLoopRun:
    times: np.ndarray
    x_hat: np.ndarray
    x: np.ndarray
    u: list[np.ndarray]
    w: list[np.ndarray]
    E_hat: list[float]
    discrepancy: float
    margin: float
    which: str


def closed_loop_simulate(s: Scenario, g: GameMatrices, steps: int | None = None,
                         which: str = "stacked", pregame_time: float = 0.0) -> ClosedLoopRun:
    """Co-integrate the estimator and the opinion dynamics driven by the distributed inputs.

    With ``pregame_time > 0`` the estimator first runs alone for that long and
    the game starts from the resulting estimate.
    """
    net = s.network
    steps = s.grid_steps if steps is None else int(steps)
    x_hat0 = None
    if pregame_time > 0:
        pre = integrate_estimator(s, g, which, horizon=pregame_time,
                                  steps=max(1, int(round(steps * pregame_time / s.t_f))))
        x_hat0 = pre.x_hat[-1]
    est = integrate_estimator(s, g, which, steps=steps, x_hat0=x_hat0)

    K, c = _system(s, g, which)
    bracket_map = np.zeros((net.size, net.size))
    bracket_off = np.zeros(net.size)
    for i in range(net.n):
        bi = net.block(i)
        bracket_map[bi] = (g.F_i[i] + g.L_i[i])[bi]
        bracket_off[bi] = -(g.F_i[i] @ s.x0)[bi]
    Q = _input_gains(s)

    def rhs(t, z):
        xh, x = z[:net.size], z[net.size:]
        drive = Q @ (bracket_map @ xh + bracket_off)
        return np.concatenate([K @ xh + c, -g.L @ x + drive])

    z0 = np.concatenate([est.x_hat[0], s.x0])
    z = rk4(rhs, z0, 0.0, s.t_f / steps, steps)
    x_hat, x = z[:, :net.size], z[:, net.size:]
    u = [np.array([distributed_action(s, i, xh, s.x0[net.block(i)]) for xh in x_hat])
         for i in range(net.n)]
    w = [np.array([distributed_disturbance(s, i, xh, s.x0[net.block(i)]) for xh in x_hat])
         for i in range(net.n)]
    E_hat = [agent_error(net, i, x_hat[-1], s.x0) for i in range(net.n)]
    return ClosedLoopRun(est.times, x_hat, x, u, w, E_hat, est.discrepancy, est.margin, which)


def distributed_errors(s: Scenario, g: GameMatrices, which: str = "stacked",
                       steps: int | None = None) -> list[float]:
    """E_hat_i from the estimate at t_f (estimator started at x_hat(0) = x0)."""
    run = integrate_estimator(s, g, which, steps=steps)
    return [agent_error(s.network, i, run.x_hat[-1], s.x0) for i in range(s.network.n)]
