"""Open-loop Nash/worst-case equilibrium of the opinion formation game."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .errors import AssumptionWarning, NoUniqueEquilibriumError, NumericalError, ValidationError
from .graph import (
    OpinionNetwork,
    agent_terms,
    extended_laplacian,
    input_matrix,
    quadratic_disagreement,
    stacked_terms,
)
from .linalg import (
    LUSolver,
    Propagator,
    _check_spd,
    agent_energy,
    gram_integral,
    laplacian_propagator,
    loewner_leq,
    stacked_psi,
    weighted_input_gram,
)

COND_LIMIT = 1e12


def _weights(value, dims: Sequence[int], label: str) -> tuple[np.ndarray, ...]:
    """Scalar, per-agent scalars, or per-agent matrices -> tuple of SPD matrices."""
    n = len(dims)
    if np.ndim(value) == 0:
        items = [value] * n
    else:
        items = list(value)
        if len(items) != n:
            raise ValidationError(f"{label}: expected {n} per-agent entries, got {len(items)}")
    out = []
    for i, (v, d) in enumerate(zip(items, dims)):
        v = np.asarray(v, dtype=float)
        M = float(v) * np.eye(d) if v.ndim == 0 else v
        if M.shape != (d, d):
            raise ValidationError(f"{label}[{i}]: expected {d}x{d}, got shape {M.shape}")
        M = _check_spd(M, f"{label}[{i}]")
        M = M.copy()
        M.setflags(write=False)
        out.append(M)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A game instance: network, initial opinions, horizon and weights."""

    network: OpinionNetwork
    x0: np.ndarray
    t_f: float
    R: tuple[np.ndarray, ...]
    R_w: tuple[np.ndarray, ...]
    delta: tuple[float, ...]
    grid_steps: int = 2000
    name: str = ""

    @classmethod
    def build(cls, network: OpinionNetwork, x0, t_f: float, r=1.0, r_w=1.0,
              delta=1.0, grid_steps: int = 2000, name: str = "") -> "Scenario":
        """Accepts scalar shorthands for the weights and gains."""
        R = _weights(r, network.control_dims(), "R")
        R_w = _weights(r_w, network.disturbance_dims(), "R_w")
        if np.ndim(delta) == 0:
            delta = [delta] * network.n
        return cls(network, np.asarray(x0, dtype=float), float(t_f), R, R_w,
                   tuple(float(d) for d in delta), int(grid_steps), name)

    def __post_init__(self):
        net = self.network
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape != (net.size,):
            raise ValidationError(f"x0 must have length n*m = {net.size}, got {x0.size}")
        if not np.all(np.isfinite(x0)):
            raise ValidationError("x0 has non-finite entries")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if not (np.isfinite(self.t_f) and self.t_f > 0):
            raise ValidationError(f"t_f must be positive, got {self.t_f}")
        if len(self.R) != net.n or len(self.R_w) != net.n:
            raise ValidationError("R and R_w need one matrix per agent")
        for i in range(net.n):
            d, k = net.control_maps[i].shape[1], net.disturbance_maps[i].shape[1]
            if self.R[i].shape != (d, d) or self.R_w[i].shape != (k, k):
                raise ValidationError(f"weight dimensions of agent {i} do not match its input maps")
        if len(self.delta) != net.n or any(not (d > 0 and np.isfinite(d)) for d in self.delta):
            raise ValidationError("delta needs one positive gain per agent")
        if int(self.grid_steps) != self.grid_steps or self.grid_steps < 1:
            raise ValidationError("grid_steps must be a positive integer")

    def with_x0(self, x0) -> "Scenario":
        return Scenario(self.network, np.asarray(x0, float), self.t_f, self.R, self.R_w,
                        self.delta, self.grid_steps, self.name)


@dataclass(eq=False)
class GameMatrices:
    """Everything the closed-form equilibrium needs, assembled once per scenario."""

    L: np.ndarray
    F_i: list[np.ndarray]
    L_i: list[np.ndarray]
    F: np.ndarray
    P: np.ndarray
    F_bar: np.ndarray
    phi: np.ndarray                 # Phi(t_f, 0)
    psi: list[np.ndarray]           # Psi_i(t_f, 0)
    H: np.ndarray
    G: np.ndarray
    M: list[np.ndarray]
    costate_tf: list[np.ndarray]    # lambda_i(t_f) = M_i x0
    x_tf: np.ndarray
    cond_H: float
    propagator: Propagator
    energies: list[np.ndarray]
    dominated: list[bool] = field(default_factory=list)
    psi_rank: list[int] = field(default_factory=list)
    connected: bool = True

    @property
    def psi_stack(self) -> np.ndarray:
        return stacked_psi(self.psi)


@dataclass(eq=False)
class TrajectorySet:
    times: np.ndarray
    x: np.ndarray                   # (steps+1, nm)
    u: list[np.ndarray]             # per agent (len(control_times), d_i)
    w: list[np.ndarray]             # per agent (len(control_times), k_i)
    control_times: np.ndarray | None = None

    def __post_init__(self):
        if self.control_times is None:
            self.control_times = self.times


def check_assumptions(s: Scenario) -> tuple[list[bool], bool]:
    """Per-agent Loewner dominance of disturbance over control energy, and connectivity."""
    net = s.network
    verdicts = []
    for i in range(net.n):
        X = weighted_input_gram(input_matrix(net, i), s.R[i])
        Y = weighted_input_gram(input_matrix(net, i, disturbance=True), s.R_w[i])
        verdicts.append(loewner_leq(X, Y))
    return verdicts, net.is_connected_per_topic()


def assemble_game(s: Scenario, propagator: Propagator | None = None,
                  tol: float = 1e-12) -> GameMatrices:
    """Build H(t_f), G(t_f), the per-agent gains and the equilibrium terminal state.

    Raises :class:`NoUniqueEquilibriumError` when H is numerically singular.
    A violated Loewner assumption only warns: the closed form stays valid as
    long as H is invertible.
    """
    net = s.network
    N = net.size
    L = extended_laplacian(net)
    if propagator is None:
        propagator = laplacian_propagator(L)

    dominated, connected = check_assumptions(s)
    if not connected:
        warnings.warn("network is not connected for every topic", AssumptionWarning, stacklevel=2)
    for i, ok in enumerate(dominated):
        if not ok:
            warnings.warn(f"agent {i}: control energy not dominated by disturbance energy "
                          "(Loewner assumption violated)", AssumptionWarning, stacklevel=2)

    terms = [agent_terms(net, i) for i in range(net.n)]
    F_i = [t[0] for t in terms]
    L_i = [t[1] for t in terms]
    F, P, F_bar = stacked_terms(net)

    energies = [agent_energy(net, i, s.R[i], s.R_w[i]) for i in range(net.n)]
    psi = list(gram_integral(propagator, np.stack(energies), 0.0, s.t_f, tol))
    psi = [0.5 * (p + p.T) for p in psi]
    phi = propagator(s.t_f)

    H = np.eye(N) - sum(p @ (f + l) for p, f, l in zip(psi, F_i, L_i))
    G = phi - sum(p @ f for p, f in zip(psi, F_i))
    lu = LUSolver(H)
    if not np.isfinite(lu.cond) or lu.cond > COND_LIMIT:
        raise NoUniqueEquilibriumError(
            f"H(t_f) is numerically singular (condition estimate {lu.cond:.3e}); "
            "no unique open-loop equilibrium")
    HinvG = lu.solve(G)
    x_tf = lu.solve(G @ s.x0)
    M = [(f + l) @ HinvG - f for f, l in zip(F_i, L_i)]
    costate = [Mi @ s.x0 for Mi in M]

    ranks = []
    for p in psi:
        ev = np.linalg.eigvalsh(p)
        ranks.append(int(np.sum(np.abs(ev) > 1e-10 * max(1.0, np.max(np.abs(ev))))))

    return GameMatrices(L=L, F_i=F_i, L_i=L_i, F=F, P=P, F_bar=F_bar, phi=phi, psi=psi,
                        H=H, G=G, M=M, costate_tf=costate, x_tf=x_tf, cond_H=lu.cond,
                        propagator=propagator, energies=energies,
                        dominated=dominated, psi_rank=ranks, connected=connected)


def _check_time(s: Scenario, t: float) -> float:
    t = float(t)
    if t < -1e-12 * s.t_f or t > s.t_f * (1 + 1e-12):
        raise ValidationError(f"t = {t} outside the horizon [0, {s.t_f}]")
    return min(max(t, 0.0), s.t_f)


def costate(g: GameMatrices, s: Scenario, i: int, t: float) -> np.ndarray:
    """lambda_i(t) = Phi^T(t_f, t) lambda_i(t_f)."""
    t = _check_time(s, t)
    return g.propagator(s.t_f - t).T @ g.costate_tf[i]


def nash_action(g: GameMatrices, s: Scenario, i: int, t: float) -> np.ndarray:
    B = input_matrix(s.network, i)
    return -np.linalg.solve(s.R[i], B.T @ costate(g, s, i, t))


def worst_case_disturbance(g: GameMatrices, s: Scenario, i: int, t: float) -> np.ndarray:
    Bw = input_matrix(s.network, i, disturbance=True)
    return np.linalg.solve(s.R_w[i], Bw.T @ costate(g, s, i, t))


def inputs_at(g: GameMatrices, s: Scenario, times) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Equilibrium actions and disturbances sampled at arbitrary times."""
    times = [_check_time(s, t) for t in np.atleast_1d(times)]
    lam = [np.stack([g.propagator(s.t_f - t).T @ c for t in times]) for c in g.costate_tf]
    net = s.network
    u = [-lam[i] @ np.linalg.solve(s.R[i], input_matrix(net, i).T).T for i in range(net.n)]
    w = [lam[i] @ np.linalg.solve(s.R_w[i], input_matrix(net, i, disturbance=True).T).T
         for i in range(net.n)]
    return u, w


def uniform_grid(t_f: float, steps: int) -> np.ndarray:
    return np.linspace(0.0, t_f, int(steps) + 1)


def _powers(Phi_h: np.ndarray, count: int) -> np.ndarray:
    out = np.empty((count + 1,) + Phi_h.shape)
    out[0] = np.eye(Phi_h.shape[0])
    for k in range(count):
        out[k + 1] = Phi_h @ out[k]
    return out


def closed_form_trajectory(propagator: Propagator, t_f: float, x0: np.ndarray,
                           energies: Sequence[np.ndarray], costates_tf: Sequence[np.ndarray],
                           steps: int):
    """x(t) = Phi(t,0) x0 + sum_i Psi_i(t,0) Phi^T(t_f,t) lambda_i(t_f) on a uniform grid.

    Returns ``(times, x, adjoints)`` where ``adjoints[j][k] = Phi^T(t_f,t_k) lambda_j``.
    ``Psi_i(t, 0)`` is propagated with the one-step Gram recursion
    ``Psi(t+h) = Phi(h) Psi(t) Phi(h)^T + Psi_h``.
    """
    times = uniform_grid(t_f, steps)
    h = t_f / steps
    Phi_h = propagator(h)
    fwd = _powers(Phi_h, steps)                    # Phi(t_k, 0)
    back = fwd[::-1]                               # Phi(t_f, t_k)
    step_gram = gram_integral(propagator, np.stack(list(energies)), 0.0, h, tol=1e-15)

    adj = [np.einsum("kji,j->ki", back, lam) for lam in costates_tf]
    x = np.empty((steps + 1, len(x0)))
    Psi = [np.zeros_like(Phi_h) for _ in energies]
    for k in range(steps + 1):
        if k:
            Psi = [Phi_h @ p @ Phi_h.T + q for p, q in zip(Psi, step_gram)]
        x[k] = fwd[k] @ x0 + sum(p @ a[k] for p, a in zip(Psi, adj))
    return times, x, adj


def nash_trajectory(g: GameMatrices, s: Scenario, steps: int | None = None) -> TrajectorySet:
    """Closed-form state, action and disturbance samples on a uniform grid."""
    steps = s.grid_steps if steps is None else int(steps)
    net = s.network
    times, x, adj = closed_form_trajectory(g.propagator, s.t_f, s.x0, g.energies,
                                           g.costate_tf, steps)
    u, w = [], []
    for i in range(net.n):
        B = input_matrix(net, i)
        Bw = input_matrix(net, i, disturbance=True)
        u.append(-np.linalg.solve(s.R[i], B.T @ adj[i].T).T)
        w.append(np.linalg.solve(s.R_w[i], Bw.T @ adj[i].T).T)
    return TrajectorySet(times, x, u, w)


def worst_case_cost(g: GameMatrices, s: Scenario, i: int) -> float:
    """Running cost 1/2 int(u^T R u - w^T R_w w) at the equilibrium, in closed form."""
    lam = g.costate_tf[i]
    return float(-0.5 * lam @ g.psi[i] @ lam)


def agent_error(net: OpinionNetwork, i: int, x: np.ndarray, x0: np.ndarray) -> float:
    """E_i at state ``x``: stubbornness deviation plus disagreement on incident edges."""
    return quadratic_disagreement(net, x, x0, agent=i)


def terminal_error(g: GameMatrices, s: Scenario, i: int) -> float:
    """E_i: stubbornness deviation plus neighbour disagreement at t_f."""
    return agent_error(s.network, i, g.x_tf, s.x0)


def dynamics_rhs(s: Scenario, L: np.ndarray, x: np.ndarray, u: Sequence[np.ndarray],
                 w: Sequence[np.ndarray]) -> np.ndarray:
    """-L x + sum_i B_i u_i + sum_i B_wi w_i for a single time or a batch of samples."""
    net = s.network
    out = -(x @ L.T)
    for i in range(net.n):
        out = out + u[i] @ input_matrix(net, i).T + w[i] @ input_matrix(net, i, disturbance=True).T
    return out


# --- independent verification ------------------------------------------------


def discrete_kkt_oracle(s: Scenario, steps: int) -> TrajectorySet:
    """Forward-Euler discretisation of the game solved as one sparse KKT system.

    Each agent's sampled controls and disturbances are decision variables;
    first-order conditions for every player (minimising over u_i, maximising
    over w_i) are stacked together with the dynamics and the discrete costate
    recursions and solved at once.  ``u[i][k]`` is held on ``[t_k, t_k+1)`` and
    is reported at the cell midpoint (``control_times``).
    """
    if steps < 50:
        raise ValidationError("oracle needs at least 50 steps")
    net = s.network
    N, nm, n = int(steps), net.size, net.n
    dt = s.t_f / N
    L = extended_laplacian(net)
    A = np.eye(nm) - dt * L
    Bs = [input_matrix(net, i) for i in range(n)]
    Bws = [input_matrix(net, i, disturbance=True) for i in range(n)]
    F_i, L_i = zip(*[agent_terms(net, i) for i in range(n)])

    eyeN = sp.identity(N, format="csr")
    sub = sp.eye(N, k=-1, format="csr")
    sup = sp.eye(N, k=1, format="csr")
    last = sp.csr_matrix(([1.0], ([N - 1], [N - 1])), shape=(N, N))

    # unknown layout: X (x_1..x_N), then per agent U_i, W_i, Lambda_i (lambda_1..lambda_N)
    sizes = [N * nm]
    for i in range(n):
        sizes += [N * Bs[i].shape[1], N * Bws[i].shape[1], N * nm]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    cols = {"X": 0}
    for i in range(n):
        cols[("U", i)] = 1 + 3 * i
        cols[("W", i)] = 2 + 3 * i
        cols[("Lam", i)] = 3 + 3 * i

    row_blocks, rhs = [], []

    def row(entries: dict, b: np.ndarray):
        blocks = [None] * len(sizes)
        for key, mat in entries.items():
            blocks[cols[key]] = mat
        height = b.size
        for j, blk in enumerate(blocks):
            if blk is None:
                blocks[j] = sp.csr_matrix((height, sizes[j]))
        row_blocks.append(blocks)
        rhs.append(b)

    b_dyn = np.zeros(N * nm)
    b_dyn[:nm] = A @ s.x0
    dyn = {"X": sp.kron(eyeN, sp.identity(nm)) - sp.kron(sub, A)}
    for i in range(n):
        dyn[("U", i)] = -dt * sp.kron(eyeN, Bs[i])
        dyn[("W", i)] = -dt * sp.kron(eyeN, Bws[i])
    row(dyn, b_dyn)

    for i in range(n):
        b_cos = np.zeros(N * nm)
        b_cos[-nm:] = -F_i[i] @ s.x0
        row({("Lam", i): sp.kron(eyeN, sp.identity(nm)) - sp.kron(sup, A.T),
             "X": -sp.kron(last, F_i[i] + L_i[i])}, b_cos)
        row({("U", i): sp.kron(eyeN, s.R[i]), ("Lam", i): sp.kron(eyeN, Bs[i].T)},
            np.zeros(N * Bs[i].shape[1]))
        row({("W", i): -sp.kron(eyeN, s.R_w[i]), ("Lam", i): sp.kron(eyeN, Bws[i].T)},
            np.zeros(N * Bws[i].shape[1]))

    K = sp.bmat(row_blocks, format="csc")
    b = np.concatenate(rhs)
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            z = spsolve(K, b)
        except (RuntimeError, MatrixRankWarning) as exc:
            raise NumericalError(f"singular KKT system: {exc}") from exc
    if not np.all(np.isfinite(z)):
        raise NumericalError("singular KKT system (non-finite solution)")

    def part(key, width):
        j = cols[key]
        return z[offsets[j]:offsets[j + 1]].reshape(N, width)

    x = np.vstack([s.x0, part("X", nm)])
    u = [part(("U", i), Bs[i].shape[1]) for i in range(n)]
    w = [part(("W", i), Bws[i].shape[1]) for i in range(n)]
    times = uniform_grid(s.t_f, N)
    return TrajectorySet(times, x, u, w, control_times=0.5 * (times[1:] + times[:-1]))


@dataclass
class CellQuadrature:
    """Gauss-Legendre nodes inside each grid cell, with Phi(t_f, node)."""

    times: np.ndarray               # (cells, q)
    weights: np.ndarray             # (cells, q)
    phi_to_tf: np.ndarray           # (cells, q, nm, nm)


def cell_quadrature(propagator: Propagator, t_f: float, steps: int, nodes: int = 4) -> CellQuadrature:
    h = t_f / steps
    xi, wq = np.polynomial.legendre.leggauss(nodes)
    offsets = 0.5 * h * (1 - xi)                  # distance from node to the cell's right end
    back = _powers(propagator(h), steps)[::-1]    # Phi(t_f, t_k)
    local = np.stack([propagator(o) for o in offsets])
    phi = np.einsum("kab,qbc->kqac", back[1:], local)
    starts = np.arange(steps) * h
    times = starts[:, None] + 0.5 * h * (1 + xi)[None, :]
    weights = np.broadcast_to(0.5 * h * wq, times.shape).copy()
    return CellQuadrature(times, weights, phi)


def bump_gradient(cq: CellQuadrature, B: np.ndarray, R: np.ndarray, samples: np.ndarray,
                  sign: float, terminal, eps: float = 1e-5, base: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences of a quadratic cost along cell-indicator bumps.

    The cost is ``base + sign/2 int v^T R v + terminal(dx(t_f))`` where ``v`` is
    the input channel entering through ``B`` with node samples ``samples``
    (cells, q, d) and ``terminal`` takes displacements of the terminal state.  Returns ``(fd, running)``: the finite-difference gradient
    (cells, d) and the running-cost part of the gradient used to normalise it.
    """
    d = B.shape[1]
    g = np.einsum("kq,kqab,bc->kca", cq.weights, cq.phi_to_tf, B)     # (cells, d, nm)
    running = sign * np.einsum("kq,kqd,cd->kc", cq.weights, samples, R)
    quad = sign * np.einsum("kq,cc->kc", cq.weights, R)
    fd = np.empty_like(running)
    for c in range(d):
        jp = base + eps * running[:, c] + 0.5 * eps ** 2 * quad[:, c] + terminal(eps * g[:, c, :])
        jm = base - eps * running[:, c] + 0.5 * eps ** 2 * quad[:, c] + terminal(-eps * g[:, c, :])
        fd[:, c] = (jp - jm) / (2 * eps)
    return fd, running


def _normalised(fd: np.ndarray, running: np.ndarray) -> float:
    scale = np.linalg.norm(running)
    return float(np.linalg.norm(fd) / scale) if scale > 0 else float(np.linalg.norm(fd))


def terminal_cost_fn(net: OpinionNetwork, x0: np.ndarray, x_ref: np.ndarray,
                     agent: int | None = None):
    """Terminal error as a function of a batch of displacements ``dX`` from ``x_ref``.

    ``agent=i`` gives E_i (own stubbornness, incident edges); ``agent=None``
    gives the per-edge total E_o.  Evaluated in edge-difference coordinates,
    projected on the eigenvectors of each weight block, so that near-consensus
    states keep their small disagreement terms instead of losing them to
    cancellation.
    """
    agents = range(net.n) if agent is None else [agent]
    stub = [(net.block(i), net.stubbornness[i], x_ref[net.block(i)] - x0[net.block(i)])
            for i in agents]
    edges = [e for e in net.active_edges() if agent is None or agent in (e.tail, e.head)]
    factors = [np.linalg.eigh(0.5 * (e.weight + e.weight.T)) for e in edges]
    diffs0 = [V.T @ (x_ref[net.block(e.head)] - x_ref[net.block(e.tail)])
              for e, (_, V) in zip(edges, factors)]

    def cost(dX):
        dX = np.atleast_2d(dX)
        total = np.zeros(dX.shape[0])
        for blk, W, dev0 in stub:
            dev = dev0[None, :] + dX[:, blk]
            total = total + np.einsum("ka,ab,kb->k", dev, W, dev)
        for e, (sv, V), d0 in zip(edges, factors, diffs0):
            d = d0[None, :] + (dX[:, net.block(e.head)] - dX[:, net.block(e.tail)]) @ V
            total = total + d ** 2 @ sv
        return 0.5 * total
    return cost


def stationarity_gradients(g: GameMatrices, s: Scenario, steps: int | None = None,
                           eps: float = 1e-5, nodes: int = 4) -> dict[str, list[float]]:
    """Normalised finite-difference gradients of each J_i at the closed-form equilibrium.

    Controls are perturbed by cell-indicator bumps of size ``eps`` (one cell,
    one channel at a time) holding every other input at equilibrium; costs are
    integrated with ``nodes``-point Gauss-Legendre per cell.
    """
    steps = s.grid_steps if steps is None else int(steps)
    net = s.network
    cq = cell_quadrature(g.propagator, s.t_f, steps, nodes)
    out = {"u": [], "w": []}
    for i in range(net.n):
        lam_nodes = np.einsum("kqba,b->kqa", cq.phi_to_tf, g.costate_tf[i])   # Phi^T lambda
        B = input_matrix(net, i)
        Bw = input_matrix(net, i, disturbance=True)
        u = -np.einsum("de,kqe->kqd", np.linalg.inv(s.R[i]) @ B.T, lam_nodes)
        w = np.einsum("de,kqe->kqd", np.linalg.inv(s.R_w[i]) @ Bw.T, lam_nodes)
        run_u = 0.5 * np.einsum("kq,kqd,de,kqe->", cq.weights, u, s.R[i], u)
        run_w = -0.5 * np.einsum("kq,kqd,de,kqe->", cq.weights, w, s.R_w[i], w)
        term = terminal_cost_fn(net, s.x0, g.x_tf, agent=i)
        fd, run = bump_gradient(cq, B, s.R[i], u, +1.0, term, eps, run_u + run_w)
        out["u"].append(_normalised(fd, run))
        fd, run = bump_gradient(cq, Bw, s.R_w[i], w, -1.0, term, eps, run_u + run_w)
        out["w"].append(_normalised(fd, run))
    return out


def disturbance_curvature(g: GameMatrices, s: Scenario, i: int, directions: np.ndarray,
                          steps: int | None = None, eps: float = 1e-3) -> np.ndarray:
    """Second differences of J_i along disturbance directions (cells, k) per direction."""
    steps = s.grid_steps if steps is None else int(steps)
    cq = cell_quadrature(g.propagator, s.t_f, steps)
    Bw = input_matrix(s.network, i, disturbance=True)
    gmat = np.einsum("kq,kqab,bc->kca", cq.weights, cq.phi_to_tf, Bw)
    term = terminal_cost_fn(s.network, s.x0, g.x_tf, agent=i)
    h = s.t_f / steps
    out = []
    for v in directions:
        dx = np.einsum("kca,kc->a", gmat, v)
        quad = -h * np.einsum("kc,cd,kd->", v, s.R_w[i], v)
        # cost is quadratic: linear parts cancel in the symmetric second difference
        jp = 0.5 * eps ** 2 * quad + term(eps * dx)[0]
        jm = 0.5 * eps ** 2 * quad + term(-eps * dx)[0]
        j0 = term(np.zeros_like(dx))[0]
        out.append((jp + jm - 2 * j0) / eps ** 2)
    return np.array(out)
