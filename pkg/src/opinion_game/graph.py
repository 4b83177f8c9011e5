"""Opinion network, incidence matrix and Kronecker-extended Laplacians.

Agents are indexed from 0 inside the library.  Every per-agent matrix lives
in the stacked ``n*m`` opinion space, with agent ``i`` occupying the rows and
columns ``i*m:(i+1)*m``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError


class Edge(NamedTuple):
    tail: int
    head: int
    weight: np.ndarray


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OpinionNetwork:
    """Agents, weighted edges (m x m influence blocks) and per-agent input maps.

    Build with :meth:`from_edges`, which validates and fills defaults.
    """

    n: int
    m: int
    edges: tuple[Edge, ...]
    stubbornness: tuple[np.ndarray, ...]
    control_maps: tuple[np.ndarray, ...]
    disturbance_maps: tuple[np.ndarray, ...]

    @classmethod
    def from_edges(
        cls,
        n: int,
        m: int,
        edges: Sequence[tuple[int, int, object]],
        stubbornness=None,
        control_maps=None,
        disturbance_maps=None,
    ) -> "OpinionNetwork":
        """Validate and assemble a network.

        ``edges`` holds ``(tail, head, W)`` with 0-based endpoints; ``W`` may be
        a scalar (meaning ``W * I_m``) or an m x m array.  ``stubbornness`` is
        a scalar, or one entry per agent (scalar, length-m diagonal, or m x m
        diagonal matrix).  Input maps default to ``I_m``.
        """
        if int(n) != n or n < 1:
            raise ValidationError(f"agent count must be a positive integer, got {n!r}")
        if int(m) != m or m < 1:
            raise ValidationError(f"topic count must be a positive integer, got {m!r}")
        n, m = int(n), int(m)

        built: list[Edge] = []
        seen: set[tuple[int, int]] = set()
        for k, e in enumerate(edges):
            tail, head, w = e
            label = f"edge #{k} ({tail}->{head})"
            if int(tail) != tail or int(head) != head:
                raise ValidationError(f"{label}: endpoints must be integers")
            tail, head = int(tail), int(head)
            if not (0 <= tail < n and 0 <= head < n):
                raise ValidationError(f"{label}: endpoint out of range [0, {n})")
            if tail == head:
                raise ValidationError(f"{label}: self-loops are expressed through stubbornness")
            if (tail, head) in seen:
                raise ValidationError(f"{label}: duplicate edge")
            seen.add((tail, head))
            w = _as_block(w, m, label)
            if not np.all(np.isfinite(w)):
                raise ValidationError(f"{label}: non-finite weight")
            if np.any(w < 0):
                raise ValidationError(f"{label}: negative weight entry")
            built.append(Edge(tail, head, _frozen(w)))

        stub = _per_agent(stubbornness, n, "stubbornness", lambda v, lab: _stubborn_block(v, m, lab), 0.0)
        b = _per_agent(control_maps, n, "control_map", lambda v, lab: _input_map(v, m, lab), None)
        xi = _per_agent(disturbance_maps, n, "disturbance_map", lambda v, lab: _input_map(v, m, lab), None)
        return cls(n, m, tuple(built), stub, b, xi)

    # --- structure -------------------------------------------------------

    @property
    def size(self) -> int:
        return self.n * self.m

    def block(self, i: int) -> slice:
        self._check_agent(i)
        return slice(i * self.m, (i + 1) * self.m)

    def active_edges(self) -> list[Edge]:
        """Edges whose weight block is not identically zero."""
        return [e for e in self.edges if np.any(e.weight)]

    def neighbors(self, i: int) -> list[tuple[int, np.ndarray]]:
        """In- and out-neighbours of ``i`` with the coupling block of the shared edge."""
        self._check_agent(i)
        out = []
        for e in self.active_edges():
            if e.tail == i:
                out.append((e.head, e.weight))
            elif e.head == i:
                out.append((e.tail, e.weight))
        return out

    def control_dims(self) -> list[int]:
        return [b.shape[1] for b in self.control_maps]

    def disturbance_dims(self) -> list[int]:
        return [x.shape[1] for x in self.disturbance_maps]

    def is_connected_per_topic(self) -> bool:
        """Every topic layer links all agents (agent-topic coupling graph)."""
        if self.n == 1:
            return True
        L = extended_laplacian(self)
        adj = (np.abs(L) > 0).astype(int)
        np.fill_diagonal(adj, 0)
        _, labels = connected_components(adj, directed=False)
        labels = labels.reshape(self.n, self.m)
        return all(len(set(labels[:, p])) == 1 for p in range(self.m))

    def _check_agent(self, i: int) -> None:
        if not (0 <= i < self.n):
            raise IndexError(f"agent index {i} out of range [0, {self.n})")


def _as_block(w, m: int, label: str) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return float(w) * np.eye(m)
    if w.shape != (m, m):
        raise ValidationError(f"{label}: weight must be {m}x{m}, got shape {w.shape}")
    return w


def _stubborn_block(v, m: int, label: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        w = float(v) * np.eye(m)
    elif v.ndim == 1:
        if v.shape != (m,):
            raise ValidationError(f"{label}: diagonal must have length {m}")
        w = np.diag(v)
    else:
        if v.shape != (m, m):
            raise ValidationError(f"{label}: must be {m}x{m}, got shape {v.shape}")
        if np.any(v - np.diag(np.diag(v))):
            raise ValidationError(f"{label}: stubbornness matrix must be diagonal")
        w = v
    if not np.all(np.isfinite(w)) or np.any(np.diag(w) < 0):
        raise ValidationError(f"{label}: stubbornness must be finite and nonnegative")
    return w


def _input_map(v, m: int, label: str) -> np.ndarray:
    if v is None:
        return np.eye(m)
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[0] != m:
        raise ValidationError(f"{label}: input map must be {m} x d, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{label}: non-finite entry")
    return v


def _per_agent(value, n: int, name: str, convert, default) -> tuple[np.ndarray, ...]:
    if value is None:
        value = default
    if not isinstance(value, (list, tuple, np.ndarray)) or (isinstance(value, np.ndarray) and value.ndim == 0):
        items = [value] * n
    else:
        items = list(value)
        if len(items) != n:
            raise ValidationError(f"{name}: expected one entry per agent ({n}), got {len(items)}")
    return tuple(_frozen(convert(v, f"{name}[{i}]")) for i, v in enumerate(items))


# --- matrices ---------------------------------------------------------------


def incidence_matrix(net: OpinionNetwork, extended: bool = False) -> np.ndarray:
    """Incidence matrix D (n x |E|): +1 at the head, -1 at the tail of each edge.

    With ``extended=True`` returns the Kronecker extension ``D kron I_m``.
    """
    D = np.zeros((net.n, len(net.edges)))
    for k, e in enumerate(net.edges):
        D[e.tail, k] = -1.0
        D[e.head, k] = 1.0
    if extended:
        return np.kron(D, np.eye(net.m))
    return D


def _edge_weight_matrix(net: OpinionNetwork, keep=None) -> np.ndarray:
    m = net.m
    W = np.zeros((len(net.edges) * m,) * 2)
    for k, e in enumerate(net.edges):
        if keep is None or keep(e):
            W[k * m:(k + 1) * m, k * m:(k + 1) * m] = e.weight
    return W


def extended_laplacian(net: OpinionNetwork) -> np.ndarray:
    """Block Laplacian ``D W D^T`` on the stacked nm-dimensional opinion space."""
    if not net.edges:
        return np.zeros((net.size, net.size))
    DD = incidence_matrix(net, extended=True)
    return DD @ _edge_weight_matrix(net) @ DD.T


def agent_terms(net: OpinionNetwork, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(F_i, L_i)``: the stubbornness selector and the local Laplacian.

    ``L_i`` keeps only the edges incident to ``i`` (in- or out-edges), so that
    ``x^T L_i x`` is the disagreement of agent ``i`` with its neighbours.
    """
    net._check_agent(i)
    F = np.zeros((net.size, net.size))
    F[net.block(i), net.block(i)] = net.stubbornness[i]
    if not net.edges:
        return F, np.zeros_like(F)
    DD = incidence_matrix(net, extended=True)
    Wi = _edge_weight_matrix(net, keep=lambda e: i in (e.tail, e.head))
    return F, DD @ Wi @ DD.T


def stacked_terms(net: OpinionNetwork) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(F, P, F_bar)``.

    ``F`` and ``P`` are the (n*nm) x nm vertical stacks of ``F_i`` and ``L_i``;
    ``F_bar`` is the nm x nm block diagonal of all stubbornness blocks.
    """
    terms = [agent_terms(net, i) for i in range(net.n)]
    F = np.vstack([t[0] for t in terms])
    P = np.vstack([t[1] for t in terms])
    F_bar = np.zeros((net.size, net.size))
    for i in range(net.n):
        F_bar[net.block(i), net.block(i)] = net.stubbornness[i]
    return F, P, F_bar


def input_matrix(net: OpinionNetwork, i: int, disturbance: bool = False) -> np.ndarray:
    """Lift agent ``i``'s control (or disturbance) map into the stacked space."""
    local = net.disturbance_maps[i] if disturbance else net.control_maps[i]
    B = np.zeros((net.size, local.shape[1]))
    B[net.block(i)] = local
    return B


def quadratic_disagreement(net: OpinionNetwork, x: np.ndarray, x0: np.ndarray,
                           agent: int | None = None) -> float:
    """Edge-wise terminal error: stubbornness deviations plus one term per edge.

    With ``agent`` given, only that agent's stubbornness term and the edges
    touching it are counted (the per-agent E_i).  Summing edge differences
    keeps full relative accuracy near consensus, where ``x^T L x`` cancels.
    """
    x = np.asarray(x, float)
    x0 = np.asarray(x0, float)
    total = 0.0
    agents = range(net.n) if agent is None else [agent]
    for i in agents:
        dv = x[net.block(i)] - x0[net.block(i)]
        total += dv @ net.stubbornness[i] @ dv
    for e in net.active_edges():
        if agent is not None and agent not in (e.tail, e.head):
            continue
        dv = x[net.block(e.tail)] - x[net.block(e.head)]
        total += dv @ e.weight @ dv
    return 0.5 * float(total)
