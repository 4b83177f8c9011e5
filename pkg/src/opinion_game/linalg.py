"""Numerical kernels: matrix exponential, Gram integrals, Loewner order, spectra."""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NumericalError, QuadratureError, ValidationError

Propagator = Callable[[float], np.ndarray]

# Pade coefficients and 1-norm thresholds (Higham 2005, double precision).
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
}
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
           960960.0, 16380.0, 182.0, 1.0)
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0}
_THETA13 = 5.371920351148152e0


def expm_scaled(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("expm input has non-finite entries")
    n = A.shape[0]
    ident = np.eye(n)
    if n == 0:
        return ident
    norm = np.linalg.norm(A, 1)
    if norm == 0.0:
        return ident

    for deg in (3, 5, 7, 9):
        if norm <= _THETA[deg]:
            b = _PADE[deg]
            A2 = A @ A
            powers = [ident, A2]
            while len(powers) <= deg // 2:
                powers.append(powers[-1] @ A2)
            U = A @ sum(b[2 * k + 1] * powers[k] for k in range(deg // 2 + 1))
            V = sum(b[2 * k] * powers[k] for k in range(deg // 2 + 1))
            return _pade_solve(U, V)

    s = max(0, int(math.ceil(math.log2(norm / _THETA13))))
    A = A / 2.0 ** s
    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    X = _pade_solve(U, V)
    for _ in range(s):
        X = X @ X
    return X


def _pade_solve(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.linalg.solve(V - U, V + U)


def laplacian_propagator(L: np.ndarray) -> Propagator:
    """Return ``s -> exp(-s L)``, the transition matrix over a duration ``s``."""
    L = np.asarray(L, dtype=float)
    return lambda s: expm_scaled(-float(s) * L)


# --- quadrature -------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _gl(f, a: float, b: float) -> np.ndarray:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return half * sum(w * f(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))


def adaptive_gauss_legendre(f, a: float, b: float, tol: float = 1e-10,
                            max_intervals: int = 4096) -> np.ndarray:
    """Composite 10-point Gauss-Legendre with interval halving.

    ``f`` may return arrays; the error test is entrywise absolute. Each
    accepted piece gets a share of ``tol`` proportional to its length.
    """
    if b < a:
        raise ValueError("integration interval must satisfy a <= b")
    if b == a:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    span = b - a
    total = 0.0
    stack = [(a, b, _gl(f, a, b))]
    n_intervals = 1
    while stack:
        lo, hi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gl(f, lo, mid), _gl(f, mid, hi)
        err = np.max(np.abs(left + right - whole))
        if err <= tol * (hi - lo) / span or hi - lo < 1e-12 * span:
            total = total + left + right
            continue
        n_intervals += 1
        if n_intervals > max_intervals:
            raise QuadratureError(
                f"tolerance {tol:g} not reached within {max_intervals} subintervals "
                f"(last local error {err:.3e} on [{lo:g}, {hi:g}])")
        stack.append((lo, mid, left))
        stack.append((mid, hi, right))
    return np.asarray(total, dtype=float)


def _check_spd(R, label: str) -> np.ndarray:
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[0] != R.shape[1]:
        raise ValidationError(f"{label} must be square, got shape {R.shape}")
    if not np.allclose(R, R.T, rtol=1e-12, atol=1e-14):
        raise ValidationError(f"{label} must be symmetric")
    if R.size and np.min(np.linalg.eigvalsh(R)) <= 0:
        raise ValidationError(f"{label} must be positive definite")
    return R


def weighted_input_gram(B: np.ndarray, R) -> np.ndarray:
    """``B R^{-1} B^T``, the input energy matrix of one channel."""
    R = _check_spd(R, "weight matrix")
    return B @ np.linalg.solve(R, B.T)


def gram_integral(propagator: Propagator, S: np.ndarray, t_a: float, t_b: float,
                  tol: float = 1e-10) -> np.ndarray:
    """``int_{t_a}^{t_b} Phi(t_b, tau) S Phi(t_b, tau)^T dtau`` for one or many ``S``.

    ``S`` may be a single matrix or a stack ``(k, N, N)``; stacks share the
    same quadrature mesh (and the same transition-matrix evaluations).
    """
    S = np.asarray(S, dtype=float)

    def integrand(tau):
        Phi = propagator(t_b - tau)
        return Phi @ S @ Phi.T

    return adaptive_gauss_legendre(integrand, t_a, t_b, tol=tol)


def psi_integral(net, i: int, R_i, R_w_i, t_a: float, t_b: float, tol: float = 1e-10,
                 propagator: Propagator | None = None) -> np.ndarray:
    """Gram integral of agent ``i``'s net input energy (disturbance minus control).

    Positive semidefinite whenever the agent's control energy is dominated by
    its disturbance energy in the Loewner order.
    """
    from .graph import extended_laplacian

    if t_b < t_a:
        raise ValidationError("psi_integral needs t_a <= t_b")
    if propagator is None:
        propagator = laplacian_propagator(extended_laplacian(net))
    S = agent_energy(net, i, R_i, R_w_i)
    return gram_integral(propagator, S, t_a, t_b, tol)


def agent_energy(net, i: int, R_i, R_w_i) -> np.ndarray:
    """``B_wi R_wi^{-1} B_wi^T - B_i R_i^{-1} B_i^T`` in the stacked space."""
    from .graph import input_matrix

    R_i = _check_spd(R_i, f"R[{i}]")
    R_w_i = _check_spd(R_w_i, f"R_w[{i}]")
    Bu = input_matrix(net, i)
    Bw = input_matrix(net, i, disturbance=True)
    return Bw @ np.linalg.solve(R_w_i, Bw.T) - Bu @ np.linalg.solve(R_i, Bu.T)


def stacked_psi(psis: Sequence[np.ndarray]) -> np.ndarray:
    """Horizontal stack ``[Psi_1, ..., Psi_n]``."""
    return np.hstack(list(psis))


def rk4(f: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, t0: float,
        h: float, steps: int) -> np.ndarray:
    """Classical fixed-step Runge-Kutta; returns all ``steps + 1`` states."""
    y = np.empty((steps + 1,) + np.shape(y0))
    y[0] = y0
    t = t0
    for k in range(steps):
        k1 = f(t, y[k])
        k2 = f(t + 0.5 * h, y[k] + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y[k] + 0.5 * h * k2)
        k4 = f(t + h, y[k] + h * k3)
        y[k + 1] = y[k] + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (k + 1) * h
    return y


# --- ordering and spectra ----------------------------------------------------

_EIG_FLOOR = -1e-9


def _check_psd(X: np.ndarray, label: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValidationError(f"{label} must be square")
    scale = max(1.0, np.max(np.abs(X)) if X.size else 1.0)
    if np.max(np.abs(X - X.T), initial=0.0) > 1e-10 * scale:
        raise ValidationError(f"{label} is not symmetric")
    if X.size and np.min(np.linalg.eigvalsh(0.5 * (X + X.T))) < _EIG_FLOOR * scale:
        raise ValidationError(f"{label} is not positive semidefinite")
    return 0.5 * (X + X.T)


def pinv_svd(Y: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose inverse with singular values below ``sigma_max * rcond`` dropped."""
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(Y.T)
    keep = s > s[0] * rcond
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def loewner_leq(X, Y, tol: float = 1e-9) -> bool:
    """True iff ``X <= Y`` in the Loewner order, for PSD ``X`` and ``Y``.

    Uses the range-inclusion / largest-eigenvalue characterisation with the
    pseudoinverse of ``Y``, which also covers singular ``Y``.
    """
    X = _check_psd(X, "X")
    Y = _check_psd(Y, "Y")
    if X.shape != Y.shape:
        raise ValidationError("X and Y must have the same shape")
    if not np.any(X):
        return True
    Yp = pinv_svd(Y)
    scale = max(np.linalg.norm(X, 2), 1e-300)
    residual = X - Y @ Yp @ X
    if np.linalg.norm(residual, 2) > tol * max(1.0, scale):
        return False
    mu = np.linalg.eigvals(Yp @ X)
    return bool(np.max(mu.real) <= 1.0 + tol)


def spectrum_has_positive_real_parts(A, threshold: float = 1e-9) -> bool:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("spectrum check needs a square matrix")
    if A.size == 0:
        return True
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    return bool(np.min(ev.real) > threshold)


def min_real_eigenvalue(A) -> float:
    A = np.asarray(A, dtype=float)
    try:
        return float(np.min(np.linalg.eigvals(A).real))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc


class LUSolver:
    """LU factorisation with partial pivoting plus a 2-norm condition estimate."""

    def __init__(self, A: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.cond = float(np.linalg.cond(self.A)) if self.A.size else 1.0
        self._lu = lu_factor(self.A) if np.isfinite(self.cond) else None

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._lu is None:
            raise NumericalError("matrix is exactly singular")
        return lu_solve(self._lu, b)
