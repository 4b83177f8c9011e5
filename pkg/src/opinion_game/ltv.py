"""Transition matrices of commuting time-varying systems A(t) = f(t) A0.

All members of the family share A0's eigenvectors, so the transition matrix
is a spectral sum with scalar exponents ``lambda_k * int f``.  Integrals of
piecewise-polynomial profiles are evaluated from exact antiderivatives.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DefectiveMatrixError, ValidationError
from .linalg import Propagator

EIGVEC_COND_LIMIT = 1e8


class Profile(Protocol):
    def value(self, t: float) -> float: ...
    def integral(self, t0: float, t1: float) -> float: ...


@dataclass(frozen=True)
class PiecewisePolynomial:
    """f(t) = p_k(t - breaks[k]) on [breaks[k], breaks[k+1]); end pieces extrapolate.

    ``coeffs[k]`` are ascending-power coefficients of piece ``k``.
    """

    breaks: tuple[float, ...]
    coeffs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b.ndim != 1 or len(b) < 2 or np.any(np.diff(b) <= 0):
            raise ValidationError("breaks must be a strictly increasing sequence of >= 2 points")
        if len(self.coeffs) != len(b) - 1:
            raise ValidationError("need one coefficient list per piece")
        if any(len(c) == 0 for c in self.coeffs):
            raise ValidationError("empty coefficient list")

    @classmethod
    def constant(cls, c: float, t_end: float = 1.0) -> "PiecewisePolynomial":
        return cls((0.0, float(t_end)), ((float(c),),))

    @property
    def is_constant(self) -> bool:
        consts = {c[0] for c in self.coeffs}
        return len(consts) == 1 and all(not any(c[1:]) for c in self.coeffs)

    def _piece(self, t: float) -> int:
        k = int(np.searchsorted(self.breaks, t, side="right")) - 1
        return min(max(k, 0), len(self.coeffs) - 1)

    def value(self, t: float) -> float:
        k = self._piece(t)
        return float(Polynomial(self.coeffs[k])(t - self.breaks[k]))

    def _antiderivative(self, t: float) -> float:
        """F(t) = int_{breaks[0]}^t f, continuous across breaks."""
        total = 0.0
        k_end = self._piece(t)
        for k in range(k_end + 1):
            lo = self.breaks[k]
            hi = t if k == k_end else self.breaks[k + 1]
            P = Polynomial(self.coeffs[k]).integ()
            total += P(hi - lo) - P(0.0)
        return float(total)

    def integral(self, t0: float, t1: float) -> float:
        return self._antiderivative(t1) - self._antiderivative(t0)


@dataclass(frozen=True)
class AnalyticProfile:
    """Profile from a closed-form value and antiderivative (e.g. sin / -cos)."""

    f: Callable[[float], float]
    antiderivative: Callable[[float], float]

    def value(self, t: float) -> float:
        return float(self.f(t))

    def integral(self, t0: float, t1: float) -> float:
        return float(self.antiderivative(t1) - self.antiderivative(t0))


@dataclass(frozen=True, eq=False)
class CommutativeFamily:
    A0: np.ndarray
    profile: Profile

    def __post_init__(self):
        A0 = np.asarray(self.A0, dtype=float)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
            raise ValidationError("A0 must be square")
        if not np.all(np.isfinite(A0)):
            raise ValidationError("A0 has non-finite entries")
        object.__setattr__(self, "A0", A0)

    def at(self, t: float) -> np.ndarray:
        return self.profile.value(t) * self.A0


def laplacian_family(L: np.ndarray, profile: Profile | None = None) -> CommutativeFamily:
    """A(t) = -f(t) L; ``f`` defaults to 1."""
    return CommutativeFamily(-np.asarray(L, dtype=float),
                             profile or PiecewisePolynomial.constant(1.0))


@dataclass(frozen=True, eq=False)
class ExtendedEigenpair:
    lam: complex                  # eigenvalue of A0; mu(t) = f(t) * lam
    e: np.ndarray                 # right eigenvector
    r: np.ndarray                 # reciprocal vector, r^T e_j = delta_ij
    profile: Profile

    def mu(self, t: float) -> complex:
        return self.profile.value(t) * self.lam

    def exponent(self, t0: float, t: float) -> complex:
        return self.lam * self.profile.integral(t0, t)


def extended_eigenpairs(fam: CommutativeFamily) -> list[ExtendedEigenpair]:
    """Eigenpairs of A0 carried over to the whole family.

    Symmetric A0 uses an orthonormal eigenbasis (r = e).  Otherwise the
    reciprocal basis comes from the inverse eigenvector matrix, and a matrix
    whose eigenvectors are too ill-conditioned to invert is reported as
    defective.
    """
    A0 = fam.A0
    if np.allclose(A0, A0.T, rtol=0, atol=1e-14 * max(1.0, np.max(np.abs(A0), initial=0.0))):
        lam, V = np.linalg.eigh(0.5 * (A0 + A0.T))
        return [ExtendedEigenpair(complex(l), V[:, k], V[:, k], fam.profile)
                for k, l in enumerate(lam)]
    lam, V = np.linalg.eig(A0)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > EIGVEC_COND_LIMIT:
        raise DefectiveMatrixError(
            f"A0 is defective or nearly so (eigenvector condition {cond:.3e} > "
            f"{EIGVEC_COND_LIMIT:g}); use the matrix exponential for constant profiles")
    Vinv = np.linalg.inv(V)
    return [ExtendedEigenpair(complex(l), V[:, k], Vinv[k, :], fam.profile)
            for k, l in enumerate(lam)]


def spectral_transition(pairs: Sequence[ExtendedEigenpair], t0: float, t: float) -> np.ndarray:
    """Phi(t, t0) = sum_k exp(lam_k int_{t0}^t f) e_k r_k^T."""
    if not pairs:
        raise ValidationError("empty eigenpair list")
    Phi = sum(np.exp(p.exponent(t0, t)) * np.outer(p.e, p.r) for p in pairs)
    if np.iscomplexobj(Phi):
        scale = max(1.0, np.max(np.abs(Phi)))
        if np.max(np.abs(Phi.imag)) <= 1e-10 * scale:
            return np.ascontiguousarray(Phi.real)
    return Phi


def reconstruction_error(pairs: Sequence[ExtendedEigenpair]) -> float:
    """max |sum_k e_k r_k^T - I|."""
    S = sum(np.outer(p.e, p.r) for p in pairs)
    return float(np.max(np.abs(S - np.eye(S.shape[0]))))


def spectral_propagator(pairs: Sequence[ExtendedEigenpair]) -> Propagator:
    """``s -> Phi(s, 0)`` for use in the equilibrium pipeline.

    The pipeline evaluates transition matrices by duration only, which is
    exact for time-invariant families; time-varying profiles are refused.
    """
    profile = pairs[0].profile
    if not getattr(profile, "is_constant", False):
        raise ValidationError("the equilibrium pipeline needs a constant profile")
    return lambda s: spectral_transition(pairs, 0.0, float(s))


@dataclass(frozen=True)
class StabilityVerdict:
    omega_start: float
    omega_max: float
    omega_end: float
    bounded: bool
    asymptotically_stable: bool


def ltv_stability_check(pairs: Sequence[ExtendedEigenpair], probe: Sequence[float],
                        bound: float, decay: float = 1e-6) -> list[StabilityVerdict]:
    """Omega_k(t) = |exp(int_{t0}^t mu_k) e_k| over the probe grid, per eigenpair.

    ``bounded`` when the maximum stays within ``bound``; ``asymptotically_stable``
    when additionally the final value has shrunk below ``decay`` times the start.
    """
    probe = np.asarray(probe, dtype=float)
    if probe.ndim != 1 or len(probe) < 2 or np.any(np.diff(probe) <= 0):
        raise ValidationError("probe grid must be strictly increasing with >= 2 points")
    t0 = probe[0]
    out = []
    for p in pairs:
        norm_e = np.linalg.norm(p.e)
        omega = np.array([abs(np.exp(p.exponent(t0, t))) * norm_e for t in probe])
        bounded = bool(np.max(omega) <= bound)
        out.append(StabilityVerdict(float(omega[0]), float(np.max(omega)), float(omega[-1]),
                                    bounded, bool(bounded and omega[-1] <= decay * omega[0])))
    return out
