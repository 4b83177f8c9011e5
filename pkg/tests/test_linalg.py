import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad_vec

from opinion_game.errors import NumericalError, QuadratureError, ValidationError
from opinion_game.graph import OpinionNetwork, extended_laplacian
from opinion_game.linalg import (
    LUSolver,
    adaptive_gauss_legendre,
    expm_scaled,
    gram_integral,
    laplacian_propagator,
    loewner_leq,
    min_real_eigenvalue,
    pinv_svd,
    psi_integral,
    rk4,
    spectrum_has_positive_real_parts,
)
from opinion_game.nash import assemble_game
from opinion_game.scenarios import reference_network, reference_scenario

E = np.e


# --- expm ------------------------------------------------------------------------


def test_expm_zero_is_identity():
    np.testing.assert_array_equal(expm_scaled(np.zeros((4, 4))), np.eye(4))


def test_expm_diagonal():
    np.testing.assert_allclose(expm_scaled(np.diag([1.0, -1.0])), np.diag([E, 1 / E]), rtol=1e-15)


def test_expm_two_node_laplacian():
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    a, b = (1 + E ** -2) / 2, (1 - E ** -2) / 2
    np.testing.assert_allclose(expm_scaled(-L), [[a, b], [b, a]], rtol=1e-14)


def test_expm_matches_scipy_on_reference_laplacian():
    L = extended_laplacian(reference_network(coupled=True))
    for t in (0.01, 1.0, 10.0, 50.0):
        np.testing.assert_allclose(expm_scaled(-t * L), scipy.linalg.expm(-t * L), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.floats(0.01, 20.0), st.integers(0, 2 ** 32 - 1))
def test_expm_matches_scipy_random(n, scale, seed):
    A = scale * np.random.default_rng(seed).standard_normal((n, n)) / np.sqrt(n)
    ref = scipy.linalg.expm(A)
    np.testing.assert_allclose(expm_scaled(A), ref, rtol=1e-9, atol=1e-11 * np.max(np.abs(ref)))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.booleans())
def test_laplacian_semigroup(s, t, coupled):
    L = extended_laplacian(reference_network(coupled=coupled))
    P = laplacian_propagator(L)
    np.testing.assert_allclose(P(s) @ P(t), P(s + t), atol=1e-12)


def test_expm_rejects_nonsquare_and_nonfinite():
    with pytest.raises(ValidationError):
        expm_scaled(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        expm_scaled(np.array([[np.inf]]))


# --- quadrature and Gram integrals ---------------------------------------------------


def test_gauss_legendre_polynomial_and_oscillatory():
    assert adaptive_gauss_legendre(lambda t: t ** 7, 0.0, 2.0) == pytest.approx(2 ** 8 / 8, rel=1e-14)
    val = adaptive_gauss_legendre(lambda t: np.sin(40 * t), 0.0, np.pi / 2, tol=1e-12)
    assert val == pytest.approx((1 - np.cos(20 * np.pi)) / 40, abs=1e-12)


def test_gauss_legendre_reports_failure():
    with pytest.raises(QuadratureError):
        adaptive_gauss_legendre(lambda t: np.sign(t - 1 / 3), 0.0, 1.0, tol=1e-16, max_intervals=8)


def test_psi_zero_when_weights_equal():
    net = reference_network()
    assert not psi_integral(net, 2, 2 * np.eye(2), 2 * np.eye(2), 0.0, 10.0).any()


def test_psi_empty_interval():
    net = reference_network()
    assert not psi_integral(net, 0, 2 * np.eye(2), 0.5 * np.eye(2), 3.0, 3.0).any()


def test_psi_single_agent_constant_integrand():
    net = OpinionNetwork.from_edges(1, 1, [])
    assert psi_integral(net, 0, 1.0, 0.5, 0.0, 1.0)[0, 0] == pytest.approx(1.0, rel=1e-14)


def test_psi_matches_scipy_quadrature():
    net = reference_network(coupled=True)
    L = extended_laplacian(net)
    psi = psi_integral(net, 3, 2 * np.eye(2), 0.5 * np.eye(2), 0.0, 10.0)
    S = np.zeros((10, 10))
    S[6:8, 6:8] = (2.0 - 0.5) * np.eye(2)

    def f(tau):
        P = scipy.linalg.expm(-(10.0 - tau) * L)
        return P @ S @ P.T

    ref, _ = quad_vec(f, 0.0, 10.0, epsabs=1e-13, epsrel=1e-13)
    np.testing.assert_allclose(psi, ref, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 4.0), st.floats(0.1, 4.0), st.integers(0, 4))
def test_gram_additivity(a, b, agent):
    """Psi(t0, t2) = Phi(t2, t1) Psi(t0, t1) Phi(t2, t1)^T + Psi(t1, t2)."""
    net = reference_network(coupled=True)
    P = laplacian_propagator(extended_laplacian(net))
    R, Rw = 2 * np.eye(2), 0.5 * np.eye(2)
    first = psi_integral(net, agent, R, Rw, 0.0, a, propagator=P)
    second = psi_integral(net, agent, R, Rw, a, a + b, propagator=P)
    whole = psi_integral(net, agent, R, Rw, 0.0, a + b, propagator=P)
    np.testing.assert_allclose(P(b) @ first @ P(b).T + second, whole, atol=1e-9)


def test_gram_stack_matches_individual():
    P = laplacian_propagator(extended_laplacian(reference_network()))
    rng = np.random.default_rng(3)
    S = np.array([(lambda a: a @ a.T)(rng.standard_normal((10, 10))) for _ in range(3)])
    together = gram_integral(P, S, 0.0, 2.0)
    for k in range(3):
        np.testing.assert_allclose(together[k], gram_integral(P, S[k], 0.0, 2.0), atol=1e-9)


def test_nonpositive_weight_rejected():
    with pytest.raises(ValidationError, match="positive definite"):
        psi_integral(reference_network(), 0, np.diag([1.0, 0.0]), np.eye(2), 0.0, 1.0)


# --- ordering ------------------------------------------------------------------------


def test_loewner_examples():
    assert loewner_leq(np.zeros((3, 3)), np.diag([1.0, 0.0, 2.0]))
    assert not loewner_leq(2 * np.eye(2), np.eye(2))
    assert loewner_leq(0.5 * np.eye(2), 2 * np.eye(2))


def test_loewner_singular_y_needs_range_inclusion():
    Y = np.diag([1.0, 0.0])
    assert loewner_leq(np.diag([0.5, 0.0]), Y)
    assert not loewner_leq(np.diag([0.5, 1e-3]), Y)


def test_loewner_rejects_indefinite_input():
    with pytest.raises(ValidationError):
        loewner_leq(np.diag([1.0, -1.0]), np.eye(2))


psd_pairs = st.tuples(st.integers(1, 6), st.integers(0, 2 ** 32 - 1), st.booleans())


@settings(max_examples=80, deadline=None)
@given(psd_pairs)
def test_loewner_agrees_with_eigenvalue_test(args):
    n, seed, ordered = args
    rng = np.random.default_rng(seed)
    A, C = rng.standard_normal((2, n, n))
    X = A @ A.T + 0.1 * np.eye(n)
    Y = X + C @ C.T + 0.05 * np.eye(n) if ordered else C @ C.T + 0.1 * np.eye(n)
    gap = np.min(np.linalg.eigvalsh(Y - X))
    if abs(gap) < 1e-6:
        return
    assert loewner_leq(X, Y) == (gap > 0)


def test_pinv_matches_numpy():
    A = np.random.default_rng(1).standard_normal((5, 3)) @ np.diag([1.0, 1e-3, 0.0]) @ np.eye(3)
    np.testing.assert_allclose(pinv_svd(A), np.linalg.pinv(A, rcond=1e-12), atol=1e-10)


# --- spectra and solves --------------------------------------------------------------


def test_spectrum_examples():
    assert spectrum_has_positive_real_parts(np.eye(3))
    assert not spectrum_has_positive_real_parts(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    s = reference_scenario(0.0, False, r=2.0, r_w=0.5)
    assert spectrum_has_positive_real_parts(assemble_game(s).H)
    assert min_real_eigenvalue(np.diag([3.0, -2.0])) == -2.0


def test_lu_solver_and_singular():
    A = np.array([[4.0, 1.0], [2.0, 3.0]])
    lu = LUSolver(A)
    np.testing.assert_allclose(lu.solve(np.array([1.0, 2.0])), np.linalg.solve(A, [1.0, 2.0]))
    assert lu.cond == pytest.approx(np.linalg.cond(A))
    with pytest.raises(NumericalError):
        LUSolver(np.zeros((2, 2))).solve(np.ones(2))


def test_rk4_exponential_is_fourth_order():
    errs = []
    for steps in (20, 40):
        y = rk4(lambda t, y: -y, np.array([1.0]), 0.0, 1.0 / steps, steps)
        errs.append(abs(y[-1, 0] - np.exp(-1.0)))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)
