"""Acceptance checks on the five-agent, two-topic reference network.

Every check runs at its stated tolerance.  The terminal summary prints one
PASS/FAIL line per criterion, with the measured numbers underneath.
"""
import warnings

import numpy as np
import pytest

from opinion_game.distributed import (
    closed_loop_simulate,
    estimator_fixed_point,
    hurwitz_margin,
    integrate_estimator,
    log_error_slope,
)
from opinion_game.errors import NumericalError
from opinion_game.experiment import run_baseline
from opinion_game.linalg import expm_scaled, loewner_leq
from opinion_game.ltv import (
    CommutativeFamily,
    PiecewisePolynomial,
    extended_eigenpairs,
    laplacian_family,
    spectral_propagator,
    spectral_transition,
)
from opinion_game.nash import (
    assemble_game,
    discrete_kkt_oracle,
    dynamics_rhs,
    inputs_at,
    nash_trajectory,
    stationarity_gradients,
    terminal_error,
    worst_case_cost,
)
from opinion_game.scenarios import REFERENCE_TABLES, SWEEP_R_W, reference_scenario
from opinion_game.social import assemble_social, total_terminal_error

CONFIGS = [(0.0, False), (0.0, True), (1.0, False), (1.0, True)]


def _fmt(v):
    return np.array2string(np.asarray(v), precision=5, separator=", ")


def _errors(s, g):
    return np.array([terminal_error(g, s, i) for i in range(s.network.n)])


def _social_error(s, propagator=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return total_terminal_error(assemble_social(s, propagator), s)
        except NumericalError:
            return None


def _table_mismatch(E, E_o, table):
    """Worst relative deviation and worst ratio (either direction) from a table row."""
    ref = np.append(table["E"], table["E_o"])
    got = np.append(E, np.nan if E_o is None else E_o)
    rel = np.abs(got - ref) / np.abs(ref)
    ratio = np.maximum(got / ref, ref / got)
    return float(np.nanmax(rel) if E_o is not None else np.inf), float(
        np.max(ratio) if E_o is not None else np.inf)


def _sweep_vs_table(grid, config):
    table = REFERENCE_TABLES[config]
    rows = []
    for r_w in SWEEP_R_W:
        s, g = grid[config + (r_w,)]
        E, E_o = _errors(s, g), _social_error(s)
        rel, ratio = _table_mismatch(E, E_o, table)
        rows.append((r_w, E, E_o, rel, ratio))
    return table, rows


# --- 1, 2: uncontrolled dynamics --------------------------------------------------


@pytest.mark.acceptance("1", "baseline consensus at the initial average (W_ij = I)")
def test_baseline_consensus(record_property):
    s = reference_scenario(0.0, False)
    x = run_baseline(s).x[-1].reshape(5, 2)
    dev = float(np.max(np.abs(x - np.array([3.0, 3.2]))))
    record_property("max deviation from [3, 3.2]", f"{dev:.3e} (tol 1e-2)")
    assert dev <= 1e-2


@pytest.mark.acceptance("2", "partial consensus with coupled topics")
def test_partial_consensus(record_property):
    s = reference_scenario(0.0, True)
    x = run_baseline(s).x[-1].reshape(5, 2)
    gap15 = float(np.max(np.abs(x[0] - x[4])))
    spread = max(float(np.max(np.abs(x[a] - x[b]))) for a in range(5) for b in range(a + 1, 5))
    record_property("agents 1,5 gap", f"{gap15:.3e} (tol 1e-2)")
    record_property("largest pairwise gap", f"{spread:.3e} (needs > 1e-1)")
    assert gap15 <= 1e-2 and spread > 1e-1


# --- 3: tables ---------------------------------------------------------------------


@pytest.mark.acceptance("3a", "near-consensus reference errors within a factor of 3 in some sweep cell")
@pytest.mark.parametrize("config", [(0.0, False), (0.0, True)], ids=["unrelated", "coupled"])
def test_tables_near_consensus(grid, config, record_property):
    table, rows = _sweep_vs_table(grid, config)
    best = min(rows, key=lambda r: r[4])
    for r_w, E, E_o, rel, ratio in rows:
        record_property(f"{config} r_w={r_w}", f"E={_fmt(E)} E_o={E_o:.5g} worst ratio {ratio:.3f}")
    record_property(f"{config} best", f"r_w={best[0]} worst ratio {best[4]:.3f} (limit 3)")
    assert best[4] <= 3.0


@pytest.mark.acceptance("3b", "stubborn unrelated-topics reference errors within 5% in some sweep cell")
def test_table_stubborn_unrelated(grid, record_property):
    _check_stubborn_table(grid, (1.0, False), record_property)


@pytest.mark.acceptance("3c", "stubborn coupled-topics reference errors within 5% in some sweep cell")
def test_table_stubborn_coupled(grid, record_property):
    _check_stubborn_table(grid, (1.0, True), record_property)


def _check_stubborn_table(grid, config, record_property):
    table, rows = _sweep_vs_table(grid, config)
    for r_w, E, E_o, rel, _ in rows:
        eo = "n/a (social system singular)" if E_o is None else f"{E_o:.5g}"
        record_property(f"r_w={r_w}", f"E={_fmt(E)} E_o={eo} worst rel {rel:.3g}")
    record_property("table", f"E={_fmt(table['E'])} E_o={table['E_o']}")
    best = min(r[3] for r in rows)
    record_property("best worst-relative deviation", f"{best:.3g} (tol 0.05)")
    assert best <= 0.05


@pytest.mark.acceptance("3d", "distributed errors match same-cell E_i to 4 decimals (stubborn configurations)")
def test_distributed_matches_nash(grid, record_property):
    ok = True
    for config in [(1.0, False), (1.0, True)]:
        _, rows = _sweep_vs_table(grid, config)
        for r_w, *_ in sorted(rows, key=lambda r: r[3]):
            s, g = grid[config + (r_w,)]
            if hurwitz_margin(s, g) <= 1e-9:
                record_property(f"{config} r_w={r_w}", "estimator not Hurwitz, cell skipped")
                continue
            E = _errors(s, g)
            E_hat = np.array(closed_loop_simulate(s, g).E_hat)
            gap = float(np.max(np.abs(E_hat - E)))
            record_property(f"{config} r_w={r_w}",
                            f"E={_fmt(E)} E_hat={_fmt(E_hat)} max gap {gap:.2e} (tol 5e-5)")
            ok &= gap < 5e-5
    assert ok


# --- 4, 5, 6: closed form vs independent checks ----------------------------------


@pytest.mark.acceptance("4", "discrete KKT oracle at 2000 steps matches the closed form")
def test_oracle_equivalence(grid, record_property):
    ok = True
    for key, (s, g) in grid.items():
        tr = nash_trajectory(g, s, 2000)
        o = discrete_kkt_oracle(s, 2000)
        ex = float(np.max(np.abs(o.x - tr.x)) / np.max(np.abs(tr.x)))
        u, _ = inputs_at(g, s, o.control_times)
        U, Uo = np.hstack(u), np.hstack(o.u)
        eu = float(np.linalg.norm(Uo - U) / np.linalg.norm(U))
        passed = ex <= 5e-3 and eu <= 1e-2
        record_property(str(key), f"x sup rel {ex:.2e} (tol 5e-3), u L2 rel {eu:.2e} (tol 1e-2)"
                                  f"{'' if passed else '  <-- FAIL'}")
        ok &= passed
    assert ok


@pytest.mark.acceptance("5", "finite-difference stationarity of every J_i at the equilibrium")
def test_stationarity(grid, record_property):
    worst = 0.0
    for key, (s, g) in grid.items():
        st = stationarity_gradients(g, s)
        cell = max(max(st["u"]), max(st["w"]))
        record_property(str(key), f"u {max(st['u']):.2e}, w {max(st['w']):.2e}")
        worst = max(worst, cell)
    record_property("worst", f"{worst:.2e} (tol 1e-4)")
    assert worst <= 1e-4


@pytest.mark.acceptance("6", "centred-difference dynamics residual at dt = t_f/4000")
def test_dynamics_residual(grid, record_property):
    worst5 = worst3 = 0.0
    for key, (s, g) in grid.items():
        tr = nash_trajectory(g, s, 4000)
        X, dt = tr.x, s.t_f / 4000
        u, w = tr.u, tr.w
        d5 = (-X[4:] + 8 * X[3:-1] - 8 * X[1:-3] + X[:-4]) / (12 * dt)
        r5 = dynamics_rhs(s, g.L, X[2:-2], [a[2:-2] for a in u], [b[2:-2] for b in w])
        d3 = (X[2:] - X[:-2]) / (2 * dt)
        r3 = dynamics_rhs(s, g.L, X[1:-1], [a[1:-1] for a in u], [b[1:-1] for b in w])
        e5, e3 = float(np.max(np.abs(d5 - r5))), float(np.max(np.abs(d3 - r3)))
        record_property(str(key), f"5-point {e5:.2e}, 3-point {e3:.2e}")
        worst5, worst3 = max(worst5, e5), max(worst3, e3)
    record_property("worst", f"5-point {worst5:.2e} (tol 1e-4); 3-point {worst3:.2e} (informational)")
    assert worst5 <= 1e-4


# --- 7: estimator ----------------------------------------------------------------------


@pytest.mark.acceptance("7", "estimator fixed point, decay rate and reference-run contraction")
def test_estimator_convergence(grid, record_property):
    ok = True
    fp_worst = 0.0
    for key, (s, g) in grid.items():
        fp_worst = max(fp_worst, float(np.max(np.abs(estimator_fixed_point(s, g) - g.x_tf))))
    record_property("fixed point max |x* - H^-1 G x0|", f"{fp_worst:.2e} (tol 1e-9)")
    ok &= fp_worst <= 1e-9

    for key, (s, g) in grid.items():
        margin = hurwitz_margin(s, g)
        if margin <= 1e-9:
            record_property(f"slope {key}", f"margin {margin:.3f}: not Hurwitz, convergence premise fails")
            continue
        run = integrate_estimator(s, g, horizon=20.0 / margin, steps=4000)
        slope = log_error_slope(run.times, run.x_hat, g.x_tf)
        rel = abs(slope + margin) / margin
        record_property(f"slope {key}", f"{slope:.4f} vs {-margin:.4f}, rel {rel:.2e} (tol 0.15)")
        ok &= rel <= 0.15

    for config in CONFIGS:
        s, g = grid[config + (2.0,)]
        run = integrate_estimator(s, g)
        k = int(np.argmin(np.abs(run.times - 10.0)))
        ratio = float(np.linalg.norm(run.x_hat[k] - g.x_tf) / np.linalg.norm(run.x_hat[0] - g.x_tf))
        record_property(f"contraction {config} r_w=2", f"{ratio:.2e} at t=10 (tol 1e-2)")
        ok &= ratio <= 1e-2
    assert ok


# --- 8: degenerate inputs --------------------------------------------------------------


@pytest.mark.acceptance("8", "degenerate-case battery")
def test_degenerate_cases(grid, record_property):
    ok = True
    worst_psi = worst_x = 0.0
    for config in CONFIGS:
        s, g = grid[config + (2.0,)]          # r_w == r == 2
        worst_psi = max(worst_psi, max(float(np.max(np.abs(p))) for p in g.psi))
        worst_x = max(worst_x, float(np.max(np.abs(g.x_tf - g.phi @ s.x0))))
        ok &= np.array_equal(g.H, np.eye(10))
    record_property("r_w = r", f"max |Psi| {worst_psi:.1e}, max |x_tf - Phi x0| {worst_x:.1e} (tol 1e-10)")
    ok &= worst_psi <= 1e-10 and worst_x <= 1e-10

    zero_worst = 0.0
    for key, (s, _) in grid.items():
        z = s.with_x0(np.zeros(10))
        gz = assemble_game(z)
        tr = nash_trajectory(gz, z, 200)
        vals = [np.max(np.abs(gz.x_tf)), np.max(np.abs(tr.x)),
                max(np.max(np.abs(a)) for a in tr.u), max(np.max(np.abs(b)) for b in tr.w),
                max(abs(terminal_error(gz, z, i)) for i in range(5)),
                max(abs(worst_case_cost(gz, z, i)) for i in range(5))]
        zero_worst = max(zero_worst, float(max(vals)))
    record_property("x0 = 0", f"largest output magnitude {zero_worst:.1e}")
    ok &= zero_worst == 0.0

    cons_worst = 0.0
    for key, (s, _) in grid.items():
        if key[0] != 0.0:
            continue
        c = s.with_x0(np.tile([2.5, -1.0], 5))
        gc = assemble_game(c)
        tr = nash_trajectory(gc, c, 200)
        cons_worst = max(cons_worst, max(float(np.max(np.abs(a))) for a in tr.u))
    record_property("consensus x0, W_ii = 0", f"max |u| {cons_worst:.1e} (tol 1e-10)")
    ok &= cons_worst <= 1e-10
    assert ok


# --- 9: spectral transition matrices ----------------------------------------------------


@pytest.mark.acceptance("9", "spectral transition matrix agrees with the matrix exponential")
def test_spectral_cross_check(grid, record_property):
    s, g = grid[(1.0, False, 2.0)]
    pairs = extended_eigenpairs(laplacian_family(g.L))
    lap = max(float(np.max(np.abs(spectral_transition(pairs, 0.0, t) - expm_scaled(-t * g.L))))
              for t in (0.1, 1.0, 5.0, 10.0))
    rng = np.random.default_rng(20240611)
    rand = 0.0
    for _ in range(20):
        A = rng.standard_normal((10, 10))
        A = 0.5 * (A + A.T)
        p = extended_eigenpairs(CommutativeFamily(A, PiecewisePolynomial.constant(1.0)))
        rand = max(rand, float(np.max(np.abs(spectral_transition(p, 0.0, 1.0) - expm_scaled(A)))))
    record_property("reference Laplacian", f"{lap:.1e} (tol 1e-8)")
    record_property("20 random symmetric 10x10", f"{rand:.1e} (tol 1e-8)")

    swap = 0.0
    for r_w in SWEEP_R_W:
        s, g = grid[(1.0, False, r_w)]
        prop = spectral_propagator(extended_eigenpairs(laplacian_family(g.L)))
        g2 = assemble_game(s, propagator=prop)
        a, b = list(_errors(s, g)), list(_errors(s, g2))
        eo1, eo2 = _social_error(s), _social_error(s, prop)
        if eo1 is not None and eo2 is not None:
            a.append(eo1)
            b.append(eo2)
        if hurwitz_margin(s, g) > 1e-9:
            a += list(integrate_estimator(s, g).x_hat[-1])
            b += list(integrate_estimator(s, g2).x_hat[-1])
        a, b = np.array(a), np.array(b)
        swap = max(swap, float(np.max(np.abs(a - b) / np.abs(a))))
    record_property("pipeline swap, stubborn unrelated cells", f"{swap:.1e} relative (tol 1e-7)")
    assert lap <= 1e-8 and rand <= 1e-8 and swap <= 1e-7


# --- 10: ordering and spectrum ---------------------------------------------------------


@pytest.mark.acceptance("10a", "loewner_leq agrees with direct PSD-difference testing")
def test_loewner_random_pairs(record_property):
    rng = np.random.default_rng(7)
    agree, n_true = 0, 0
    for k in range(100):
        n = int(rng.integers(2, 7))
        A = rng.standard_normal((n, n))
        X = A @ A.T + 0.1 * np.eye(n)
        if k % 2 == 0:
            C = rng.standard_normal((n, n))
            Y = X + C @ C.T + 0.05 * np.eye(n)
        else:
            C = rng.standard_normal((n, n))
            Y = C @ C.T + 0.1 * np.eye(n)
        direct = bool(np.min(np.linalg.eigvalsh(Y - X)) >= -1e-9)
        n_true += direct
        agree += loewner_leq(X, Y) == direct
    record_property("agreement", f"{agree}/100 ({n_true} ordered pairs)")
    assert agree == 100


@pytest.mark.acceptance("10b", "H(t_f) spectrum in the open right half plane where Loewner dominance holds")
def test_h_spectrum(grid, record_property):
    ok = True
    for key, (s, g) in grid.items():
        if not all(g.dominated):
            record_property(str(key), "assumption violated, skipped")
            continue
        lo = float(np.min(np.linalg.eigvals(g.H).real))
        record_property(str(key), f"min Re eig(H) {lo:.4g}{'' if lo > 0 else '  <-- FAIL'}")
        ok &= lo > 0
    assert ok
