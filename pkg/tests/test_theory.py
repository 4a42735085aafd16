import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from knockamp import theory
from knockamp.errors import NonMonotoneWarning, NotAchievable, SignedPriorRequired
from knockamp.se_core import MODELX, ORIGINAL, Prior, Regime, solve_state_evolution, soft_threshold

import oracles

FIG2 = Prior.two_point(0.1, 10.0)
FIG3 = Prior.two_point(0.1, 4.0)


def test_lc_curve_against_monte_carlo():
    sol = solve_state_evolution(FIG3, 1.0, 1.0, 1.0)
    rng = np.random.default_rng(3)
    n = 2_000_000
    pi = rng.choice([0.0, 4.0], size=n, p=[0.9, 0.1])
    b = np.abs(soft_threshold(pi + sol.tau * rng.standard_normal(n), sol.alpha * sol.tau))
    t = np.array([0.2, 1.0, 2.0])
    fdp, tpp, hat = theory.lc_model(FIG3, 1.0, 1.0, 1.0)(t)
    assert hat is None
    for k, tk in enumerate(t):
        sel = b >= tk
        emp_tpp = sel[pi != 0].mean()
        emp_fdp = (sel & (pi == 0)).sum() / sel.sum()
        assert abs(emp_tpp - tpp[k]) < 4e-3
        assert abs(emp_fdp - fdp[k]) < 4e-3


def test_lm_point_is_lasso_support_at_lambda():
    pt = theory.lm_point(FIG2, 0.5, 1.0, 2.0)
    sol = solve_state_evolution(FIG2, 0.5, 1.0, 2.0)
    null = 0.9 * 2 * norm.sf(sol.alpha)
    nonnull = norm.sf(sol.alpha - 10 / sol.tau) + norm.cdf(-sol.alpha - 10 / sol.tau)
    assert math.isclose(pt.tpp, nonnull, rel_tol=1e-12)
    assert math.isclose(pt.fdp, null / (null + 0.1 * nonnull), rel_tol=1e-12)


def test_lm_at_tpp_hits_target():
    pt = theory.lm_at_tpp(FIG2, 0.5, 1.0, 0.8)
    assert abs(pt.tpp - 0.8) < 1e-9


def test_lcd_tails_against_monte_carlo():
    alpha, tau = 1.2, 1.4
    t = np.array([0.1, 0.8, 2.0, 4.0])
    tails = theory.lcd_tail_probs(FIG3, alpha, tau, t)
    mc = oracles.lcd_monte_carlo(FIG3.values, FIG3.masses, alpha, tau, t)
    tol = 5 * np.sqrt(0.25 / mc["n"])
    for key in ("p_ge", "p_le_neg"):
        assert np.all(np.abs(getattr(tails, key) - mc[key]) < tol), key
    assert np.all(np.abs(tails.p_ge_nonnull - mc["p_ge_nonnull"]) < 5 * np.sqrt(0.25 / (0.1 * mc["n"])))
    assert np.all(np.abs(tails.p_ge_null - mc["p_ge_null"]) < 5 * np.sqrt(0.25 / (0.9 * mc["n"])))


def test_null_lcd_is_symmetric():
    t = np.geomspace(0.05, 5, 9)
    tails = theory.lcd_tail_probs(FIG3, 1.3, 0.9, t)
    assert np.allclose(tails.p_ge_null, tails.p_le_neg_null, atol=1e-12)


def test_lcd_tails_need_positive_t():
    with pytest.raises(ValueError):
        theory.lcd_tail_probs(FIG3, 1.0, 1.0, [0.0, 1.0])


@settings(deadline=None, max_examples=10)
@given(st.floats(0.05, 0.3), st.floats(2.0, 8.0), st.floats(0.5, 2.0), st.floats(0.5, 2.5))
def test_overestimation_identity(eps, M, delta, lam):
    prior = Prior.two_point(eps, M)
    m = theory.lcd_model(prior, delta, 1.0, lam)
    t = m.default_grid(40)
    fdp, _, hat = m(t)
    corr = theory.lcd_overestimate(prior, m.se.alpha, m.se.tau, t)
    assert np.allclose(hat - fdp, corr, atol=1e-8, rtol=0)
    assert np.all(hat >= fdp - 1e-15)


def test_counting_estimate_dominates_fdp():
    m = theory.counting_model(FIG2, 0.5, 1.0, 0.8, 0.3)
    fdp, _, hat = m(m.default_grid(50))
    assert np.all(hat >= fdp - 1e-15)


def test_counting_needs_positive_c():
    with pytest.raises(ValueError):
        theory.counting_curve(FIG2, 0.5, 1.0, 0.8, 0.0)


def test_invert_fdp_returns_crossing():
    m = theory.lc_model(FIG3, 1.0, 1.0, 1.0)
    t = theory.invert_fdp(m, 0.1)
    assert abs(m(t)[0][0] - 0.1) < 1e-9
    m2 = theory.lcd_model(FIG3, 1.0, 1.0, 1.0)
    t2 = theory.invert_fdp(m2, 0.1, use_hat=True)
    assert abs(m2(t2)[2][0] - 0.1) < 1e-9


def test_invert_fdp_edge_cases():
    m = theory.lc_model(FIG3, 1.0, 1.0, 1.0)
    assert theory.invert_fdp(m, 0.999) == theory.ZERO_PLUS
    with pytest.raises(NotAchievable):
        theory.invert_fdp(m, 1e-300, t_grid=np.linspace(0.1, 1.0, 10))
    with pytest.raises(ValueError):
        theory.invert_fdp(m, 0.1, use_hat=True)


def test_invert_fdp_warns_on_rising_curve():
    fake = theory.CurveModel("X", 1.0, None,
                             lambda t: (0.5 + 0.1 * np.sin(t), np.ones_like(t), None), 1.0)
    with pytest.warns(NonMonotoneWarning):
        theory.invert_fdp(fake, 0.45, t_grid=np.linspace(0.1, 6.0, 50))


def test_lambda_star_is_grid_argmin_of_tau():
    lam_star = theory.oracle_lambda_star(FIG3, 1.0, 1.0)
    grid = np.geomspace(lam_star / 1.5, lam_star * 1.5, 61)
    taus = [solve_state_evolution(FIG3, 1.0, 1.0, l).tau for l in grid]
    k = int(np.argmin(taus))
    assert grid[max(k - 1, 0)] <= lam_star <= grid[min(k + 1, len(grid) - 1)]


def test_cv_amp_is_argmin_of_tau_at_reduced_delta():
    K = 10
    sol = theory.cv_amp(FIG3, 1.0, 1.0, K)
    ref = theory.oracle_lambda_star(FIG3, (K - 1) / K, 1.0, MODELX)
    assert sol.residual < 1e-8
    assert abs(math.log(sol.lambda_cv / ref)) < 2e-3


def test_cv_amp_counting_matches_argmin():
    sol = theory.cv_amp(FIG2, 0.5, 1.0, 10, c=0.3)
    ref = theory.oracle_lambda_star(FIG2, 0.45, 1.0, Regime.counting(0.3))
    assert abs(math.log(sol.lambda_cv / ref)) < 2e-3


def test_cv_amp_approaches_modelx_optimum():
    a = theory.cv_amp(FIG3, 1.0, 1.0, 10_000).lambda_cv
    b = theory.oracle_lambda_star(FIG3, 1.0, 1.0, MODELX)
    assert abs(a / b - 1) < 1e-3


def test_cv_amp_rejects_small_k():
    with pytest.raises(ValueError):
        theory.cv_amp(FIG3, 1.0, 1.0, 1)


def test_sign_limits():
    with pytest.raises(SignedPriorRequired):
        theory.sign_limits(Prior.from_atoms([(-3.0, 0.1)]), 1.0, 1.0, 1.0, 1.0)
    fsp, tsp = theory.sign_limits(FIG3, 1.0, 1.0, 1.0, np.array([0.5, 1.5]))
    fdp, _, _ = theory.lcd_model(FIG3, 1.0, 1.0, 1.0)(np.array([0.5, 1.5]))
    assert np.allclose(fsp, fdp / 2)
    assert np.all((tsp >= 0) & (tsp <= 1))


def test_csv_layout():
    curves = [theory.lc_curve(FIG3, 1.0, 1.0, 1.0, [0.5, 1.0]),
              theory.lcd_curve(FIG3, 1.0, 1.0, 1.0, [0.5])]
    text = theory.write_curves_csv(curves)
    lines = text.strip().split("\n")
    assert lines[0] == "statistic,lambda,t,fdp,tpp,fdp_hat"
    assert lines[1].startswith("LassoCoef,1,0.5,") and lines[1].endswith(",")
    assert len(lines) == 4
    value = lines[3].split(",")[3]
    assert len(value.replace(".", "").lstrip("0")) <= 12
    buf = io.StringIO()
    theory.write_curves_csv(curves, buf)
    assert buf.getvalue() == text


def test_curve_grid_must_increase():
    with pytest.raises(ValueError):
        theory.lc_curve(FIG3, 1.0, 1.0, 1.0, [1.0, 0.5])


def test_curves_do_not_warn_on_default_grid():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for m in (theory.lc_model(FIG2, 0.5, 1.0, 0.7), theory.lcd_model(FIG2, 0.5, 1.0, 0.6)):
            theory.power_at_level(m, 0.1)
