"""Quick invariant suite behind ``knockamp selftest``."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.stats import norm

from . import knockoffs as ko
from . import lasso_solver as ls
from . import theory
from .se_core import (
    MODELX,
    Prior,
    Regime,
    alpha_min,
    effective_problem,
    mse_expectation,
    se_residual,
    solve_state_evolution,
    state_evolution_map,
)


def _alpha_min_root():
    d = 0.5
    a = alpha_min(d)
    return abs((1 + a * a) * norm.cdf(-a) - a * norm.pdf(a) - d / 2) < 1e-10


def _mse_closed_vs_quad():
    prior = Prior.from_atoms([(3.0, 0.1), (-1.5, 0.05)])
    return abs(mse_expectation(prior, 1.3, 0.8) - mse_expectation(prior, 1.3, 0.8, "quad")) < 1e-9


def _se_residual():
    prior = Prior.two_point(0.1, 4.0)
    sol = solve_state_evolution(prior, 0.8, 1.0, 1.0)
    return sol.residual < 1e-6 and se_residual(prior, 0.8, 1.0, 1.0, sol.alpha, sol.tau) < 1e-6


def _modelx_reduction():
    prior = Prior.two_point(0.2, 3.0)
    p2, d2 = effective_problem(prior, 1.0, MODELX)
    direct = state_evolution_map(prior, 1.0, 1.0, 1.5, 1.2, MODELX)
    reduced = state_evolution_map(p2, d2, 1.0, 1.5, 1.2)
    return max(abs(a - b) for a, b in zip(direct, reduced)) < 1e-12


def _overestimate_identity():
    prior = Prior.two_point(0.1, 4.0)
    m = theory.lcd_model(prior, 1.0, 1.0, 1.0)
    t = np.array([0.2, 1.0, 2.5])
    fdp, _, hat = m(t)
    corr = theory.lcd_overestimate(prior, m.se.alpha, m.se.tau, t)
    return np.allclose(hat - fdp, corr, atol=1e-8, rtol=0) and np.all(hat >= fdp)


def _knockoff_rule():
    sel = ko.knockoff_threshold(np.array([3.0, -1.0, 2.0, -2.0, 5.0]), 0.5)
    return sel.threshold == 3.0 and list(sel.indices) == [0, 4]


def _lasso_kkt():
    rng = np.random.default_rng(0)
    X = ls.generate_design(40, 60, rng)
    beta = np.zeros(60)
    beta[:5] = 3.0
    Y = ls.simulate_response(X, beta, 0.5, rng)
    fit = ls.lasso_solve(X, Y, 0.5)
    return fit.kkt_violation <= ls.kkt_tolerance(X.entries, Y)


def _backends_agree():
    if len(ls._KERNELS) < 2:
        return True
    rng = np.random.default_rng(1)
    X = ls.generate_design(30, 50, rng)
    Y = rng.standard_normal(30)
    a = ls.lasso_solve(X, Y, 0.3, backend="python").coefficients
    b = ls.lasso_solve(X, Y, 0.3, backend="cython").coefficients
    return float(np.abs(a - b).max()) < 1e-8


def _counting_reduction():
    prior = Prior.two_point(0.1, 5.0)
    p2, d2 = effective_problem(prior, 1.0, Regime.counting(0.3))
    return math.isclose(p2.eps, 0.1 / 1.3, rel_tol=1e-12) and math.isclose(d2, 1 / 1.3, rel_tol=1e-12)


CHECKS: dict[str, Callable[[], bool]] = {
    "alpha_min solves its defining equation": _alpha_min_root,
    "closed-form MSE matches quadrature": _mse_closed_vs_quad,
    "state evolution residual": _se_residual,
    "Model-X reduction is exact": _modelx_reduction,
    "counting reduction weights": _counting_reduction,
    "fdp_hat over-estimation identity": _overestimate_identity,
    "knockoff threshold rule": _knockoff_rule,
    "Lasso KKT certificate": _lasso_kkt,
    "compiled and Python kernels agree": _backends_agree,
}


def run(out=print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            passed = bool(check())
        except Exception as exc:  # report and keep going
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
