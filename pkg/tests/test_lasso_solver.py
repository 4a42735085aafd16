import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knockamp import lasso_solver as ls
from knockamp.errors import DimensionMismatch, NonConvergence
from knockamp.se_core import Prior

import oracles

BACKENDS = sorted(ls._KERNELS)


def small_problem(seed, n=20, m=3, sigma=0.5):
    rng = np.random.default_rng(seed)
    X = ls.generate_design(n, m, rng).entries
    beta = rng.normal(size=m) * rng.integers(0, 2, size=m) * 2
    return X, X @ beta + sigma * rng.standard_normal(n)


@pytest.mark.parametrize("backend", BACKENDS)
@settings(deadline=None, max_examples=40)
@given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0.01, 2.0))
def test_matches_sign_enumeration(backend, seed, m, lam):
    X, Y = small_problem(seed, m=m)
    fit = ls.lasso_solve(X, Y, lam, backend=backend)
    ref, ref_obj = oracles.lasso_enumerate(X, Y, lam)
    assert np.abs(fit.coefficients - ref).max() < 1e-8
    assert abs(fit.objective - ref_obj) < 1e-8
    assert fit.kkt_violation <= ls.kkt_tolerance(X, Y)


def test_backends_agree_on_larger_problem():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(5)
    X = ls.generate_design(80, 150, rng)
    beta = ls.sample_signal(Prior.two_point(0.1, 3.0), 150, rng)
    Y = ls.simulate_response(X, beta, 1.0, rng)
    a = ls.lasso_solve(X, Y, 0.4, backend="cython")
    b = ls.lasso_solve(X, Y, 0.4, backend="python")
    assert np.abs(a.coefficients - b.coefficients).max() < 1e-9


def test_zero_above_lambda_max():
    X, Y = small_problem(1, n=30, m=10)
    top = ls.lambda_max(X, Y)
    assert not ls.lasso_solve(X, Y, top * 1.0001).coefficients.any()
    assert ls.lasso_solve(X, Y, top * 0.9).coefficients.any()


def test_kkt_violation_detects_wrong_answer():
    X, Y = small_problem(2, n=30, m=5)
    fit = ls.lasso_solve(X, Y, 0.3)
    bad = fit.coefficients + 0.1
    assert ls.kkt_violation(X, Y, bad, 0.3) > ls.kkt_tolerance(X, Y)


def test_warm_start_gives_same_solution():
    X, Y = small_problem(3, n=40, m=60)
    cold = ls.lasso_solve(X, Y, 0.2)
    warm = ls.lasso_solve(X, Y, 0.2, warm_start=ls.lasso_solve(X, Y, 0.5))
    assert np.abs(cold.coefficients - warm.coefficients).max() < 1e-8


def test_sweep_cap_raises():
    X, Y = small_problem(4, n=40, m=60)
    with pytest.raises(NonConvergence):
        ls.lasso_solve(X, Y, 0.05, max_sweeps=1)


def test_rejects_bad_input():
    X, Y = small_problem(5)
    with pytest.raises(ValueError):
        ls.lasso_solve(X, Y, 0.0)
    with pytest.raises(DimensionMismatch):
        ls.lasso_solve(X, Y[:-1], 0.1)
    with pytest.raises(DimensionMismatch):
        ls.simulate_response(X, np.zeros(4), 1.0)


def test_path_requires_decreasing_grid_and_warm_starts():
    X, Y = small_problem(6, n=40, m=30)
    with pytest.raises(ValueError):
        ls.lasso_path(X, Y, [0.1, 0.2])
    grid = ls.path_grid(X, Y, 20, 0.05)
    assert np.all(np.diff(grid) < 0)
    path = ls.lasso_path(X, Y, grid)
    for fit in path:
        assert fit.kkt_violation <= ls.kkt_tolerance(X, Y)


def test_lasso_max_statistic():
    X, Y = small_problem(7, n=40, m=30)
    grid = ls.path_grid(X, Y, 30, 0.05)
    path = ls.lasso_path(X, Y, grid)
    stat = ls.lasso_max_stat(path)
    coefs = np.array([f.coefficients for f in path])
    for j in range(30):
        nz = np.flatnonzero(coefs[:, j])
        assert stat[j] == (grid[nz[0]] if len(nz) else 0.0)
    # the first variable to enter sits at the top of the grid or just below it
    assert stat.max() <= grid[0]


def test_design_distribution_and_determinism():
    a = ls.generate_design(400, 300, 9)
    b = ls.generate_design(400, 300, 9)
    assert np.array_equal(a.entries, b.entries)
    assert a.entries.flags.f_contiguous
    var = a.entries.var()
    assert abs(var * 400 - 1) < 4 * np.sqrt(2 / a.entries.size)


def test_signal_follows_prior():
    s = ls.sample_signal(Prior.two_point(0.1, 4.0), 100_000, 0)
    frac = (s.values != 0).mean()
    assert abs(frac - 0.1) < 4 * np.sqrt(0.09 / 100_000)
    assert set(np.unique(s.values)) == {0.0, 4.0}
    assert np.array_equal(s.support, np.flatnonzero(s.values))


def test_python_fallback_selected_by_environment():
    code = "from knockamp import lasso_solver as ls; print(ls.BACKEND)"
    env = dict(os.environ, KNOCKAMP_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
