"""Gaussian designs, signal sampling and Lasso fits.

The objective is ``0.5 ||Y - X b||^2 + lam ||b||_1`` with no ``1/n`` factor,
which is the scaling the state-evolution calibration assumes. The inner loop
runs in the compiled ``_cd`` extension when it is importable; set
``KNOCKAMP_BACKEND=python`` to force the pure-Python kernel.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonConvergence
from .se_core import Prior
from . import _cd_py

try:
    from . import _cd as _cd_compiled
except ImportError:  # extension not built
    _cd_compiled = None

_KERNELS = {"python": _cd_py.cd_lasso}
if _cd_compiled is not None:
    _KERNELS["cython"] = _cd_compiled.cd_lasso

BACKEND = os.environ.get("KNOCKAMP_BACKEND", "cython" if _cd_compiled is not None else "python")
if BACKEND not in _KERNELS:
    BACKEND = "python"

TOL = 1e-10
MAX_SWEEPS = 100_000
# sweeps between attempts to jump to the exact solution on the current active set
POLISH_EVERY = 50


@dataclass(frozen=True)
class DesignMatrix:
    """``n x m`` matrix with i.i.d. ``N(0, 1/n)`` entries, stored column-major."""

    entries: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class SignalVector:
    values: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)


@dataclass(frozen=True)
class LassoFit:
    coefficients: np.ndarray
    lam: float
    objective: float
    kkt_violation: float
    sweeps: int = 0


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def generate_design(n: int, m: int, seed=None) -> DesignMatrix:
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = _rng(seed)
    # drawing the transpose gives Fortran order without a copy
    entries = rng.standard_normal((m, n)).T / np.sqrt(n)
    return DesignMatrix(entries, seed if isinstance(seed, (int, np.integer)) else None)


def sample_signal(prior: Prior, p: int, seed=None) -> SignalVector:
    rng = _rng(seed)
    v, w = prior.arrays
    return SignalVector(v[rng.choice(len(v), size=p, p=w)])


def simulate_response(X, beta, sigma: float, seed=None) -> np.ndarray:
    X = _entries(X)
    beta = np.asarray(getattr(beta, "values", beta), dtype=float)
    if X.shape[1] != beta.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[1]} columns but beta has length {beta.shape[0]}")
    noise = _rng(seed).standard_normal(X.shape[0])
    return X @ beta + sigma * noise


def _entries(X) -> np.ndarray:
    return X.entries if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)


def objective(X, Y, beta, lam: float) -> float:
    X = _entries(X)
    r = Y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def kkt_violation(X, Y, beta, lam: float) -> float:
    """Largest departure from the Lasso optimality conditions.

    On the support ``X_j^T r`` must equal ``lam * sign(beta_j)``; off the
    support ``|X_j^T r| <= lam``.
    """
    X = _entries(X)
    g = X.T @ (Y - X @ beta)
    on = beta != 0
    v_on = np.abs(g[on] - lam * np.sign(beta[on]))
    v_off = np.maximum(np.abs(g[~on]) - lam, 0.0)
    return float(max(v_on.max(initial=0.0), v_off.max(initial=0.0)))


def kkt_tolerance(X, Y) -> float:
    return 1e-6 * max(1.0, float(np.abs(_entries(X).T @ Y).max()))


def coordinate_descent(X, Y, lam: float, beta0=None, tol: float = TOL,
                       max_sweeps: int = MAX_SWEEPS, backend: str | None = None):
    """Raw solver call: returns ``(beta, sweeps, converged)`` without certification."""
    X = np.asfortranarray(_entries(X))
    Y = np.ascontiguousarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch("X and Y disagree on the number of rows")
    beta = np.zeros(X.shape[1]) if beta0 is None else np.array(beta0, dtype=float)
    if beta.shape != (X.shape[1],):
        raise DimensionMismatch("warm start has the wrong length")
    resid = Y - X @ beta
    col_sq = np.einsum("ij,ij->j", X, X)
    kernel = _KERNELS[backend or BACKEND]
    sweeps, converged = 0, False
    while not converged and sweeps < max_sweeps:
        budget = min(POLISH_EVERY, max_sweeps - sweeps)
        done, converged = kernel(X, beta, resid, col_sq, float(lam), float(tol), int(budget))
        sweeps += int(done)
        if not converged and _polish(X, Y, beta, lam):
            resid = Y - X @ beta
    return beta, int(sweeps), bool(converged)


def _polish(X, Y, beta, lam) -> bool:
    """Replace ``beta`` by the exact minimiser on its current support and signs.

    Only accepted when the signs are reproduced; coordinate descent then
    confirms (or undoes) the step, so correctness never rests on it.
    """
    act = np.flatnonzero(beta)
    if len(act) == 0 or len(act) >= X.shape[0]:
        return False
    XA = X[:, act]
    s = np.sign(beta[act])
    try:
        b = np.linalg.solve(XA.T @ XA, XA.T @ Y - lam * s)
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.sign(b) == s):
        return False
    beta[act] = b
    return True


def lasso_solve(X, Y, lam: float, warm_start=None, tol: float = TOL,
                max_sweeps: int = MAX_SWEEPS, backend: str | None = None) -> LassoFit:
    """Minimise the Lasso objective by cyclic coordinate descent and certify KKT."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    X = _entries(X)
    Y = np.asarray(Y, dtype=float)
    beta0 = warm_start.coefficients if isinstance(warm_start, LassoFit) else warm_start
    beta, sweeps, converged = coordinate_descent(X, Y, lam, beta0, tol, max_sweeps, backend)
    if not converged:
        raise NonConvergence(f"coordinate descent hit {max_sweeps} sweeps at lambda={lam:g}")
    viol = kkt_violation(X, Y, beta, lam)
    if viol > kkt_tolerance(X, Y):
        raise NonConvergence(f"KKT violation {viol:.3g} at lambda={lam:g}")
    return LassoFit(beta, float(lam), objective(X, Y, beta, lam), viol, sweeps)


def lambda_max(X, Y) -> float:
    """Smallest penalty at which the solution is identically zero."""
    return float(np.abs(_entries(X).T @ np.asarray(Y, dtype=float)).max())


def path_grid(X, Y, n_lambdas: int = 100, ratio: float = 1e-3) -> np.ndarray:
    """Geometric grid from ``||X^T Y||_inf`` down to ``ratio`` times that."""
    top = lambda_max(X, Y)
    return np.geomspace(top, ratio * top, n_lambdas)


def lasso_path(X, Y, lambdas: Sequence[float], **kwargs) -> list[LassoFit]:
    """Warm-started fits along a strictly decreasing grid."""
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda grid must be positive and strictly decreasing")
    fits = []
    warm = None
    for lam in lambdas:
        fit = lasso_solve(X, Y, lam, warm, **kwargs)
        fits.append(fit)
        warm = fit
    return fits


def lasso_max_stat(path: Sequence[LassoFit]) -> np.ndarray:
    """Largest grid penalty at which each coefficient is nonzero (0 if never)."""
    coefs = np.array([f.coefficients for f in path])
    lams = np.array([f.lam for f in path])
    nz = coefs != 0
    # path is ordered by decreasing lambda, so the first nonzero entry is the largest
    first = np.argmax(nz, axis=0)
    return np.where(nz.any(axis=0), lams[first], 0.0)
