"""Soft-thresholding expectations and AMP state-evolution solvers.

The Lasso fixed point on an ``n x m`` Gaussian design with ``delta = n / m`` is
described by the pair ``(alpha, tau)`` solving::

    tau^2  = sigma^2 + E[(eta_{alpha tau}(Pi + tau Z) - Pi)^2] / delta
    lambda = (1 - P(|Pi + tau Z| >= alpha tau) / delta) * alpha * tau

Augmented designs (Model-X knockoffs, a shared pool of counting knockoffs, and
the training folds of K-fold cross-validation) reduce to the same system with
a diluted prior and a smaller ``delta``; see :func:`effective_problem`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr

from .errors import NoSolution, NonConvergence

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Prior:
    """Finite discrete mixture ``(1 - eps) delta_0 + eps Pi*``.

    ``values`` and ``masses`` are parallel tuples; exactly one value is 0.
    """

    values: tuple[float, ...]
    masses: tuple[float, ...]
    _checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        if len(self.values) != len(self.masses) or not self.values:
            raise ValueError("values and masses must be nonempty and of equal length")
        if any(not (0.0 < m <= 1.0) for m in self.masses):
            raise ValueError("atom masses must lie in (0, 1]")
        if abs(math.fsum(self.masses) - 1.0) > 1e-12:
            raise ValueError("atom masses must sum to 1")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("atom values must be finite")
        zeros = [i for i, v in enumerate(self.values) if v == 0.0]
        if len(zeros) != 1:
            raise ValueError("exactly one atom must sit at 0")
        if self._checked and not (0.0 < self.masses[zeros[0]] < 1.0):
            raise ValueError("the zero atom must carry mass in (0, 1)")

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "Prior":
        """Build from ``(value, mass)`` pairs; a missing zero atom gets the leftover mass."""
        atoms = [(float(v), float(m)) for v, m in atoms]
        if not any(v == 0.0 for v, _ in atoms):
            rest = 1.0 - math.fsum(m for _, m in atoms)
            atoms.append((0.0, rest))
        return cls(tuple(v for v, _ in atoms), tuple(m for _, m in atoms))

    @classmethod
    def two_point(cls, eps: float, M: float) -> "Prior":
        """Mass ``1 - eps`` at zero and ``eps`` at ``M``."""
        return cls((0.0, float(M)), (1.0 - eps, float(eps)))

    @classmethod
    def null_only(cls) -> "Prior":
        """Point mass at zero. Degenerate; meant for checks of the null terms."""
        return cls((0.0,), (1.0,), _checked=False)

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.values), np.asarray(self.masses)

    @property
    def eps(self) -> float:
        return 1.0 - self.zero_mass

    @property
    def zero_mass(self) -> float:
        return self.masses[self.values.index(0.0)]

    @cached_property
    def nonnull(self) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero atoms with masses renormalised to sum to one (the law of Pi*)."""
        v, w = self.arrays
        keep = v != 0.0
        if not keep.any():
            return np.empty(0), np.empty(0)
        return v[keep], w[keep] / w[keep].sum()

    def second_moment(self) -> float:
        v, w = self.arrays
        return float(np.dot(w, v * v))

    def dilute(self, factor: float) -> "Prior":
        """Scale every nonzero mass by ``factor`` and move the remainder to zero."""
        vals, masses = [], []
        for v, m in zip(self.values, self.masses):
            if v != 0.0:
                vals.append(v)
                masses.append(m * factor)
        vals.append(0.0)
        masses.append(1.0 - math.fsum(masses))
        return Prior(tuple(vals), tuple(masses), _checked=self._checked)


@dataclass(frozen=True)
class Regime:
    """Which design the Lasso is fitted on.

    ``kind`` is one of ``original``, ``modelx``, ``counting`` (needs ``c``) or
    ``cv`` (needs ``K``; sits on top of Model-X, or on top of counting
    knockoffs when ``c`` is also given).
    """

    kind: str
    c: float | None = None
    K: int | None = None

    def __post_init__(self):
        if self.kind not in ("original", "modelx", "counting", "cv"):
            raise ValueError(f"unknown regime kind {self.kind!r}")
        if self.kind == "counting" and not (self.c is not None and 0 < self.c < math.inf):
            raise ValueError("counting regime needs a positive finite ratio c")
        if self.kind == "cv" and not (self.K is not None and self.K >= 2):
            raise ValueError("cv regime needs K >= 2")

    @classmethod
    def counting(cls, c: float) -> "Regime":
        return cls("counting", c=float(c))

    @classmethod
    def cv(cls, K: int, c: float | None = None) -> "Regime":
        return cls("cv", c=None if c is None else float(c), K=int(K))

    @property
    def base(self) -> "Regime":
        """For ``cv``, the augmentation the folds are cut from."""
        if self.kind != "cv":
            return self
        return COUNTING(self.c) if self.c is not None else MODELX

    def __str__(self):
        if self.kind == "counting":
            return f"counting(c={self.c:g})"
        if self.kind == "cv":
            return f"cv(K={self.K}, base={self.base})"
        return self.kind


ORIGINAL = Regime("original")
MODELX = Regime("modelx")
COUNTING = Regime.counting


@dataclass(frozen=True)
class SeSolution:
    alpha: float
    tau: float
    lam: float
    regime: Regime
    residual: float


@dataclass(frozen=True)
class SolverConfig:
    """Numerical constants of the state-evolution solver."""

    alpha_max: float = 50.0
    alpha_offset: float = 1e-8
    damping: float = 0.5
    tau_tol: float = 1e-10
    max_iter: int = 10_000
    n_scan: int = 200
    # damped steps per scan node before switching to the bracketed root
    scan_max_iter: int = 50


DEFAULT_CONFIG = SolverConfig()


# ---------------------------------------------------------------------------
# Scalar building blocks
# ---------------------------------------------------------------------------


def soft_threshold(x, theta):
    """``sgn(x) * max(|x| - theta, 0)``; works elementwise on arrays."""
    if np.any(np.asarray(theta) < 0):
        raise ValueError("theta must be nonnegative")
    out = np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _alpha_min_fn(t: float, delta: float) -> float:
    return (1.0 + t * t) * ndtr(-t) - t * _pdf(t) - 0.5 * delta


@lru_cache(maxsize=256)
def alpha_min(delta: float) -> float:
    """Root of ``(1 + t^2) Phi(-t) - t phi(t) = delta / 2``.

    The left side is strictly decreasing in ``t``; admissible thresholds are
    ``alpha > max(alpha_min(delta), 0)``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    lo, hi = -20.0, 20.0
    if _alpha_min_fn(lo, delta) <= 0 or _alpha_min_fn(hi, delta) >= 0:
        raise NoSolution(f"[-20, 20] does not bracket alpha_min for delta={delta}")
    return float(optimize.brentq(_alpha_min_fn, lo, hi, args=(delta,), xtol=1e-14, rtol=1e-15))


def _atom_mse(mu, alpha, tau):
    """E[(eta_{alpha tau}(mu + tau Z) - mu)^2] in closed form, elementwise in ``mu``."""
    r = mu / tau
    a = alpha - r
    b = -alpha - r
    c = 1.0 + alpha * alpha
    upper = c * ndtr(-a) + (a - 2.0 * alpha) * _pdf(a)
    lower = c * ndtr(b) - (b + 2.0 * alpha) * _pdf(b)
    middle = r * r * (ndtr(a) - ndtr(b))
    return tau * tau * (upper + lower + middle)


def _atom_mse_quad(mu: float, alpha: float, tau: float) -> float:
    theta = alpha * tau

    def integrand(z):
        x = mu + tau * z
        return (soft_threshold(x, theta) - mu) ** 2 * _pdf(z)

    kinks = sorted(k for k in ((theta - mu) / tau, (-theta - mu) / tau) if -12 < k < 12)
    val, _ = integrate.quad(integrand, -12.0, 12.0, points=kinks or None,
                            epsabs=1e-10, epsrel=1e-10, limit=200)
    return val


def mse_expectation(prior: Prior, alpha: float, tau: float, method: str = "closed") -> float:
    """``E[(eta_{alpha tau}(Pi + tau Z) - Pi)^2]``.

    ``method="quad"`` integrates each atom's contribution numerically on
    ``[-12, 12]`` instead of using the closed form.
    """
    v, w = prior.arrays
    if method == "quad":
        return float(math.fsum(m * _atom_mse_quad(mu, alpha, tau) for mu, m in zip(v, w)))
    return float(np.dot(w, _atom_mse(v, alpha, tau)))


def null_mse(alpha: float, tau: float) -> float:
    """``E[eta_{alpha tau}(tau Z)^2] = 2 tau^2 ((1 + alpha^2) Phi(-alpha) - alpha phi(alpha))``."""
    return 2.0 * tau * tau * ((1.0 + alpha * alpha) * ndtr(-alpha) - alpha * _pdf(alpha))


def _atom_exceed(mu, alpha, tau, t=0.0):
    return ndtr((mu - alpha * tau - t) / tau) + ndtr((-mu - alpha * tau - t) / tau)


def exceed_prob(prior: Prior, alpha: float, tau: float, t: float = 0.0,
                given: str | None = None) -> float:
    """``P(|Pi + tau Z| >= alpha tau + t)``.

    ``given="null"`` conditions on ``Pi = 0`` and ``given="nonnull"`` on
    ``Pi != 0``. ``t`` may be an array.
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    if given == "null":
        out = 2.0 * ndtr(-alpha - np.asarray(t, dtype=float) / tau)
    else:
        if given == "nonnull":
            v, w = prior.nonnull
        elif given is None:
            v, w = prior.arrays
        else:
            raise ValueError(f"given must be None, 'null' or 'nonnull', got {given!r}")
        tt = np.asarray(t, dtype=float)
        out = np.tensordot(w, _atom_exceed(v[:, None], alpha, tau, tt.reshape(1, -1)), axes=1)
        out = out.reshape(tt.shape)
    return float(out) if np.ndim(out) == 0 else out


def stationarity_gap(prior: Prior, alpha: float, tau: float) -> float:
    """``E[Z + a; Pi + tau Z < -tau a] - E[Z - a; Pi + tau Z > tau a]`` with ``a = alpha``.

    Proportional to the derivative of the mean squared error in the threshold
    multiplier at fixed ``tau``; zero at the minimum-``tau`` point.
    """
    v, w = prior.arrays
    r = v / tau
    a = alpha - r
    b = -alpha - r
    low = -_pdf(b) + alpha * ndtr(b)
    high = _pdf(a) - alpha * ndtr(-a)
    return float(np.dot(w, low - high))


# ---------------------------------------------------------------------------
# Regime reduction and the equation systems
# ---------------------------------------------------------------------------


def effective_problem(prior: Prior, delta: float, regime: Regime) -> tuple[Prior, float]:
    """Map an augmented-design problem to an equivalent plain one.

    Model-X doubles the column count (``eps/2``, ``delta/2``); counting with
    ratio ``c`` adds ``c p`` null columns (``eps/(1+c)``, ``delta/(1+c)``);
    ``cv`` first shrinks ``delta`` to ``(K-1) delta / K``.
    """
    if regime.kind == "original":
        return prior, delta
    if regime.kind == "modelx":
        return prior.dilute(0.5), delta / 2.0
    if regime.kind == "counting":
        scale = 1.0 / (1.0 + regime.c)
        return prior.dilute(scale), delta * scale
    return effective_problem(prior, (regime.K - 1) * delta / regime.K, regime.base)


def state_evolution_map(prior: Prior, delta: float, sigma: float, alpha: float, tau: float,
                        regime: Regime = ORIGINAL) -> tuple[float, float]:
    """Right-hand sides ``(tau^2, lambda)`` of the regime's own equations.

    Evaluated term by term on the augmented design (no reduction), so that it
    can serve as an independent check of :func:`effective_problem`.
    """
    if regime.kind == "cv":
        delta = (regime.K - 1) * delta / regime.K
        regime = regime.base
    extra = {"original": 0.0, "modelx": 1.0, "counting": regime.c}[regime.kind]
    tau2 = sigma ** 2 + (mse_expectation(prior, alpha, tau) + extra * null_mse(alpha, tau)) / delta
    frac = (exceed_prob(prior, alpha, tau) + extra * exceed_prob(prior, alpha, tau, given="null")) / delta
    return tau2, (1.0 - frac) * alpha * tau


def _lambda_of(prior: Prior, delta: float, alpha: float, tau: float) -> float:
    return (1.0 - exceed_prob(prior, alpha, tau) / delta) * alpha * tau


def tau_fixed_point(prior: Prior, delta: float, sigma: float, alpha: float,
                    tau0: float | None = None, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Solve the first equation for ``tau`` at fixed ``alpha``.

    Damped iteration on ``tau^2`` first. When the map is nearly neutral (its
    slope approaches one as ``alpha`` nears the admissible bound, or when the
    signal is very strong) the iteration crawls, and the scalar root of
    ``F(tau^2) - tau^2`` is bracketed and found with ``brentq`` instead.
    """
    v, w = prior.arrays
    s2 = sigma * sigma

    def rhs(x):
        return s2 + float(np.dot(w, _atom_mse(v, alpha, math.sqrt(x)))) / delta

    t2 = tau0 * tau0 if tau0 else s2 + prior.second_moment() / delta + 1e-12
    d = config.damping
    tau = math.sqrt(t2)
    for _ in range(config.max_iter):
        t2 = (1.0 - d) * t2 + d * rhs(t2)
        new = math.sqrt(t2)
        if abs(new - tau) <= config.tau_tol:
            return new
        tau = new
    if s2 > 0.0:
        # rhs(s2) >= s2, and rhs(x) < x for large x whenever alpha is admissible
        hi = max(t2, s2)
        for _ in range(200):
            hi *= 2.0
            if rhs(hi) < hi:
                x = optimize.brentq(lambda x: rhs(x) - x, s2, hi, xtol=1e-300, rtol=1e-15)
                return math.sqrt(x)
    raise NonConvergence(f"tau iteration did not settle at alpha={alpha:.6g} "
                         f"after {config.max_iter} steps")


def _alpha_lower(delta: float, config: SolverConfig) -> float:
    return max(alpha_min(delta), 0.0) + config.alpha_offset


@lru_cache(maxsize=512)
def _scan(prior: Prior, delta: float, sigma: float, config: SolverConfig):
    """Tabulate ``alpha -> (tau, lambda)`` on log-spaced offsets above the admissible bound.

    The sweep runs downward and stops if ``tau`` cannot be found; that only
    happens next to the lower bound, where tau diverges and lambda(alpha) is
    either negative (delta < 1) or vanishing (delta = 1).
    """
    lo = _alpha_lower(delta, config)
    fast = replace(config, max_iter=config.scan_max_iter)
    alphas = lo + np.geomspace(config.alpha_offset, config.alpha_max - lo, config.n_scan)
    alphas[0] = lo
    rows = []
    tau = None
    # sweep downward from large alpha: tau varies smoothly, so warm starts stay cheap
    for a in alphas[::-1]:
        try:
            tau = tau_fixed_point(prior, delta, sigma, float(a), tau, fast)
        except NonConvergence:
            break
        rows.append((float(a), tau, _lambda_of(prior, delta, float(a), tau)))
    rows.reverse()
    return np.array(rows)


def _single_bracket(values: np.ndarray, what: str, atol: float = 0.0) -> tuple[int, int]:
    """Nodes ``(i, j)``, ``i < j``, bracketing the only sign change of ``values``.

    Nodes with ``|value| <= atol`` carry no sign and are skipped (underflowed
    tails would otherwise register as spurious roots).
    """
    idx = np.flatnonzero(np.abs(values) > atol)
    s = np.sign(values[idx])
    changes = np.flatnonzero(s[:-1] * s[1:] < 0)
    if len(changes) == 0:
        raise NoSolution(f"{what} does not change sign on the admissible alpha range")
    if len(changes) > 1:
        raise NoSolution(f"{what} changes sign {len(changes)} times; solution is ambiguous")
    k = int(changes[0])
    return int(idx[k]), int(idx[k + 1])


def _root_in_scan(prior, delta, sigma, config, table, fn, what, atol=0.0):
    """Bracketed root of ``fn(alpha, tau(alpha))`` using the scan table."""
    vals = np.array([fn(a, t) for a, t in table[:, :2]])
    i, j = _single_bracket(vals, what, atol)
    warm = {"tau": table[i, 1]}

    def g(a):
        tau = tau_fixed_point(prior, delta, sigma, a, warm["tau"], config)
        warm["tau"] = tau
        return fn(a, tau)

    alpha = optimize.brentq(g, table[i, 0], table[j, 0], xtol=1e-14, rtol=1e-15, maxiter=200)
    tau = tau_fixed_point(prior, delta, sigma, alpha, warm["tau"], config)
    return alpha, tau


def se_residual(prior: Prior, delta: float, sigma: float, lam: float, alpha: float, tau: float,
                regime: Regime = ORIGINAL) -> float:
    """Largest absolute violation of the regime's two equations at ``(alpha, tau)``."""
    tau2, lam_hat = state_evolution_map(prior, delta, sigma, alpha, tau, regime)
    return max(abs(tau2 - tau * tau), abs(lam_hat - lam))


def solve_state_evolution(prior: Prior, delta: float, sigma: float, lam: float,
                          regime: Regime = ORIGINAL,
                          config: SolverConfig = DEFAULT_CONFIG) -> SeSolution:
    """Solve for ``(alpha, tau)`` at penalty ``lam`` on the regime's design.

    Raises :class:`NoSolution` when ``lam`` lies outside the range attained by
    ``lambda(alpha)`` over ``alpha in (max(alpha_min, 0), alpha_max)``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if regime.kind == "cv":
        raise ValueError("cv regime is solved by theory.cv_amp")
    p_eff, d_eff = effective_problem(prior, delta, regime)
    table = _scan(p_eff, float(d_eff), float(sigma), config)
    if len(table) < 2:
        raise NoSolution("tau iteration failed on the whole alpha range")
    alpha, tau = _root_in_scan(
        p_eff, d_eff, sigma, config, table,
        lambda a, t: _lambda_of(p_eff, d_eff, a, t) - lam, f"lambda(alpha) - {lam:g}")
    res = se_residual(prior, delta, sigma, lam, alpha, tau, regime)
    return SeSolution(float(alpha), float(tau), float(lam), regime, float(res))


def lambda_range(prior: Prior, delta: float, sigma: float, regime: Regime = ORIGINAL,
                 config: SolverConfig = DEFAULT_CONFIG) -> tuple[float, float]:
    """Smallest and largest ``lambda`` seen on the alpha scan (the solvable window)."""
    p_eff, d_eff = effective_problem(prior, delta, regime)
    table = _scan(p_eff, float(d_eff), float(sigma), config)
    lams = table[:, 2]
    return float(max(lams.min(), 0.0)), float(lams.max())
