"""Asymptotic FDP / TPP predictions for Lasso-based selection rules.

Four importance statistics are covered:

``LassoMax``      entry point of a variable on the Lasso path (plain Lasso selection)
``LassoCoef``     ``|beta_hat_j(lambda)|`` on the original design (thresholded Lasso, oracle)
``LCD``           ``|beta_hat_j| - |beta_hat_{p+j}|`` on the Model-X augmented design
``CountingCoef``  ``|beta_hat_j|`` with a shared pool of ``c p`` counting knockoffs

Each ``*_model`` function solves the state evolution once and returns a
:class:`CurveModel` that evaluates ``(fdp, tpp, fdp_hat)`` at any threshold.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from .errors import NonMonotoneWarning, NoSolution, NotAchievable, SignedPriorRequired
from .se_core import (
    DEFAULT_CONFIG,
    MODELX,
    ORIGINAL,
    Prior,
    Regime,
    SeSolution,
    SolverConfig,
    _lambda_of,
    _root_in_scan,
    _scan,
    _pdf,
    effective_problem,
    exceed_prob,
    lambda_range,
    mse_expectation,
    null_mse,
    solve_state_evolution,
    stationarity_gap,
)

STATISTICS = ("LassoMax", "LassoCoef", "LCD", "CountingCoef")

# stands for "t -> 0 from above" when the target level is met at every threshold
ZERO_PLUS = float(np.finfo(float).tiny)

# B = |tau eta_alpha(Z')| is integrated over b/tau in [0, _B_SPAN] by composite Gauss-Legendre
_B_SPAN = 12.0
_PANELS = 24
_NODES = 16


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass(frozen=True)
class CurvePoint:
    t: float
    fdp: float
    tpp: float
    fdp_hat: float | None = None


@dataclass(frozen=True)
class TradeoffCurve:
    statistic: str
    lam: float | None
    points: tuple[CurvePoint, ...]

    @property
    def t(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def fdp(self) -> np.ndarray:
        return np.array([p.fdp for p in self.points])

    @property
    def tpp(self) -> np.ndarray:
        return np.array([p.tpp for p in self.points])

    @property
    def fdp_hat(self) -> np.ndarray | None:
        if not self.points or self.points[0].fdp_hat is None:
            return None
        return np.array([p.fdp_hat for p in self.points])


@dataclass(frozen=True)
class CvSolution:
    alpha_cv: float
    tau_cv: float
    lambda_cv: float
    K: int
    residual: float


class CurveModel:
    """Threshold -> ``(fdp, tpp, fdp_hat)`` for one statistic at a solved fixed point."""

    def __init__(self, statistic: str, lam: float | None, se: SeSolution | None,
                 fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray | None]],
                 scale: float):
        self.statistic = statistic
        self.lam = lam
        self.se = se
        self._fn = fn
        self.scale = scale

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self._fn(t)

    def default_grid(self, n: int = 400) -> np.ndarray:
        """Geometric grid from ``1e-4 tau`` to ``12 tau``."""
        return np.geomspace(1e-4 * self.scale, 12.0 * self.scale, n)

    def curve(self, t_grid: Iterable[float] | None = None) -> TradeoffCurve:
        t = self.default_grid() if t_grid is None else np.asarray(list(t_grid), dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be strictly increasing")
        fdp, tpp, hat = self(t)
        pts = tuple(
            CurvePoint(float(ti), float(f), float(p), None if hat is None else float(h))
            for ti, f, p, h in zip(t, fdp, tpp, hat if hat is not None else [None] * len(t)))
        return TradeoffCurve(self.statistic, self.lam, pts)


# ---------------------------------------------------------------------------
# Thresholded Lasso (oracle) and Lasso-max
# ---------------------------------------------------------------------------


def _lc_eval(prior: Prior, alpha: float, tau: float, t: np.ndarray):
    eps = prior.eps
    null = (1.0 - eps) * exceed_prob(prior, alpha, tau, t, given="null")
    tpp = exceed_prob(prior, alpha, tau, t, given="nonnull")
    fdp = _ratio(null, null + eps * tpp)
    return fdp, tpp


def lc_model(prior: Prior, delta: float, sigma: float, lam: float) -> CurveModel:
    se = solve_state_evolution(prior, delta, sigma, lam, ORIGINAL)

    def fn(t):
        fdp, tpp = _lc_eval(prior, se.alpha, se.tau, t)
        return fdp, tpp, None

    return CurveModel("LassoCoef", lam, se, fn, se.tau)


def lc_curve(prior: Prior, delta: float, sigma: float, lam: float,
             t_grid: Iterable[float] | None = None) -> TradeoffCurve:
    """Thresholded-Lasso tradeoff ``t -> (fdp, tpp)`` at penalty ``lam``."""
    return lc_model(prior, delta, sigma, lam).curve(t_grid)


def lm_point(prior: Prior, delta: float, sigma: float, t: float) -> CurvePoint:
    """Lasso-max prediction: the plain Lasso support at ``lambda = t``."""
    se = solve_state_evolution(prior, delta, sigma, t, ORIGINAL)
    fdp, tpp = _lc_eval(prior, se.alpha, se.tau, np.zeros(1))
    return CurvePoint(float(t), float(fdp[0]), float(tpp[0]))


def lm_curve(prior: Prior, delta: float, sigma: float,
             t_grid: Iterable[float] | None = None) -> TradeoffCurve:
    if t_grid is None:
        lo, hi = lambda_range(prior, delta, sigma)
        t_grid = np.geomspace(max(lo, 1e-3), min(hi, 50.0), 200)[1:-1]
    pts = []
    for t in t_grid:
        pts.append(lm_point(prior, delta, sigma, float(t)))
    return TradeoffCurve("LassoMax", None, tuple(pts))


def lm_at_tpp(prior: Prior, delta: float, sigma: float, target_tpp: float) -> CurvePoint:
    """Lasso-max point whose tpp equals ``target_tpp`` (tpp decreases in ``t``)."""
    lo, hi = lambda_range(prior, delta, sigma)
    lo = max(lo, 1e-6) * 1.0001
    hi = hi * 0.9999

    def g(log_t):
        return lm_point(prior, delta, sigma, math.exp(log_t)).tpp - target_tpp

    if g(math.log(lo)) < 0 or g(math.log(hi)) > 0:
        raise NotAchievable(f"tpp={target_tpp} not reached on the Lasso path")
    log_t = optimize.brentq(g, math.log(lo), math.log(hi), xtol=1e-12)
    return lm_point(prior, delta, sigma, math.exp(log_t))


# ---------------------------------------------------------------------------
# LCD statistic on the Model-X augmented design
# ---------------------------------------------------------------------------


class LcdTails(NamedTuple):
    """Tail probabilities of ``D = A - B`` with ``A = |eta(Pi + tau Z)|`` and ``B = |tau eta_alpha(Z')|``.

    ``*_nonnull`` condition on ``Pi != 0`` and ``*_null`` on ``Pi = 0``.
    ``p_wrongsign_nonnull`` is ``P(D >= t, eta(Pi + tau Z) < 0 | Pi != 0)``.
    """

    p_ge: np.ndarray
    p_le_neg: np.ndarray
    p_ge_nonnull: np.ndarray
    p_wrongsign_nonnull: np.ndarray
    p_le_neg_nonnull: np.ndarray
    p_ge_null: np.ndarray
    p_le_neg_null: np.ndarray


def _gl_nodes(lo: float = 0.0, span: float = _B_SPAN):
    x, w = np.polynomial.legendre.leggauss(_NODES)
    edges = np.linspace(lo, lo + span, _PANELS + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


_U, _WU = _gl_nodes()


def _atom_tails(mu: np.ndarray, alpha: float, tau: float, t: np.ndarray):
    """Per-atom tails, shape ``(len(mu), len(t))``: (ge, le_neg, wrongsign)."""
    mu = mu[:, None, None]
    tt = t[None, :, None]
    b_atom = 1.0 - 2.0 * ndtr(-alpha)
    dens = 2.0 * _pdf(alpha + _U) * _WU  # density of B/tau times quadrature weight
    u = _U[None, None, :]

    def surv(x):  # P(A >= x), x >= 0
        return ndtr((mu - alpha * tau - x) / tau) + ndtr((-mu - alpha * tau - x) / tau)

    def wrong(x):  # P(A >= x, eta < 0)
        return ndtr((-mu - alpha * tau - x) / tau)

    ge = b_atom * surv(tt)[..., 0] + (surv(tt + tau * u) * dens).sum(-1)
    wr = b_atom * wrong(tt)[..., 0] + (wrong(tt + tau * u) * dens).sum(-1)
    # P(A <= B - t): B must exceed t; substitute u = t/tau + s with s in [0, span]
    s = u
    shifted = 2.0 * _pdf(alpha + tt / tau + s) * _WU
    le = ((1.0 - surv(tau * s)) * shifted).sum(-1)
    return ge, le, wr


def lcd_tail_probs(prior: Prior, alpha: float, tau: float, t) -> LcdTails:
    """Tail probabilities of the limiting LCD statistic at thresholds ``t > 0``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    v, w = prior.arrays
    ge, le, wr = _atom_tails(v, alpha, tau, t)
    zero = v == 0.0
    nn = ~zero
    wn = w[nn] / w[nn].sum() if nn.any() else w[nn]

    def mix(rows, weights):
        return np.tensordot(weights, rows, axes=1) if len(weights) else np.zeros(len(t))

    return LcdTails(
        p_ge=np.clip(mix(ge, w), 0.0, 1.0),
        p_le_neg=np.clip(mix(le, w), 0.0, 1.0),
        p_ge_nonnull=np.clip(mix(ge[nn], wn), 0.0, 1.0),
        p_wrongsign_nonnull=np.clip(mix(wr[nn], wn), 0.0, 1.0),
        p_le_neg_nonnull=np.clip(mix(le[nn], wn), 0.0, 1.0),
        p_ge_null=np.clip(ge[zero][0], 0.0, 1.0),
        p_le_neg_null=np.clip(le[zero][0], 0.0, 1.0),
    )


def _lcd_eval(prior: Prior, alpha: float, tau: float, t: np.ndarray):
    tails = lcd_tail_probs(prior, alpha, tau, t)
    eps = prior.eps
    fdp = _ratio((1.0 - eps) * tails.p_ge_null, tails.p_ge)
    fdp_hat = _ratio(tails.p_le_neg, tails.p_ge)
    return fdp, tails.p_ge_nonnull, fdp_hat


def lcd_model(prior: Prior, delta: float, sigma: float, lam: float) -> CurveModel:
    se = solve_state_evolution(prior, delta, sigma, lam, MODELX)

    def fn(t):
        return _lcd_eval(prior, se.alpha, se.tau, t)

    return CurveModel("LCD", lam, se, fn, se.tau)


def lcd_curve(prior: Prior, delta: float, sigma: float, lam: float,
              t_grid: Iterable[float] | None = None) -> TradeoffCurve:
    """LCD-knockoffs tradeoff with the limiting knockoff FDP estimate attached."""
    return lcd_model(prior, delta, sigma, lam).curve(t_grid)


def lcd_overestimate(prior: Prior, alpha: float, tau: float, t) -> np.ndarray:
    """``eps P(D <= -t | Pi != 0) / P(D >= t)``: the amount by which ``fdp_hat`` exceeds ``fdp``."""
    tails = lcd_tail_probs(prior, alpha, tau, t)
    return _ratio(prior.eps * tails.p_le_neg_nonnull, tails.p_ge)


# ---------------------------------------------------------------------------
# Counting knockoffs
# ---------------------------------------------------------------------------


def counting_model(prior: Prior, delta: float, sigma: float, lam: float, c: float) -> CurveModel:
    se = solve_state_evolution(prior, delta, sigma, lam, Regime.counting(c))

    def fn(t):
        eps = prior.eps
        fake = exceed_prob(prior, se.alpha, se.tau, t, given="null")
        fdp, tpp = _lc_eval(prior, se.alpha, se.tau, t)
        original = exceed_prob(prior, se.alpha, se.tau, t)
        hat = _ratio(fake, original)
        return fdp, tpp, hat

    return CurveModel("CountingCoef", lam, se, fn, se.tau)


def counting_curve(prior: Prior, delta: float, sigma: float, lam: float, c: float,
                   t_grid: Iterable[float] | None = None) -> TradeoffCurve:
    """Thresholded Lasso with ``c p`` shared knockoff columns."""
    if not c > 0:
        raise ValueError("c must be positive")
    return counting_model(prior, delta, sigma, lam, c).curve(t_grid)


# ---------------------------------------------------------------------------
# Threshold inversion and power
# ---------------------------------------------------------------------------


def invert_fdp(model: CurveModel, q: float, use_hat: bool = False,
               t_grid: np.ndarray | None = None) -> float:
    """Smallest threshold at which the (estimated) FDP drops to ``q``.

    Returns :data:`ZERO_PLUS` when the level is met for every ``t > 0``.
    A sampled curve that rises by more than ``1e-9`` triggers
    :class:`NonMonotoneWarning`; the first crossing is still returned.
    """
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    grid = model.default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)

    def level(t):
        fdp, _, hat = model(t)
        if use_hat:
            if hat is None:
                raise ValueError(f"{model.statistic} has no FDP estimate")
            return hat
        return fdp

    vals = level(grid)
    if np.any(np.diff(vals) > 1e-9):
        warnings.warn(f"{model.statistic} fdp curve is not monotone on the grid",
                      NonMonotoneWarning, stacklevel=2)
    ok = np.flatnonzero(vals <= q)
    if len(ok) == 0:
        raise NotAchievable(f"fdp never reaches q={q} (minimum {vals.min():.4g})")
    i = int(ok[0])
    if i == 0:
        return ZERO_PLUS
    lo, hi = grid[i - 1], grid[i]
    return float(optimize.brentq(lambda t: float(level(t)[0]) - q, lo, hi, xtol=1e-13, rtol=1e-12))


def power_at_level(model: CurveModel, q: float, use_hat: bool = False) -> tuple[float, float]:
    """``(t, tpp(t))`` at the inverted threshold for level ``q``."""
    t = invert_fdp(model, q, use_hat)
    _, tpp, _ = model(t)
    return t, float(tpp[0])


# ---------------------------------------------------------------------------
# Tuning: oracle lambda and the CV-AMP limit
# ---------------------------------------------------------------------------


def oracle_lambda_star(prior: Prior, delta: float, sigma: float, regime: Regime = ORIGINAL,
                       bounds: tuple[float, float] = (0.01, 4.0)) -> float:
    """Penalty minimising the fixed-point ``tau`` (equivalently the estimation MSE).

    Bounded Brent search over ``log lambda`` inside ``bounds`` intersected
    with the solvable window.
    """
    lo, hi = lambda_range(prior, delta, sigma, regime)
    a = max(bounds[0], lo * 1.0001)
    b = min(bounds[1], hi * 0.9999)
    if not a < b:
        raise NoSolution("no solvable lambda inside the search bounds")

    def tau(log_lam):
        return solve_state_evolution(prior, delta, sigma, math.exp(log_lam), regime).tau

    res = optimize.minimize_scalar(tau, bounds=(math.log(a), math.log(b)), method="bounded",
                                   options={"xatol": 1e-5})
    return math.exp(res.x)


def cv_amp_residual(prior: Prior, delta: float, sigma: float, K: int, alpha: float, tau: float,
                    c: float | None = None) -> float:
    """Largest violation of the two CV-AMP equations written on the augmented design."""
    scale = K / ((K - 1) * delta)
    extra = 1.0 if c is None else c
    tau2 = sigma ** 2 + scale * (mse_expectation(prior, alpha, tau) + extra * null_mse(alpha, tau))
    null_side = 2.0 * (_pdf(alpha) - alpha * ndtr(-alpha))
    stat = extra * null_side - stationarity_gap(prior, alpha, tau)
    return max(abs(tau2 - tau * tau), abs(stat))


def cv_amp(prior: Prior, delta: float, sigma: float, K: int, c: float | None = None,
           config: SolverConfig = DEFAULT_CONFIG) -> CvSolution:
    """Limit of the K-fold cross-validated penalty on the augmented design.

    Solves the CV-AMP equations (the ``tau`` fixed point on ``(K-1)/K`` of the
    rows together with stationarity of the MSE in ``alpha``), then reads the
    penalty off the second state-evolution equation at ``(K-1) delta / K``.
    ``c`` switches the augmentation from Model-X to counting knockoffs.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    regime = Regime.cv(K, c)
    p_eff, d_eff = effective_problem(prior, delta, regime)
    table = _scan(p_eff, float(d_eff), float(sigma), config)
    if len(table) < 2:
        raise NoSolution("tau iteration failed on the whole alpha range")
    alpha, tau = _root_in_scan(p_eff, d_eff, sigma, config, table,
                               lambda a, t: stationarity_gap(p_eff, a, t), "MSE stationarity",
                               atol=1e-12)
    lam = _lambda_of(p_eff, d_eff, alpha, tau)
    if not lam > 0:
        raise NoSolution(f"CV-AMP fixed point implies a nonpositive penalty ({lam:.4g})")
    res = cv_amp_residual(prior, delta, sigma, K, alpha, tau, c)
    return CvSolution(float(alpha), float(tau), float(lam), int(K), float(res))


# ---------------------------------------------------------------------------
# Type S limits
# ---------------------------------------------------------------------------


def sign_limits(prior: Prior, delta: float, sigma: float, lam: float, t) -> tuple:
    """Limiting false and true sign proportions of LCD-knockoffs at threshold ``t``.

    ``tsp`` follows the published display term by term, including its
    ``(1 - eps) / 2`` weight on the TPP limit.
    """
    v, _ = prior.nonnull
    if np.any(v < 0):
        raise SignedPriorRequired("all nonzero atoms must be positive")
    se = solve_state_evolution(prior, delta, sigma, lam, MODELX)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    tails = lcd_tail_probs(prior, se.alpha, se.tau, t_arr)
    fdp, tpp, _ = _lcd_eval(prior, se.alpha, se.tau, t_arr)
    eps = prior.eps
    fsp = 0.5 * fdp
    tsp = eps * tails.p_ge_nonnull - eps * tails.p_wrongsign_nonnull + 0.5 * (1.0 - eps) * tpp
    if np.ndim(t) == 0:
        return float(fsp[0]), float(tsp[0])
    return fsp, tsp


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

CURVE_HEADER = ("statistic", "lambda", "t", "fdp", "tpp", "fdp_hat")


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".12g")


def write_curves_csv(curves: Iterable[TradeoffCurve], out=None) -> str | None:
    """Write curves with header ``statistic,lambda,t,fdp,tpp,fdp_hat``.

    ``out`` may be a path, an open text file, or ``None`` to return a string.
    """
    buf = io.StringIO() if out is None else None
    handle = buf
    opened = None
    if out is not None:
        if hasattr(out, "write"):
            handle = out
        else:
            opened = handle = open(out, "w", newline="")
    try:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for c in curves:
            for p in c.points:
                w.writerow([c.statistic, _fmt(c.lam), _fmt(p.t), _fmt(p.fdp), _fmt(p.tpp),
                            _fmt(p.fdp_hat)])
    finally:
        if opened is not None:
            opened.close()
    return buf.getvalue() if buf is not None else None
