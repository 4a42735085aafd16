"""Monte Carlo trials, K-fold cross-validation, convergence checks and figure reproduction.

Every trial owns an RNG stream derived from ``(base_seed, trial_id)``, so a
run is a pure function of its :class:`ExperimentConfig` no matter how many
threads execute it. The thread count comes from ``KNOCKAMP_THREADS``.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import knockoffs as ko
from . import theory
from .errors import KnockampError, NonConvergence, NotAchievable, UnknownFigure
from .lasso_solver import (
    DesignMatrix,
    generate_design,
    lasso_max_stat,
    lasso_path,
    lasso_solve,
    path_grid,
    sample_signal,
    simulate_response,
)
from .se_core import MODELX, ORIGINAL, Prior, Regime, solve_state_evolution, soft_threshold

THREADS_ENV = "KNOCKAMP_THREADS"
CV_GRID = np.geomspace(4.0, 0.01, 50)
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer")
    return n


# ---------------------------------------------------------------------------
# Configuration and records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaSpec:
    """``fixed`` (uses ``value``), ``cv`` (K-fold on the fitted design) or ``star`` (theory optimum)."""

    kind: str = "cv"
    value: float | None = None
    K: int = 10

    def __post_init__(self):
        if self.kind not in ("fixed", "cv", "star"):
            raise ValueError(f"unknown lambda spec {self.kind!r}")
        if self.kind == "fixed" and not (self.value is not None and self.value > 0):
            raise ValueError("fixed lambda needs a positive value")
        if self.kind == "cv" and self.K < 2:
            raise ValueError("cv needs K >= 2")

    @classmethod
    def fixed(cls, value: float) -> "LambdaSpec":
        return cls("fixed", float(value))

    @classmethod
    def parse(cls, text: str) -> "LambdaSpec":
        """``star``, ``cv``, ``cv(5)`` or a number."""
        text = text.strip().lower()
        if text == "star":
            return cls("star")
        if text.startswith("cv"):
            inner = text[2:].strip("() ")
            return cls("cv", K=int(inner) if inner else 10)
        return cls.fixed(float(text))

    def __str__(self):
        if self.kind == "fixed":
            return format(self.value, ".12g")
        return "star" if self.kind == "star" else f"cv({self.K})"


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    p: int
    sigma: float
    prior: Prior
    lambda_spec: LambdaSpec = field(default_factory=LambdaSpec)
    statistic: str = "LCD"
    c: float | None = None
    q_levels: tuple[float, ...] = (0.1,)
    trials: int = 1
    base_seed: int = 0
    # LassoMax only: the path runs down to this fraction of lambda_max
    path_ratio: float = 0.01

    def __post_init__(self):
        if min(self.n, self.p, self.trials) < 1:
            raise ValueError("n, p and trials must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.statistic not in theory.STATISTICS:
            raise ValueError(f"statistic must be one of {theory.STATISTICS}")
        if self.statistic == "CountingCoef" and not (self.c and self.c > 0):
            raise ValueError("CountingCoef needs c > 0")
        q = np.asarray(self.q_levels, dtype=float)
        if len(q) == 0 or np.any((q <= 0) | (q >= 1)) or np.any(np.diff(q) <= 0):
            raise ValueError("q_levels must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "q_levels", tuple(float(x) for x in q))

    @property
    def delta(self) -> float:
        return self.n / self.p

    @property
    def regime(self) -> Regime:
        return {"LassoMax": ORIGINAL, "LassoCoef": ORIGINAL, "LCD": MODELX}.get(
            self.statistic) or Regime.counting(self.c)


@dataclass(frozen=True)
class QResult:
    q: float
    threshold: float
    n_selected: int
    fdp: float
    tpp: float


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    statistic: str
    lambda_used: float | None
    t: np.ndarray
    fdp: np.ndarray
    tpp: np.ndarray
    fdp_hat: np.ndarray | None
    results: tuple[QResult, ...]
    cv_lambda: float | None = None

    def path_at(self, t_grid) -> tuple[np.ndarray, np.ndarray]:
        """Empirical ``(fdp, tpp)`` at arbitrary thresholds (piecewise constant).

        ``#{stat >= t}`` only changes at observed values, so each grid point
        takes the value at the next observed threshold at or above it.
        """
        t_grid = np.asarray(t_grid, dtype=float)
        k = np.searchsorted(self.t, t_grid, side="left")
        inside = k < len(self.t)
        kk = np.minimum(k, max(len(self.t) - 1, 0))
        fdp = np.where(inside, self.fdp[kk] if len(self.t) else 0.0, 0.0)
        tpp = np.where(inside, self.tpp[kk] if len(self.t) else 0.0, 0.0)
        return fdp, tpp


def trial_rngs(base_seed: int, trial_id: int, n_streams: int = 5) -> list[np.random.Generator]:
    """Independent generators for one trial (design, signal, noise, fakes, folds)."""
    root = np.random.SeedSequence(base_seed, spawn_key=(int(trial_id),))
    return [np.random.default_rng(s) for s in root.spawn(n_streams)]


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


def kfold_cv_lambda(X, Y, lambda_grid: Sequence[float] | None = None, K: int = 10, seed=None,
                    rise_stop: float | None = 0.1) -> float:
    """Penalty on ``lambda_grid`` with the smallest K-fold held-out squared error.

    Rows are permuted with ``seed`` and cut into ``K`` contiguous blocks. Each
    fold is fitted along the grid from the largest penalty down with warm
    starts. With ``rise_stop`` set, the descent ends once the mean error
    exceeds ``(1 + rise_stop)`` times the best value so far; the small-penalty
    end of the grid is where fits are slowest and errors have long since
    turned up. ``rise_stop=None`` evaluates the whole grid.
    """
    X = np.asfortranarray(getattr(X, "entries", X), dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = X.shape[0]
    if not 2 <= K <= n:
        raise ValueError("K must satisfy 2 <= K <= n")
    grid = np.sort(np.asarray(CV_GRID if lambda_grid is None else lambda_grid, dtype=float))[::-1]
    if len(grid) == 0:
        raise ValueError("lambda grid is empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, K)
    train = []
    for held in folds:
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        train.append((np.asfortranarray(X[mask]), Y[mask], X[held], Y[held]))
    warm = [None] * K
    best, best_err = grid[0], math.inf
    for lam in grid:
        err = 0.0
        for k, (Xt, Yt, Xh, Yh) in enumerate(train):
            fit = lasso_solve(Xt, Yt, lam, warm[k])
            warm[k] = fit
            r = Yh - Xh @ fit.coefficients
            err += float(r @ r)
        err /= n
        if err < best_err:
            best, best_err = lam, err
        elif rise_stop is not None and err > (1.0 + rise_stop) * best_err:
            break
    return float(best)


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


def resolve_lambda(config: ExperimentConfig, X_fit, Y, rng) -> tuple[float, float | None]:
    """Penalty used for the fit and, when cross-validated, the CV estimate itself."""
    spec = config.lambda_spec
    if spec.kind == "fixed":
        return spec.value, None
    if spec.kind == "star":
        return theory.oracle_lambda_star(config.prior, config.delta, config.sigma, config.regime), None
    lam = kfold_cv_lambda(X_fit, Y, K=spec.K, seed=rng)
    return lam, lam


def _oracle_select(stat, t, fdp, tpp, q) -> QResult:
    ok = np.flatnonzero(fdp <= q)
    if len(ok) == 0:
        return QResult(q, math.inf, 0, 0.0, 0.0)
    k = int(ok[0])
    return QResult(q, float(t[k]), int(np.count_nonzero(stat >= t[k])), float(fdp[k]), float(tpp[k]))


def run_trial(config: ExperimentConfig, trial_id: int) -> TrialRecord:
    """Simulate one data set, fit, and evaluate the statistic's selection rule."""
    r_design, r_signal, r_noise, r_fake, r_fold = trial_rngs(config.base_seed, trial_id)
    base = generate_design(config.n, config.p, r_design)
    beta = sample_signal(config.prior, config.p, r_signal)
    Y = simulate_response(base, beta, config.sigma, r_noise)
    p = config.p
    stat_name = config.statistic
    try:
        if stat_name == "LassoMax":
            path = lasso_path(base.entries, Y, path_grid(base.entries, Y, 100, config.path_ratio))
            stat = lasso_max_stat(path)
            lam, cv_lam = None, None
        else:
            if stat_name == "LassoCoef":
                X_fit = base.entries
            else:
                kind = "modelx" if stat_name == "LCD" else "counting"
                aug = ko.augment(base, kind, r_fake, config.c)
                X_fit = aug.combined
            lam, cv_lam = resolve_lambda(config, X_fit, Y, r_fold)
            fit = lasso_solve(X_fit, Y, lam)
            if stat_name == "LCD":
                stat = ko.lcd_stats(fit, p).values
            else:
                stat = np.abs(fit.coefficients[:p])
    except NonConvergence as exc:
        raise NonConvergence(f"trial {trial_id}: {exc}") from exc

    t, fdp, tpp = ko.empirical_path(stat, beta)
    hat = ko.knockoff_fdp_hat(stat, t) if stat_name == "LCD" else None
    results = []
    for q in config.q_levels:
        if stat_name == "LCD":
            sel = ko.knockoff_threshold(stat, q)
        elif stat_name == "CountingCoef":
            sel = ko.counting_threshold(fit, p, aug.r, q)
        else:
            results.append(_oracle_select(stat, t, fdp, tpp, q))
            continue
        f, tp = ko.empirical_rates(sel, beta)
        results.append(QResult(q, sel.threshold, len(sel.indices), f, tp))
    return TrialRecord(trial_id, stat_name, lam, t, fdp, tpp, hat, tuple(results), cv_lam)


def run_experiment(config: ExperimentConfig, threads: int | None = None,
                   trial_ids: Iterable[int] | None = None) -> list[TrialRecord]:
    """All trials of ``config``, sorted by ``trial_id``."""
    ids = list(range(config.trials)) if trial_ids is None else list(trial_ids)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(ids) <= 1:
        records = [run_trial(config, i) for i in ids]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda i: run_trial(config, i), ids))
    return sorted(records, key=lambda r: r.trial_id)


def fdr_summary(records: Sequence[TrialRecord], q: float) -> tuple[float, float]:
    """Mean realised FDP at level ``q`` and its standard error."""
    vals = np.array([next(r for r in rec.results if r.q == q).fdp for rec in records])
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
    return float(vals.mean()), se


def sup_distance(record: TrialRecord, model: theory.CurveModel, t_grid=None) -> float:
    """``max_t max(|FDP - fdp|, |TPP - tpp|)`` over the theory grid."""
    grid = model.default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    f_th, p_th, _ = model(grid)
    f_em, p_em = record.path_at(grid)
    return float(max(np.abs(f_em - f_th).max(), np.abs(p_em - p_th).max()))


TRIAL_HEADER = ("trial_id",) + theory.CURVE_HEADER
SELECTION_HEADER = ("trial_id", "statistic", "lambda", "cv_lambda", "q", "threshold",
                    "n_selected", "fdp", "tpp")


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".12g")


def write_trials_csv(records: Sequence[TrialRecord], paths_out, selections_out=None) -> None:
    """Empirical paths (``trial_id`` + curve header) and, optionally, per-level selections."""
    with open(paths_out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_HEADER)
        for rec in records:
            hats = rec.fdp_hat if rec.fdp_hat is not None else [None] * len(rec.t)
            for t, f, tp, h in zip(rec.t, rec.fdp, rec.tpp, hats):
                w.writerow([rec.trial_id, rec.statistic, _fmt(rec.lambda_used), _fmt(t), _fmt(f),
                            _fmt(tp), _fmt(h)])
    if selections_out is None:
        return
    with open(selections_out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SELECTION_HEADER)
        for rec in records:
            for r in rec.results:
                w.writerow([rec.trial_id, rec.statistic, _fmt(rec.lambda_used), _fmt(rec.cv_lambda),
                            _fmt(r.q), _fmt(r.threshold), r.n_selected, _fmt(r.fdp), _fmt(r.tpp)])


# ---------------------------------------------------------------------------
# Convergence of empirical averages (the augmented-design limit theorem)
# ---------------------------------------------------------------------------


def _ramp(x, a, h):
    return np.clip((x - a) / h, 0.0, 1.0)


def _clip(x, s):
    return np.clip(x / s, -1.0, 1.0)


# bounded continuous test functions of (estimate, truth, knockoff estimate)
DEFAULT_F_LIBRARY: dict[str, Callable] = {
    "one": lambda b, beta, k: np.ones_like(b),
    "est": lambda b, beta, k: _clip(b, 3.0),
    "est_x_truth": lambda b, beta, k: _clip(b, 3.0) * _clip(beta, 5.0),
    "knock_sq": lambda b, beta, k: _clip(k, 2.0) ** 2,
    "err_sq": lambda b, beta, k: _clip(b - beta, 3.0) ** 2,
    "selected": lambda b, beta, k: _ramp(np.abs(b), 0.5, 0.25),
    "w_positive": lambda b, beta, k: _ramp(np.abs(b) - np.abs(k), 0.3, 0.2),
    "w_negative": lambda b, beta, k: _ramp(np.abs(k) - np.abs(b), 0.1, 0.2),
    "true_hit": lambda b, beta, k: _ramp(np.abs(b), 1.0, 0.5) * _clip(np.abs(beta), 1.0),
}


@dataclass(frozen=True)
class ContrastReport:
    p: int
    lambdas: tuple[float, ...]
    names: tuple[str, ...]
    empirical: np.ndarray
    predicted: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.empirical - self.predicted)

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max())


def _panel_nodes(breaks, lo, hi, per_panel=16, width=0.5):
    x, w = np.polynomial.legendre.leggauss(per_panel)
    cuts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        k = max(1, int(math.ceil((b - a) / width)))
        edges = np.linspace(a, b, k + 1)
        for u, v in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (v - u) * x + 0.5 * (u + v))
            ws.append(0.5 * (v - u) * w)
    return np.concatenate(xs), np.concatenate(ws)


def contrast_expectation(f: Callable, prior: Prior, alpha: float, tau: float,
                         z_span: float = 9.0) -> float:
    """``E f(eta(Pi + tau Z), Pi, eta(tau Z'))`` by tensor Gauss-Legendre.

    Panels are split at the soft-threshold kinks so each piece is smooth.
    """
    thr = alpha * tau
    zp, wp = _panel_nodes([-alpha, alpha], -z_span, z_span)
    wp = wp * np.exp(-0.5 * zp * zp) / math.sqrt(2 * math.pi)
    knock = soft_threshold(tau * zp, thr)
    total = 0.0
    for mu, mass in zip(*prior.arrays):
        z, wz = _panel_nodes([(-thr - mu) / tau, (thr - mu) / tau], -z_span, z_span)
        wz = wz * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        est = soft_threshold(mu + tau * z, thr)
        vals = f(est[:, None], np.full((len(z), 1), mu), knock[None, :])
        vals = np.broadcast_to(vals, (len(z), len(zp)))
        total += mass * float(wz @ vals @ wp)
    return total


def contrast_convergence_test(config: ExperimentConfig,
                              f_library: Mapping[str, Callable] | None = None,
                              lambdas: Sequence[float] | None = None,
                              trial_id: int = 0) -> ContrastReport:
    """Empirical ``(1/p) sum f(b_i, beta_i, b_{p+i})`` against its limit on a lambda grid.

    Fits the Model-X augmented design at each penalty (warm-started from the
    largest) and compares with :func:`contrast_expectation` at the matching
    state-evolution fixed point.
    """
    lib = dict(DEFAULT_F_LIBRARY if f_library is None else f_library)
    lams = np.sort(np.asarray(np.geomspace(0.75, 2.0, 5) if lambdas is None else lambdas,
                              dtype=float))[::-1]
    r_design, r_signal, r_noise, r_fake, _ = trial_rngs(config.base_seed, trial_id)
    base = generate_design(config.n, config.p, r_design)
    beta = sample_signal(config.prior, config.p, r_signal).values
    Y = simulate_response(base, beta, config.sigma, r_noise)
    X_aug = ko.augment(base, "modelx", r_fake).combined
    p = config.p
    names = tuple(lib)
    emp = np.empty((len(lams), len(names)))
    pred = np.empty_like(emp)
    for i, fit in enumerate(lasso_path(X_aug, Y, lams)):
        b, k = fit.coefficients[:p], fit.coefficients[p:]
        se = solve_state_evolution(config.prior, config.delta, config.sigma, fit.lam, MODELX)
        for j, name in enumerate(names):
            f = lib[name]
            emp[i, j] = float(np.mean(np.broadcast_to(f(b, beta, k), b.shape)))
            pred[i, j] = contrast_expectation(f, config.prior, se.alpha, se.tau)
    return ContrastReport(p, tuple(float(x) for x in lams), names, emp, pred)


# ---------------------------------------------------------------------------
# Figure reproduction
# ---------------------------------------------------------------------------

FIG3_DELTAS = (0.5, 1.0, 1.5, 2.0)
FIG3_Q_GRID = np.linspace(0.01, 0.25, 50)
FIG3_MARKERS = (0.01, 0.05, 0.1)
FIG5_EPS = (0.05, 0.1, 0.2)
CV_FOLDS = 10


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return path


def fig2_curves() -> list[theory.TradeoffCurve]:
    prior, delta, sigma = Prior.two_point(0.1, 10.0), 0.5, 1.0
    lam_star = theory.oracle_lambda_star(prior, delta, sigma)
    lam_cv = theory.cv_amp(prior, delta, sigma, CV_FOLDS).lambda_cv
    lam_cnt = theory.cv_amp(prior, delta, sigma, CV_FOLDS, c=0.3).lambda_cv
    return [
        theory.lm_curve(prior, delta, sigma),
        theory.lc_curve(prior, delta, sigma, lam_star),
        theory.lcd_curve(prior, delta, sigma, lam_cv),
        theory.counting_curve(prior, delta, sigma, lam_cnt, 0.3),
    ]


def power_map(delta: float, q_grid=FIG3_Q_GRID, prior: Prior | None = None, sigma: float = 1.0,
              c: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Oracle power (thresholded Lasso at lambda*) and knockoff power (at lambda_cv) per level."""
    prior = Prior.two_point(0.1, 4.0) if prior is None else prior
    lc = theory.lc_model(prior, delta, sigma, theory.oracle_lambda_star(prior, delta, sigma))
    lam_cv = theory.cv_amp(prior, delta, sigma, CV_FOLDS, c=c).lambda_cv
    kn = (theory.lcd_model(prior, delta, sigma, lam_cv) if c is None
          else theory.counting_model(prior, delta, sigma, lam_cv, c))
    oracle, knock = [], []
    for q in q_grid:
        oracle.append(theory.power_at_level(lc, q)[1])
        try:
            knock.append(theory.power_at_level(kn, q, use_hat=True)[1])
        except NotAchievable:
            knock.append(0.0)
    return np.array(oracle), np.array(knock)


def convexity_defects(x, y) -> np.ndarray:
    """Chord value minus curve value at each interior point (``>= 0`` where convex)."""
    order = np.argsort(x, kind="stable")
    x, y = np.asarray(x)[order], np.asarray(y)[order]
    x0, x1, x2 = x[:-2], x[1:-1], x[2:]
    y0, y1, y2 = y[:-2], y[1:-1], y[2:]
    span = x2 - x0
    with np.errstate(invalid="ignore", divide="ignore"):
        chord = np.where(span > 0, y0 + (y2 - y0) * (x1 - x0) / np.where(span > 0, span, 1.0), y1)
    return chord - y1


def fig4_setup(n: int = 1000):
    prior = Prior.two_point(0.1, 4.0)
    lam_cv = theory.cv_amp(prior, 1.0, 1.0, CV_FOLDS).lambda_cv
    config = ExperimentConfig(n, n, 1.0, prior, LambdaSpec.fixed(lam_cv), "LCD", trials=15,
                              base_seed=4)
    return config, theory.lcd_model(prior, 1.0, 1.0, lam_cv)


def fig5_theory(eps: float, lambdas, q: float = 0.1, M: float = 5.0):
    prior = Prior.two_point(eps, M)
    out = []
    for lam in lambdas:
        try:
            out.append(theory.power_at_level(theory.lcd_model(prior, 1.0, 1.0, lam), q, True)[1])
        except (NotAchievable, KnockampError):
            out.append(float("nan"))
    return np.array(out)


def fig5_empirical(eps: float, lambdas, n: int, trials: int, q: float = 0.1, M: float = 5.0,
                   base_seed: int = 5, threads: int | None = None):
    """Average power on the lambda grid and the per-trial 10-fold CV penalty."""
    prior = Prior.two_point(eps, M)
    lams = np.sort(np.asarray(lambdas, dtype=float))[::-1]

    def one(trial_id):
        r_design, r_signal, r_noise, r_fake, r_fold = trial_rngs(base_seed, trial_id)
        base = generate_design(n, n, r_design)
        beta = sample_signal(prior, n, r_signal)
        Y = simulate_response(base, beta, 1.0, r_noise)
        X_aug = ko.augment(base, "modelx", r_fake).combined
        powers = [ko.empirical_rates(ko.knockoff_threshold(ko.lcd_stats(f, n), q), beta)[1]
                  for f in lasso_path(X_aug, Y, lams)]
        return np.array(powers)[::-1], kfold_cv_lambda(X_aug, Y, K=CV_FOLDS, seed=r_fold)

    threads = thread_count() if threads is None else threads
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        res = list(pool.map(one, range(trials)))
    power = np.mean([r[0] for r in res], axis=0)
    return power, np.array([r[1] for r in res])


def fig6_cv_lambdas(trials: int, n: int = 1000, p: int = 1500, base_seed: int = 6,
                    threads: int | None = None) -> np.ndarray:
    prior = Prior.two_point(0.1, 5.0)
    config = ExperimentConfig(n, p, 1.0, prior, LambdaSpec("cv", K=CV_FOLDS), "LCD",
                              trials=trials, base_seed=base_seed)
    return np.array([r.cv_lambda for r in run_experiment(config, threads)])


def reproduce(figure_id: str, outdir: str | os.PathLike = ".", full: bool = False,
              trials: int | None = None, threads: int | None = None) -> list[Path]:
    """Write the CSV files for one figure and return their paths.

    ``full`` switches to the published problem sizes; ``trials`` overrides the
    number of simulated runs where a figure has any.
    """
    if figure_id not in FIGURES:
        raise UnknownFigure(f"unknown figure {figure_id!r}; expected one of {FIGURES}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if figure_id == "fig2":
        path = out / "fig2_theory.csv"
        theory.write_curves_csv(fig2_curves(), path)
        written.append(path)

    elif figure_id == "fig3":
        rows, markers = [], []
        for delta in FIG3_DELTAS:
            o, k = power_map(delta)
            oc, kc = power_map(delta, c=0.3)
            rows += [(delta, float(q), float(a), float(b), float(cc))
                     for q, a, b, cc in zip(FIG3_Q_GRID, o, k, kc)]
            mo, mk = power_map(delta, FIG3_MARKERS)
            markers += [(delta, float(q), float(a), float(b)) for q, a, b in zip(FIG3_MARKERS, mo, mk)]
        written.append(_write_rows(out / "fig3_power.csv",
                                   ("delta", "q", "oracle_tpp", "knockoff_tpp", "counting_tpp"), rows))
        written.append(_write_rows(out / "fig3_markers.csv",
                                   ("delta", "q", "oracle_tpp", "knockoff_tpp"), markers))

    elif figure_id == "fig4":
        n = 5000 if full else 1000
        config, model = fig4_setup(n)
        if trials is not None:
            config = ExperimentConfig(**{**config.__dict__, "trials": trials})
        records = run_experiment(config, threads)
        path = out / "fig4_theory.csv"
        theory.write_curves_csv([model.curve()], path)
        written.append(path)
        emp = out / "fig4_empirical.csv"
        write_trials_csv(records, emp)
        written.append(emp)

    elif figure_id == "fig5":
        n = 5000 if full else 1000
        n_trials = trials if trials is not None else (100 if full else 10)
        lams = np.geomspace(0.1, 4.0, 20)
        rows, cv_rows = [], []
        for eps in FIG5_EPS:
            th = fig5_theory(eps, lams)
            em, cv_hat = fig5_empirical(eps, lams, n, n_trials, threads=threads)
            rows += [(eps, float(l), float(a), float(b)) for l, a, b in zip(lams, th, em)]
            lam_cv = theory.cv_amp(Prior.two_point(eps, 5.0), 1.0, 1.0, CV_FOLDS).lambda_cv
            cv_rows.append((eps, lam_cv, float(cv_hat.mean()), float(cv_hat.std(ddof=1))
                            if len(cv_hat) > 1 else 0.0))
        written.append(_write_rows(out / "fig5_power.csv",
                                   ("epsilon", "lambda", "tpp_theory", "tpp_empirical"), rows))
        written.append(_write_rows(out / "fig5_cv.csv",
                                   ("epsilon", "lambda_cv", "lambda_cv_hat_mean", "lambda_cv_hat_sd"),
                                   cv_rows))

    else:  # fig6
        n_trials = trials if trials is not None else (1000 if full else 200)
        lam_hat = fig6_cv_lambdas(n_trials, threads=threads)
        lam_cv = theory.cv_amp(Prior.two_point(0.1, 5.0), 1000 / 1500, 1.0, CV_FOLDS).lambda_cv
        written.append(_write_rows(out / "fig6_cv.csv", ("run", "lambda_cv_hat", "lambda_cv"),
                                   [(i, float(v), lam_cv) for i, v in enumerate(lam_hat)]))
    return written
