"""Knockoff augmentation, W statistics and data-driven selection thresholds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .lasso_solver import DesignMatrix, LassoFit, SignalVector, generate_design


@dataclass(frozen=True)
class AugmentedDesign:
    base: DesignMatrix
    fakes: DesignMatrix
    kind: str  # "modelx" or "counting"

    @property
    def p(self) -> int:
        return self.base.m

    @property
    def r(self) -> int:
        return self.fakes.m

    @property
    def combined(self) -> np.ndarray:
        return np.asfortranarray(np.hstack([self.base.entries, self.fakes.entries]))


@dataclass(frozen=True)
class WStats:
    values: np.ndarray
    lam: float


@dataclass(frozen=True)
class Selection:
    indices: np.ndarray
    threshold: float
    level_q: float


def augment(base: DesignMatrix, kind: str = "modelx", seed=None, c: float | None = None) -> AugmentedDesign:
    """Append fake columns drawn independently of everything else.

    Model-X gets one knockoff per column (``r = p``); counting gets a shared
    pool of ``r = round(c p)`` columns.
    """
    if kind == "modelx":
        r = base.m
    elif kind == "counting":
        if c is None or not c > 0:
            raise ValueError("counting knockoffs need c > 0")
        r = int(round(c * base.m))
        if r < 1:
            raise ValueError("c * p rounds to zero fake columns")
    else:
        raise ValueError(f"unknown knockoff kind {kind!r}")
    return AugmentedDesign(base, generate_design(base.n, r, seed), kind)


def lcd_stats(fit: LassoFit, p: int) -> WStats:
    """``W_j = |b_j| - |b_{p+j}|`` from a fit on ``[X, X_knockoff]``."""
    b = np.asarray(fit.coefficients)
    if b.shape != (2 * p,):
        raise DimensionMismatch(f"expected {2 * p} coefficients, got {b.shape[0]}")
    return WStats(np.abs(b[:p]) - np.abs(b[p:]), fit.lam)


def knockoff_fdp_hat(W: np.ndarray, t) -> np.ndarray:
    """``(1 + #{W <= -t}) / #{W >= t}`` with an empty denominator mapped to ``inf``."""
    W = np.asarray(W)
    t = np.atleast_1d(t)
    neg = (W[None, :] <= -t[:, None]).sum(1)
    pos = (W[None, :] >= t[:, None]).sum(1)
    with np.errstate(divide="ignore"):
        return np.where(pos > 0, (1.0 + neg) / np.maximum(pos, 1), np.inf)


def knockoff_threshold(W, q: float) -> Selection:
    """Knockoff filter: the smallest observed ``|W_j| > 0`` whose FDP estimate is at most ``q``."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    w = np.asarray(getattr(W, "values", W), dtype=float)
    cand = np.unique(np.abs(w[w != 0]))
    if len(cand):
        ok = np.flatnonzero(knockoff_fdp_hat(w, cand) <= q)
        if len(ok):
            t = float(cand[ok[0]])
            return Selection(np.flatnonzero(w >= t), t, q)
    return Selection(np.empty(0, dtype=int), np.inf, q)


def counting_ratio(coefs: np.ndarray, p: int, r: int, t) -> np.ndarray:
    """Fraction of fakes above ``t`` (over ``r + 1``) divided by fraction of originals above ``t``."""
    mag = np.abs(np.asarray(coefs))
    t = np.atleast_1d(t)
    fake = (mag[None, p:] > t[:, None]).sum(1) / (r + 1.0)
    orig = (mag[None, :p] > t[:, None]).sum(1) / float(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(orig > 0, fake / np.where(orig > 0, orig, 1.0), np.inf)


def counting_threshold(fit, p: int, r: int, q: float) -> Selection:
    """Threshold for counting knockoffs on coefficient magnitudes (strict ``>``)."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    b = np.asarray(getattr(fit, "coefficients", fit), dtype=float)
    if b.shape != (p + r,):
        raise DimensionMismatch(f"expected {p + r} coefficients, got {b.shape[0]}")
    mag = np.abs(b[:p])
    cand = np.unique(np.concatenate([[0.0], mag]))
    ok = np.flatnonzero(counting_ratio(b, p, r, cand) <= q)
    if len(ok):
        t = float(cand[ok[0]])
        return Selection(np.flatnonzero(mag > t), t, q)
    return Selection(np.empty(0, dtype=int), np.inf, q)


def empirical_rates(selection, truth) -> tuple[float, float]:
    """FDP and TPP of a selection with the ``0/0 = 0`` convention."""
    idx = np.asarray(getattr(selection, "indices", selection), dtype=int)
    values = np.asarray(getattr(truth, "values", truth))
    nonnull = values[idx] != 0
    n_sel = len(idx)
    n_true = int(np.count_nonzero(values))
    fdp = (n_sel - nonnull.sum()) / n_sel if n_sel else 0.0
    tpp = nonnull.sum() / n_true if n_true else 0.0
    return float(fdp), float(tpp)


def empirical_path(stat: np.ndarray, truth, thresholds=None):
    """Empirical ``FDP(t)`` and ``TPP(t)`` for the rule ``stat_j >= t``.

    Evaluated at the distinct positive statistic values unless ``thresholds``
    is given. Returns ``(t, fdp, tpp)`` with ``t`` increasing.
    """
    stat = np.asarray(stat, dtype=float)
    is_nn = np.asarray(getattr(truth, "values", truth)) != 0
    t = np.unique(stat[stat > 0]) if thresholds is None else np.asarray(thresholds, dtype=float)
    order = np.argsort(stat)
    s_sorted = stat[order]
    nn_sorted = is_nn[order]
    # counts of stat >= t via suffix sums over the sorted statistic
    pos = np.searchsorted(s_sorted, t, side="left")
    nn_suffix = np.concatenate([np.cumsum(nn_sorted[::-1])[::-1], [0]])
    n_sel = len(stat) - pos
    tp = nn_suffix[pos]
    fp = n_sel - tp
    n_true = max(int(is_nn.sum()), 1)
    fdp = np.where(n_sel > 0, fp / np.maximum(n_sel, 1), 0.0)
    tpp = tp / n_true if is_nn.any() else np.zeros(len(t))
    return t, fdp, tpp
