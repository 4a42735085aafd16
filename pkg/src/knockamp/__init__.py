"""Asymptotic FDP/TPP predictions for Lasso and knockoff selection, with simulation checks."""
from .errors import (
    DimensionMismatch,
    KnockampError,
    NoSolution,
    NonConvergence,
    NonMonotoneWarning,
    NotAchievable,
    SignedPriorRequired,
    UnknownFigure,
)
from .lasso_solver import BACKEND, lasso_path, lasso_solve
from .se_core import MODELX, ORIGINAL, Prior, Regime, SeSolution, solve_state_evolution
from .theory import (
    cv_amp,
    lc_curve,
    lcd_curve,
    lm_curve,
    counting_curve,
    oracle_lambda_star,
    write_curves_csv,
)

__version__ = "0.1.0"
