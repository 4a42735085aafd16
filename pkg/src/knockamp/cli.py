"""Command line entry point: ``knockamp {predict,simulate,cv,reproduce,selftest}``.

Exit codes: 0 success, 1 other failure, 2 no state-evolution solution,
3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import config as cfgmod
from . import selftest, simharness, theory
from .errors import KnockampError, NoSolution, NonConvergence
from .se_core import Regime

EXIT_NO_SOLUTION = 2
EXIT_NON_CONVERGENCE = 3


def _theory_lambda(rc: cfgmod.RunConfig) -> float | None:
    spec = rc.lambda_spec
    if rc.statistic == "LassoMax":
        return None
    if spec.kind == "fixed":
        return spec.value
    if spec.kind == "star":
        regime = {"LassoCoef": Regime("original"), "LCD": Regime("modelx")}.get(
            rc.statistic) or Regime.counting(rc.c)
        return theory.oracle_lambda_star(rc.prior, rc.delta, rc.sigma, regime)
    if rc.statistic == "LassoCoef":
        raise KnockampError("cv tuning applies to augmented designs; use LCD or CountingCoef")
    c = rc.c if rc.statistic == "CountingCoef" else None
    return theory.cv_amp(rc.prior, rc.delta, rc.sigma, spec.K, c).lambda_cv


def cmd_predict(args) -> int:
    rc = cfgmod.load(args.config)
    lam = _theory_lambda(rc)
    if rc.statistic == "LassoMax":
        curve = theory.lm_curve(rc.prior, rc.delta, rc.sigma)
    elif rc.statistic == "LassoCoef":
        curve = theory.lc_curve(rc.prior, rc.delta, rc.sigma, lam)
    elif rc.statistic == "LCD":
        curve = theory.lcd_curve(rc.prior, rc.delta, rc.sigma, lam)
    else:
        curve = theory.counting_curve(rc.prior, rc.delta, rc.sigma, lam, rc.c)
    if args.output:
        theory.write_curves_csv([curve], args.output)
    else:
        sys.stdout.write(theory.write_curves_csv([curve]))
    return 0


def cmd_simulate(args) -> int:
    exp = cfgmod.load(args.config).experiment()
    records = simharness.run_experiment(exp)
    simharness.write_trials_csv(records, args.output, args.selections)
    for q in exp.q_levels:
        mean, se = simharness.fdr_summary(records, q)
        tpp = np.mean([next(r for r in rec.results if r.q == q).tpp for rec in records])
        print(f"q={q:g}  mean FDP={mean:.4f} (se {se:.4f})  mean TPP={tpp:.4f}")
    return 0


def cmd_cv(args) -> int:
    rc = cfgmod.load(args.config)
    if rc.statistic not in ("LCD", "CountingCoef"):
        raise KnockampError("cv compares tuning on the augmented design; use LCD or CountingCoef")
    spec = rc.lambda_spec if rc.lambda_spec.kind == "cv" else simharness.LambdaSpec("cv")
    c = rc.c if rc.statistic == "CountingCoef" else None
    sol = theory.cv_amp(rc.prior, rc.delta, rc.sigma, spec.K, c)
    exp = cfgmod.RunConfig(**{**rc.__dict__, "lambda_spec": spec}).experiment()
    records = simharness.run_experiment(exp)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("trial_id", "lambda_cv_hat", "lambda_cv"))
        for rec in records:
            w.writerow((rec.trial_id, format(rec.cv_lambda, ".12g"), format(sol.lambda_cv, ".12g")))
    finally:
        if out is not sys.stdout:
            out.close()
    hats = np.array([r.cv_lambda for r in records])
    print(f"lambda_cv={sol.lambda_cv:.6g}  mean lambda_cv_hat={hats.mean():.6g}", file=sys.stderr)
    return 0


def cmd_reproduce(args) -> int:
    for path in simharness.reproduce(args.figure_id, args.outdir, args.full, args.trials):
        print(path)
    return 0


def cmd_selftest(args) -> int:
    return 0 if selftest.run() else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="knockamp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="theory FDP/TPP curve for a config file")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="run trials and write empirical paths")
    p.add_argument("config")
    p.add_argument("-o", "--output", default="trials.csv")
    p.add_argument("--selections", help="optional per-level selection CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cv", help="cross-validated lambda per trial against its CV-AMP limit")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("reproduce", help="write CSVs for one figure")
    p.add_argument("figure_id", help=", ".join(simharness.FIGURES))
    p.add_argument("--outdir", default=".")
    p.add_argument("--full", action="store_true", help="published problem sizes")
    p.add_argument("--trials", type=int, help="override the number of simulated runs")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoSolution as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NON_CONVERGENCE
    except (KnockampError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
