"""Flat ``key = value`` configuration files.

Example::

    # Fig. 2 setting
    n = 500
    p = 1000
    sigma = 1
    atom = 10 0.1        # value mass; the zero atom takes the remaining mass
    statistic = LCD
    lambda = cv(10)
    q = 0.05, 0.1
    trials = 20
    seed = 7

``atom`` may repeat. ``epsilon`` and ``M`` are a shorthand for a single
nonzero atom. ``delta`` may replace ``n`` for theory-only commands.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .se_core import Prior
from .simharness import ExperimentConfig, LambdaSpec

KEYS = {"n", "p", "delta", "sigma", "atom", "epsilon", "M", "statistic", "c", "lambda", "q",
        "trials", "seed", "K"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    prior: Prior
    sigma: float
    delta: float
    statistic: str
    lambda_spec: LambdaSpec
    c: float | None
    q_levels: tuple[float, ...]
    trials: int
    seed: int
    n: int | None
    p: int | None

    def experiment(self) -> ExperimentConfig:
        if self.n is None or self.p is None:
            raise ConfigError("simulation needs both n and p")
        return ExperimentConfig(self.n, self.p, self.sigma, self.prior, self.lambda_spec,
                                self.statistic, self.c, self.q_levels, self.trials, self.seed)


def parse_text(text: str) -> RunConfig:
    values: dict[str, str] = {}
    atoms: list[tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "atom":
            parts = val.split()
            if len(parts) != 2:
                raise ConfigError(f"line {lineno}: atom needs 'value mass'")
            atoms.append((float(parts[0]), float(parts[1])))
        elif key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        else:
            values[key] = val

    if atoms and ("epsilon" in values or "M" in values):
        raise ConfigError("give either atom lines or epsilon/M, not both")
    if "epsilon" in values or "M" in values:
        try:
            atoms = [(float(values["M"]), float(values["epsilon"]))]
        except KeyError as exc:
            raise ConfigError("epsilon and M must be given together") from exc
    if not atoms:
        raise ConfigError("no prior: add 'atom = value mass' lines")
    try:
        prior = Prior.from_atoms(atoms)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    n = int(values["n"]) if "n" in values else None
    p = int(values["p"]) if "p" in values else None
    if "delta" in values:
        delta = float(values["delta"])
        if n is not None and p is not None and abs(n / p - delta) > 1e-12:
            raise ConfigError("delta disagrees with n / p")
    elif n is not None and p is not None:
        delta = n / p
    else:
        raise ConfigError("give delta or both n and p")

    K = int(values.get("K", 10))
    lam_text = values.get("lambda", f"cv({K})")
    spec = LambdaSpec.parse(lam_text)
    q = tuple(float(x) for x in values.get("q", "0.1").split(","))
    c = float(values["c"]) if "c" in values else None
    return RunConfig(prior, float(values.get("sigma", 1.0)), delta,
                     values.get("statistic", "LCD"), spec, c, q,
                     int(values.get("trials", 1)), int(values.get("seed", 0)), n, p)


def load(path: str | Path) -> RunConfig:
    return parse_text(Path(path).read_text())
