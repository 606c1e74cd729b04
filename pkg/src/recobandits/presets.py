"""Canned experiment configurations for the desk-scale studies.

The parametric ten-arm settings ship as bundled CSV fixtures (amplitude
theta0, rate/steepness theta1, shape/midpoint theta2 per arm).  All presets
use z_max = 30 and observation noise 0.1 over a horizon of 1000 rounds
unless stated otherwise.
"""

from __future__ import annotations

import csv
from importlib.resources import files

from .environment import EnvConfig, RecoveryModel
from .exceptions import ConfigError
from .harness import ExperimentConfig
from .kernels import KernelSpec
from .policies import PolicyConfig

Z_MAX = 30
NOISE_SD = 0.1
HORIZON = 1000


def _load_thetas(name: str) -> list[tuple[float, float, float]]:
    text = (files("recobandits") / "data" / name).read_text()
    rows = list(csv.DictReader(text.splitlines()))
    return [(float(r["theta0"]), float(r["theta1"]), float(r["theta2"])) for r in rows]


def logistic_thetas() -> list[tuple[float, float, float]]:
    return _load_thetas("logistic_thetas.csv")


def gamma_thetas() -> list[tuple[float, float, float]]:
    return _load_thetas("gamma_thetas.csv")


def parametric_env(setting: str, seed: int) -> EnvConfig:
    """The ten-arm logistic or gamma recovery environment."""
    if setting == "logistic":
        thetas = logistic_thetas()
        kind = "logistic"
    elif setting == "gamma":
        thetas = gamma_thetas()
        kind = "gamma"
    else:
        raise ConfigError(f"unknown setting {setting!r}, expected 'logistic' or 'gamma'")
    models = tuple(RecoveryModel(kind=kind, theta=theta) for theta in thetas)
    return EnvConfig(
        n_arms=len(models), z_max=Z_MAX, noise_sd=NOISE_SD, models=models, master_seed=seed
    )


def gp_env(
    n_arms: int,
    lengthscale: float,
    seed: int,
    z_max: int = Z_MAX,
    noise_sd: float = NOISE_SD,
) -> EnvConfig:
    """Arms with independent squared-exponential GP sample recovery curves.

    Curves are redrawn per replication (model seeds are left unset).
    """
    kernel = KernelSpec(family="se", lengthscale=lengthscale, signal_variance=1.0)
    models = tuple(RecoveryModel(kind="gp", kernel=kernel) for _ in range(n_arms))
    return EnvConfig(n_arms=n_arms, z_max=z_max, noise_sd=noise_sd, models=models, master_seed=seed)


def table1_policies() -> list[PolicyConfig]:
    """The three desk-scale comparison policies at lookahead depth 1."""
    kernel = KernelSpec(family="se", lengthscale=5.0, signal_variance=1.0)
    return [
        PolicyConfig(kind="rgp_ucb", d=1, kernel=kernel, noise_sd=NOISE_SD),
        PolicyConfig(kind="rgp_ts", d=1, kernel=kernel, noise_sd=NOISE_SD),
        PolicyConfig(kind="ucb_z", d=1, noise_sd=NOISE_SD),
    ]


def table1_experiments(setting: str, reps: int, seed: int) -> list[ExperimentConfig]:
    env = parametric_env(setting, seed)
    return [
        ExperimentConfig(env=env, policy=policy, horizon=HORIZON, replications=reps)
        for policy in table1_policies()
    ]


def figure3_experiment(
    n_arms: int,
    d: int,
    budget: int | None,
    reps: int,
    seed: int,
    horizon: int = HORIZON,
    lengthscale: float = 4.0,
) -> ExperimentConfig:
    """Lookahead Thompson sampling on GP-sampled curves; budget=None is exhaustive."""
    env = gp_env(n_arms=n_arms, lengthscale=lengthscale, seed=seed)
    kernel = KernelSpec(family="se", lengthscale=lengthscale, signal_variance=1.0)
    if budget is None:
        policy = PolicyConfig(kind="rgp_ts", d=d, kernel=kernel, noise_sd=NOISE_SD)
    else:
        policy = PolicyConfig(
            kind="rgp_ts",
            d=d,
            planner="optimistic",
            budget=budget,
            kernel=kernel,
            noise_sd=NOISE_SD,
        )
    return ExperimentConfig(env=env, policy=policy, horizon=horizon, replications=reps)


def posterior_dump_experiment(seed: int, horizon: int = HORIZON) -> ExperimentConfig:
    """Single-replication run used to dump per-arm posterior tables."""
    env = gp_env(n_arms=10, lengthscale=2.0, seed=seed)
    kernel = KernelSpec(family="se", lengthscale=2.0, signal_variance=1.0)
    policy = PolicyConfig(kind="rgp_ucb", d=1, kernel=kernel, noise_sd=NOISE_SD)
    return ExperimentConfig(env=env, policy=policy, horizon=horizon, replications=1)
