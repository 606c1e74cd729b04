"""Recovering-bandit environments.

Each arm j carries a recovery function f_j over the covariate z = number of
rounds since the arm was last played (capped at z_max).  Playing an arm
yields its recovery value at the current covariate plus Gaussian noise and
resets that covariate to zero; all other covariates increase by one, capped
at z_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigError
from .kernels import KernelSpec, cholesky_with_jitter, gram
from .rng import MODEL_STREAM, substream

MODEL_KINDS = ("logistic", "gamma", "gp")


@dataclass(frozen=True)
class RecoveryModel:
    """One arm's recovery function.

    ``table`` holds f(z) for z = 0..z_max once the model is realized.  A
    ``gp`` model with seed=None stays unrealized until the harness draws its
    curve from a replication-specific stream.
    """

    kind: str
    theta: tuple[float, float, float] | None = None
    kernel: KernelSpec | None = None
    seed: int | None = None
    table: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown recovery model kind {self.kind!r}")
        if self.kind in ("logistic", "gamma"):
            if self.theta is None or len(self.theta) != 3:
                raise ConfigError(f"{self.kind} model needs theta = (theta0, theta1, theta2)")
        if self.kind == "gp" and self.kernel is None:
            raise ConfigError("gp model needs a kernel spec")

    def realize(self, z_max: int, rng: np.random.Generator | None = None) -> "RecoveryModel":
        """Return a copy with the value table filled for z = 0..z_max."""
        if self.table is not None and len(self.table) == z_max + 1:
            return self
        zs = np.arange(z_max + 1)
        if self.kind == "logistic":
            t0, t1, t2 = self.theta
            table = t0 / (1.0 + np.exp(-t1 * (zs - t2)))
        elif self.kind == "gamma":
            t0, t1, t2 = self.theta
            table = t0 * _gamma_peak_norm(t1, t2) * np.exp(-t1 * zs) * np.power(zs, float(t2))
        else:
            if rng is None:
                if self.seed is None:
                    raise ConfigError("gp model with no seed must be realized with an explicit rng")
                rng = substream(self.seed, MODEL_STREAM)
            factor, _ = cholesky_with_jitter(gram(self.kernel, zs), scale=self.kernel.signal_variance)
            table = factor @ rng.standard_normal(z_max + 1)
        return replace(self, table=table)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.theta is not None:
            d["theta"] = list(self.theta)
        if self.kernel is not None:
            d["kernel"] = self.kernel.to_dict()
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RecoveryModel":
        theta = d.get("theta")
        return cls(
            kind=d["kind"],
            theta=tuple(float(x) for x in theta) if theta is not None else None,
            kernel=KernelSpec.from_dict(d["kernel"]) if "kernel" in d else None,
            seed=d.get("seed"),
        )


def _gamma_peak_norm(t1: float, t2: float) -> float:
    """Normalizer making the continuous-z peak of exp(-t1 z) z^t2 equal 1.

    The peak sits at z* = t2 / t1, so theta0 is the peak height of the full
    recovery function.  For t2 == 0 the curve is monotone decreasing and the
    normalizer is 1.
    """
    if t1 <= 0:
        raise ConfigError(f"gamma model needs theta1 > 0, got {t1}")
    if t2 < 0:
        raise ConfigError(f"gamma model needs theta2 >= 0, got {t2}")
    if t2 == 0:
        return 1.0
    return math.exp(t2) * (t1 / t2) ** t2


def recovery_value(model: RecoveryModel, z: int) -> float:
    """True expected reward of the arm at covariate z."""
    if model.table is None:
        raise ConfigError("model is not realized; call realize() first")
    if not 0 <= z < len(model.table):
        raise ValueError(f"covariate {z} outside the grid 0..{len(model.table) - 1}")
    return float(model.table[z])


@dataclass(frozen=True)
class EnvConfig:
    """Environment description: arms, covariate grid, noise, seed."""

    n_arms: int
    z_max: int
    noise_sd: float
    models: tuple[RecoveryModel, ...]
    initial_z: tuple[int, ...] | None = None
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_arms < 1:
            raise ConfigError("n_arms must be >= 1")
        if self.z_max < 1:
            raise ConfigError("z_max must be >= 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if len(self.models) != self.n_arms:
            raise ConfigError(f"got {len(self.models)} models for {self.n_arms} arms")
        if self.initial_z is not None:
            if len(self.initial_z) != self.n_arms:
                raise ConfigError("initial_z length must equal n_arms")
            if any(not 0 <= z <= self.z_max for z in self.initial_z):
                raise ConfigError("initial_z entries must lie in 0..z_max")

    def start_z(self) -> tuple[int, ...]:
        if self.initial_z is not None:
            return tuple(int(z) for z in self.initial_z)
        return (0,) * self.n_arms

    def to_dict(self) -> dict:
        d: dict = {
            "n_arms": self.n_arms,
            "z_max": self.z_max,
            "noise_sd": self.noise_sd,
            "models": [m.to_dict() for m in self.models],
            "master_seed": self.master_seed,
        }
        if self.initial_z is not None:
            d["initial_z"] = list(self.initial_z)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        try:
            models = tuple(RecoveryModel.from_dict(m) for m in d["models"])
            return cls(
                n_arms=int(d["n_arms"]),
                z_max=int(d["z_max"]),
                noise_sd=float(d["noise_sd"]),
                models=models,
                initial_z=tuple(int(z) for z in d["initial_z"]) if "initial_z" in d else None,
                master_seed=int(d.get("master_seed", 0)),
            )
        except KeyError as exc:
            raise ConfigError(f"env config missing key {exc.args[0]!r}") from None


@dataclass(frozen=True)
class EnvState:
    """Covariate vector and the 1-based index of the round about to be played."""

    z: tuple[int, ...]
    t: int = 1


def advance_covariates(z: tuple[int, ...], played: int, z_max: int) -> tuple[int, ...]:
    """Next covariate vector: played arm resets to 0, others age by 1 (capped)."""
    if not 0 <= played < len(z):
        raise ValueError(f"arm {played} out of range for {len(z)} arms")
    return tuple(0 if j == played else min(zj + 1, z_max) for j, zj in enumerate(z))


def env_step(
    state: EnvState, config: EnvConfig, played: int, rng: np.random.Generator
) -> tuple[float, EnvState]:
    """Play one arm: return the noisy reward and the advanced state."""
    z_at_play = state.z[played]
    value = recovery_value(config.models[played], z_at_play)
    reward = value + config.noise_sd * float(rng.standard_normal())
    return reward, EnvState(z=advance_covariates(state.z, played, config.z_max), t=state.t + 1)
