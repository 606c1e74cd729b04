"""Episode execution, regret accounting, and batch experiment runs.

Time is split into blocks of d rounds.  At each block start the policy
commits to d arms; the comparator is the exact depth-d optimum of the true
recovery functions evaluated at the covariates the policy actually reached,
so regret measures planning quality, not trajectory divergence.  The final
block is truncated to the rounds that remain and scored against the
truncated-depth optimum.  Instantaneous regret uses the depth-1 optimum at
every realized covariate vector.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .environment import EnvConfig, EnvState, env_step, recovery_value
from .exceptions import ConfigError, IoFailure
from .policies import PolicyConfig, make_policy, oracle_select
from .lookahead import leaf_reward_true
from .rng import MODEL_STREAM, NOISE_STREAM, POLICY_STREAM, substream

WORKERS_ENV_VAR = "RECOBANDITS_WORKERS"


def version_string() -> str:
    try:
        from importlib.metadata import version

        return f"recobandits-{version('recobandits')}"
    except Exception:
        return "recobandits-unknown"


@dataclass(frozen=True)
class RoundRecord:
    """One played round."""

    t: int
    arm: int
    z_at_play: int
    reward: float
    true_value: float
    inst_best: float  # depth-1 optimum at this round's realized covariates


@dataclass(frozen=True)
class BlockRecord:
    """One lookahead block: the oracle's value and the policy's true value."""

    index: int
    start_t: int
    length: int
    m_star: float
    m_played: float


@dataclass(frozen=True)
class TrajectoryRecord:
    """Everything one episode produced."""

    rep: int
    rounds: tuple[RoundRecord, ...]
    blocks: tuple[BlockRecord, ...]
    plan_depths: tuple[int, ...] = ()
    plan_expansions: tuple[int, ...] = ()


@dataclass(frozen=True)
class RegretCurve:
    """Cumulative regret series derived from one trajectory."""

    block_end_rounds: tuple[int, ...]
    lookahead_cum: tuple[float, ...]
    rounds: tuple[int, ...]
    instant_cum: tuple[float, ...]
    total_reward: float

    @property
    def final_lookahead(self) -> float:
        return self.lookahead_cum[-1] if self.lookahead_cum else 0.0

    @property
    def final_instant(self) -> float:
        return self.instant_cum[-1] if self.instant_cum else 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: environment, policy, horizon, replication count."""

    env: EnvConfig
    policy: PolicyConfig
    horizon: int
    replications: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")

    def to_dict(self) -> dict:
        return {
            "env": self.env.to_dict(),
            "policy": self.policy.to_dict(),
            "horizon": self.horizon,
            "replications": self.replications,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls(
                env=EnvConfig.from_dict(d["env"]),
                policy=PolicyConfig.from_dict(d["policy"]),
                horizon=int(d["horizon"]),
                replications=int(d.get("replications", 1)),
            )
        except KeyError as exc:
            raise ConfigError(f"experiment config missing key {exc.args[0]!r}") from None


def realize_env(cfg: EnvConfig, rep: int) -> EnvConfig:
    """Fill in value tables; unseeded GP curves draw from the replication stream."""
    models = []
    for arm, model in enumerate(cfg.models):
        if model.kind == "gp" and model.seed is None:
            rng = substream(cfg.master_seed, MODEL_STREAM, rep, arm)
            models.append(model.realize(cfg.z_max, rng))
        else:
            models.append(model.realize(cfg.z_max))
    return replace(cfg, models=tuple(models))


def run_episode(
    cfg: ExperimentConfig,
    rep: int = 0,
    round_hook: Callable[[int, object], None] | None = None,
) -> TrajectoryRecord:
    """Play one episode of ``horizon`` rounds; deterministic in (seed, rep).

    ``round_hook(t, policy)`` is called after each round has been recorded,
    which is how posterior snapshots are extracted.
    """
    env = realize_env(cfg.env, rep)
    noise_rng = substream(env.master_seed, NOISE_STREAM, rep)
    policy_rng = substream(env.master_seed, POLICY_STREAM, rep)
    policy = make_policy(
        cfg.policy, env.n_arms, env.z_max, cfg.horizon, policy_rng, models=env.models
    )
    d = cfg.policy.d
    tables = np.stack([m.table for m in env.models])
    state = EnvState(z=env.start_z(), t=1)
    rounds: list[RoundRecord] = []
    blocks: list[BlockRecord] = []
    block_true = 0.0
    for t in range(1, cfg.horizon + 1):
        if (t - 1) % d == 0:
            if blocks and block_true != blocks[-1].m_played:
                blocks[-1] = replace(blocks[-1], m_played=block_true)
            length = min(d, cfg.horizon - t + 1)
            oracle_leaf = oracle_select(
                env.models, state.z, length, env.z_max, cfg.policy.single_play
            )
            blocks.append(
                BlockRecord(
                    index=len(blocks),
                    start_t=t,
                    length=length,
                    m_star=leaf_reward_true(oracle_leaf, env.models),
                    m_played=0.0,
                )
            )
            block_true = 0.0
        inst_best = float(tables[np.arange(env.n_arms), list(state.z)].max())
        arm = policy.choose(state.z, t)
        z_at_play = state.z[arm]
        true_value = recovery_value(env.models[arm], z_at_play)
        reward, state = env_step(state, env, arm, noise_rng)
        policy.record(arm, z_at_play, reward, t)
        block_true += true_value
        rounds.append(
            RoundRecord(
                t=t,
                arm=arm,
                z_at_play=z_at_play,
                reward=reward,
                true_value=true_value,
                inst_best=inst_best,
            )
        )
        if round_hook is not None:
            round_hook(t, policy)
    if blocks:
        blocks[-1] = replace(blocks[-1], m_played=block_true)
    return TrajectoryRecord(
        rep=rep,
        rounds=tuple(rounds),
        blocks=tuple(blocks),
        plan_depths=tuple(policy.plan_depths),
        plan_expansions=tuple(policy.plan_expansions),
    )


def regret_from_trajectory(traj: TrajectoryRecord) -> RegretCurve:
    """Cumulative lookahead regret per block and instantaneous regret per round."""
    lookahead = []
    block_ends = []
    acc = 0.0
    for block in traj.blocks:
        acc += block.m_star - block.m_played
        lookahead.append(acc)
        block_ends.append(block.start_t + block.length - 1)
    instant = []
    rounds = []
    acc = 0.0
    for row in traj.rounds:
        acc += row.inst_best - row.true_value
        instant.append(acc)
        rounds.append(row.t)
    total = sum(row.reward for row in traj.rounds)
    return RegretCurve(
        block_end_rounds=tuple(block_ends),
        lookahead_cum=tuple(lookahead),
        rounds=tuple(rounds),
        instant_cum=tuple(instant),
        total_reward=total,
    )


@dataclass(frozen=True)
class ReplicationSummary:
    rep: int
    total_reward: float
    final_lookahead_regret: float
    final_instant_regret: float
    mean_plan_depth: float
    final_plan_depth: float


@dataclass(frozen=True)
class BatchResult:
    """All replications of one experiment, in replication order."""

    config: ExperimentConfig
    replications: tuple[ReplicationSummary, ...]
    curves: tuple[RegretCurve, ...] = ()

    def mean_ci(self, values: Sequence[float]) -> tuple[float, float, float]:
        """Mean and normal-approximation 95% interval."""
        arr = np.asarray(values, dtype=float)
        mean = float(arr.mean())
        if arr.size < 2:
            return mean, mean, mean
        half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(arr.size)
        return mean, mean - half, mean + half

    @property
    def total_rewards(self) -> list[float]:
        return [r.total_reward for r in self.replications]

    @property
    def final_lookahead_regrets(self) -> list[float]:
        return [r.final_lookahead_regret for r in self.replications]


def _run_one(args: tuple[ExperimentConfig, int]) -> ReplicationSummary:
    cfg, rep = args
    traj = run_episode(cfg, rep)
    curve = regret_from_trajectory(traj)
    depths = traj.plan_depths
    return ReplicationSummary(
        rep=rep,
        total_reward=curve.total_reward,
        final_lookahead_regret=curve.final_lookahead,
        final_instant_regret=curve.final_instant,
        mean_plan_depth=float(np.mean(depths)) if depths else float("nan"),
        final_plan_depth=float(depths[-1]) if depths else float("nan"),
    )


def resolve_workers(n_workers: int | None) -> int:
    if n_workers is None:
        env_val = os.environ.get(WORKERS_ENV_VAR)
        n_workers = int(env_val) if env_val else 1
    if n_workers < 1:
        raise ConfigError("worker count must be >= 1")
    return n_workers


def run_batch(
    cfg: ExperimentConfig,
    n_workers: int | None = None,
    keep_curves: bool = False,
) -> BatchResult:
    """Run all replications; results are ordered by replication index.

    Replications use independent derived streams, so the outcome is
    byte-identical for any worker count.  ``n_workers`` defaults to the
    RECOBANDITS_WORKERS environment variable, then 1.
    """
    n_workers = resolve_workers(n_workers)
    reps = range(cfg.replications)
    if keep_curves:
        summaries = []
        curves = []
        for rep in reps:
            traj = run_episode(cfg, rep)
            curve = regret_from_trajectory(traj)
            curves.append(curve)
            depths = traj.plan_depths
            summaries.append(
                ReplicationSummary(
                    rep=rep,
                    total_reward=curve.total_reward,
                    final_lookahead_regret=curve.final_lookahead,
                    final_instant_regret=curve.final_instant,
                    mean_plan_depth=float(np.mean(depths)) if depths else float("nan"),
                    final_plan_depth=float(depths[-1]) if depths else float("nan"),
                )
            )
        return BatchResult(config=cfg, replications=tuple(summaries), curves=tuple(curves))
    if n_workers == 1 or cfg.replications == 1:
        summaries = [_run_one((cfg, rep)) for rep in reps]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            summaries = list(pool.map(_run_one, [(cfg, rep) for rep in reps]))
    summaries.sort(key=lambda s: s.rep)
    return BatchResult(config=cfg, replications=tuple(summaries))


def write_batch_outputs(result: BatchResult, out_dir: str | Path, stem: str) -> list[Path]:
    """Write per-replication totals, the aggregate summary, and a JSON sidecar."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        reps_path = out / f"{stem}_replications.csv"
        with open(reps_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["rep", "total_reward", "final_lookahead_regret", "final_instant_regret"]
            )
            for r in result.replications:
                writer.writerow(
                    [r.rep, r.total_reward, r.final_lookahead_regret, r.final_instant_regret]
                )
        summary_path = out / f"{stem}_summary.csv"
        with open(summary_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "mean", "ci_lo", "ci_hi"])
            for name, series in (
                ("total_reward", result.total_rewards),
                ("final_lookahead_regret", result.final_lookahead_regrets),
            ):
                mean, lo, hi = result.mean_ci(series)
                writer.writerow([name, mean, lo, hi])
        sidecar = out / f"{stem}.json"
        _write_sidecar(sidecar, result.config.to_dict())
        return [reps_path, summary_path, sidecar]
    except OSError as exc:
        raise IoFailure(f"cannot write outputs under {out}: {exc}") from exc


def _write_sidecar(path: Path, config_echo: dict) -> None:
    payload = {"version": version_string(), "config": config_echo}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_rows_csv(path: str | Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(header))
            for row in rows:
                writer.writerow(list(row))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def write_sidecar(path: str | Path, config_echo: dict) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_sidecar(path, config_echo)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path
