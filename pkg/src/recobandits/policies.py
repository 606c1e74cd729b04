"""Arm-selection policies for recovering bandits.

The two GP policies plan d rounds at a time over the lookahead tree, using
per-arm GP posteriors that are frozen while a block is being played and
updated with the block's observations at the next block boundary:

* ``rgp_ucb`` maximizes eta + alpha_t * sqrt(var) over leaves (exhaustive
  search only);
* ``rgp_ts`` draws one joint posterior sample per arm at every covariate a
  depth-d plan can touch and maximizes the sampled leaf value, either
  exhaustively or with the budgeted optimistic planner.

``ucb_z`` is a per-(arm, covariate) UCB1-style baseline with an explicit
initialization schedule, and ``oracle`` plays the exact depth-d optimum of
the true recovery functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .environment import RecoveryModel
from .exceptions import ConfigError, DepthExceedsArms
from .gp import GpPosterior
from .kernels import KernelSpec
from .lookahead import (
    LeafPath,
    best_leaf_exhaustive,
    best_leaf_table,
    leaf_reward_true,
    leaf_stats,
)
from .planner import PlanResult, SampleTable, op_search, sample_points

POLICY_KINDS = ("rgp_ucb", "rgp_ts", "ucb_z", "oracle")
PLANNERS = ("exhaustive", "optimistic")


@dataclass(frozen=True)
class PolicyConfig:
    """Which policy to run and with what lookahead structure."""

    kind: str
    d: int = 1
    single_play: bool = False
    planner: str = "exhaustive"
    budget: int | None = None
    kernel: KernelSpec | None = None
    noise_sd: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}, expected one of {POLICY_KINDS}")
        if self.d < 1:
            raise ConfigError("lookahead depth d must be >= 1")
        if self.planner not in PLANNERS:
            raise ConfigError(f"unknown planner {self.planner!r}")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if self.planner == "optimistic":
            if self.kind == "rgp_ucb":
                raise ConfigError("rgp_ucb plans exhaustively; the optimistic planner is sample-based")
            if self.single_play:
                raise ConfigError("the optimistic planner only supports multiple play")
            if self.budget is None or self.budget < 1:
                raise ConfigError("the optimistic planner needs an expansion budget >= 1")
        elif self.budget is not None:
            raise ConfigError("budget only applies to the optimistic planner")
        if self.kind in ("rgp_ucb", "rgp_ts") and self.kernel is None:
            raise ConfigError(f"{self.kind} needs a kernel spec")

    @property
    def label(self) -> str:
        if self.kind == "rgp_ucb":
            return f"{self.d}rgp-ucb"
        if self.kind == "rgp_ts":
            return f"{self.d}rgp-ts"
        if self.kind == "ucb_z":
            return "ucb-z"
        return f"{self.d}-step-oracle"

    def to_dict(self) -> dict:
        d: dict = {
            "kind": self.kind,
            "d": self.d,
            "single_play": self.single_play,
            "planner": self.planner,
            "noise_sd": self.noise_sd,
        }
        if self.budget is not None:
            d["budget"] = self.budget
        if self.kernel is not None:
            d["kernel"] = self.kernel.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        try:
            return cls(
                kind=d["kind"],
                d=int(d.get("d", 1)),
                single_play=bool(d.get("single_play", False)),
                planner=d.get("planner", "exhaustive"),
                budget=int(d["budget"]) if "budget" in d and d["budget"] is not None else None,
                kernel=KernelSpec.from_dict(d["kernel"]) if "kernel" in d else None,
                noise_sd=float(d.get("noise_sd", 0.1)),
            )
        except KeyError as exc:
            raise ConfigError(f"policy config missing key {exc.args[0]!r}") from None


def alpha_t(n_arms: int, z_card: int, d: int, t: int) -> float:
    """Width multiplier of the d-step UCB at round t.

    sqrt(2 log((K |Z|)^d (t + d - 1)^2)) with |Z| = z_max + 1, evaluated in
    log space so large K, |Z|, d cannot overflow.
    """
    if min(n_arms, z_card, d, t) < 1:
        raise ValueError("alpha_t arguments must all be >= 1")
    return math.sqrt(2.0 * (d * math.log(n_arms * z_card) + 2.0 * math.log(t + d - 1)))


def ucb_select(
    posteriors: Sequence[GpPosterior],
    root_z: Sequence[int],
    cfg: PolicyConfig,
    z_max: int,
    t: int,
) -> LeafPath:
    """Leaf with the largest eta + alpha_t * sqrt(var); exhaustive search."""
    if cfg.planner != "exhaustive":
        raise ConfigError("ucb_select requires the exhaustive planner")
    alpha = alpha_t(len(posteriors), z_max + 1, cfg.d, t)

    def value(path: LeafPath) -> float:
        stats = leaf_stats(path, posteriors)
        return stats.eta + alpha * math.sqrt(max(stats.var, 0.0))

    leaf, _ = best_leaf_exhaustive(root_z, cfg.d, z_max, value, cfg.single_play)
    return leaf


def ts_select(
    posteriors: Sequence[GpPosterior],
    root_z: Sequence[int],
    cfg: PolicyConfig,
    z_max: int,
    rng: np.random.Generator,
    return_plan: bool = False,
):
    """Thompson-sampling leaf choice.

    Per arm, one joint posterior draw at the deduplicated, z_max-capped
    covariates a depth-d plan can touch; the leaf maximizes the summed
    sampled values, searched exhaustively or by the optimistic planner.
    Returns (leaf, table), plus the PlanResult (or None) when
    ``return_plan`` is set.
    """
    points = sample_points(root_z, cfg.d, z_max)
    values = []
    for arm, post in enumerate(posteriors):
        draws = post.joint_sample(points[arm], rng)
        values.append({z: float(v) for z, v in zip(points[arm], draws)})
    table = SampleTable(values=tuple(values), z_max=z_max)
    plan: PlanResult | None = None
    if cfg.planner == "optimistic":
        plan = op_search(table, root_z, cfg.d, cfg.budget)
        leaf = plan.leaf
    elif cfg.single_play:
        leaf, _ = best_leaf_exhaustive(
            root_z,
            cfg.d,
            z_max,
            lambda p: sum(table.value(a, z) for a, z in p.steps),
            single_play=True,
        )
    else:
        leaf, _ = best_leaf_table(table.dense(), root_z, cfg.d, z_max)
    if return_plan:
        return leaf, table, plan
    return leaf, table


class UcbZState:
    """Counts and running means per (arm, covariate), plus the init schedule.

    The schedule visits every reachable (arm, z) pair once, arm-major with z
    increasing; while waiting for a target covariate to come up, the policy
    replays the already-initialized arm with the largest current covariate.
    """

    def __init__(self, n_arms: int, z_max: int):
        self.counts = np.zeros((n_arms, z_max + 1), dtype=np.int64)
        self.means = np.zeros((n_arms, z_max + 1))
        self.schedule = tuple((j, z) for j in range(n_arms) for z in range(z_max + 1))

    def observe(self, arm: int, z: int, y: float) -> None:
        """Fold one observed reward into the (arm, z) cell."""
        n = self.counts[arm, z] + 1
        self.counts[arm, z] = n
        self.means[arm, z] += (y - self.means[arm, z]) / n

    def next_target(self, n_arms: int) -> tuple[int, int] | None:
        for j, z in self.schedule:
            if n_arms == 1 and z > 0:
                continue  # unreachable: a lone arm is played every round
            if self.counts[j, z] == 0:
                return j, z
        return None


def ucbz_select(
    state: UcbZState,
    root_z: Sequence[int],
    t: int,
    horizon: int,
    noise_sd: float,
) -> int:
    """Arm choice of the per-(arm, covariate) UCB baseline at round t."""
    n_arms = len(root_z)
    target = state.next_target(n_arms)
    if target is not None:
        j, z_target = target
        if root_z[j] >= z_target:
            # At (or past) the target covariate: play it now (past caps get
            # resampled on the way back up).
            return j
        initialized = [a for a in range(n_arms) if a != j and state.counts[a, root_z[a]] > 0]
        pool = initialized if initialized else [a for a in range(n_arms) if a != j]
        return max(pool, key=lambda a: (root_z[a], -a))
    bonus_sq = noise_sd**2 * (2.0 + 6.0 * math.log(horizon))
    best_arm = 0
    best_u = -math.inf
    for j in range(n_arms):
        n = state.counts[j, root_z[j]]
        u = math.inf if n == 0 else state.means[j, root_z[j]] + math.sqrt(bonus_sq / n)
        if u > best_u:
            best_arm, best_u = j, u
    return best_arm


def oracle_select(
    models: Sequence[RecoveryModel],
    root_z: Sequence[int],
    d: int,
    z_max: int,
    single_play: bool = False,
) -> LeafPath:
    """Exact depth-d optimum of the true recovery functions."""
    if single_play:
        leaf, _ = best_leaf_exhaustive(
            root_z, d, z_max, lambda p: leaf_reward_true(p, models), single_play=True
        )
        return leaf
    tables = np.stack([m.table for m in models])
    leaf, _ = best_leaf_table(tables, root_z, d, z_max)
    return leaf


# ----------------------------------------------------------------------
# Stateful adapters driven one round at a time by the harness.


class BlockPolicy:
    """Common plumbing: plan a block of d arms, replay it, update at block end."""

    def __init__(self, cfg: PolicyConfig, n_arms: int, z_max: int, horizon: int):
        if cfg.single_play and cfg.d > n_arms:
            raise DepthExceedsArms(f"single play with d={cfg.d} needs at least {cfg.d} arms")
        self.cfg = cfg
        self.n_arms = n_arms
        self.z_max = z_max
        self.horizon = horizon
        self.plan_depths: list[int] = []
        self.plan_expansions: list[int] = []
        self._queue: list[int] = []
        self._pending: list[tuple[int, int, float]] = []

    def _plan(self, z: tuple[int, ...], t: int) -> list[int]:
        raise NotImplementedError

    def _flush(self, observations: list[tuple[int, int, float]]) -> None:
        del observations

    def choose(self, z: tuple[int, ...], t: int) -> int:
        if not self._queue:
            if self._pending:
                self._flush(self._pending)
                self._pending = []
            self._queue = list(self._plan(z, t))
        return self._queue.pop(0)

    def record(self, arm: int, z_at_play: int, reward: float, t: int) -> None:
        self._pending.append((arm, z_at_play, reward))


class RgpUcbPolicy(BlockPolicy):
    def __init__(self, cfg: PolicyConfig, n_arms: int, z_max: int, horizon: int):
        super().__init__(cfg, n_arms, z_max, horizon)
        grid = z_max if cfg.noise_sd > 0 else None
        self.posteriors = [
            GpPosterior(cfg.kernel, cfg.noise_sd, grid_z_max=grid) for _ in range(n_arms)
        ]

    def _plan(self, z: tuple[int, ...], t: int) -> list[int]:
        leaf = ucb_select(self.posteriors, z, self.cfg, self.z_max, t)
        return list(leaf.arms)

    def _flush(self, observations: list[tuple[int, int, float]]) -> None:
        for arm, z, y in observations:
            self.posteriors[arm] = self.posteriors[arm].append(z, y)

    def posterior_snapshot(self) -> list[GpPosterior]:
        """Posteriors including observations not yet folded in at a block boundary."""
        posts = list(self.posteriors)
        for arm, z, y in self._pending:
            posts[arm] = posts[arm].append(z, y)
        return posts


class RgpTsPolicy(RgpUcbPolicy):
    def __init__(
        self, cfg: PolicyConfig, n_arms: int, z_max: int, horizon: int, rng: np.random.Generator
    ):
        super().__init__(cfg, n_arms, z_max, horizon)
        self.rng = rng

    def _plan(self, z: tuple[int, ...], t: int) -> list[int]:
        leaf, _, plan = ts_select(
            self.posteriors, z, self.cfg, self.z_max, self.rng, return_plan=True
        )
        if plan is not None:
            self.plan_depths.append(plan.depth_reached)
            self.plan_expansions.append(plan.nodes_expanded)
        return list(leaf.arms)


class UcbZPolicy(BlockPolicy):
    def __init__(self, cfg: PolicyConfig, n_arms: int, z_max: int, horizon: int):
        super().__init__(cfg, n_arms, z_max, horizon)
        self.state = UcbZState(n_arms, z_max)

    def choose(self, z: tuple[int, ...], t: int) -> int:
        # Per-round rule; blocks only matter for regret accounting.
        return ucbz_select(self.state, z, t, self.horizon, self.cfg.noise_sd)

    def record(self, arm: int, z_at_play: int, reward: float, t: int) -> None:
        self.state.observe(arm, z_at_play, reward)


class OraclePolicy(BlockPolicy):
    def __init__(
        self,
        cfg: PolicyConfig,
        n_arms: int,
        z_max: int,
        horizon: int,
        models: Sequence[RecoveryModel],
    ):
        super().__init__(cfg, n_arms, z_max, horizon)
        self.models = models

    def _plan(self, z: tuple[int, ...], t: int) -> list[int]:
        leaf = oracle_select(self.models, z, self.cfg.d, self.z_max, self.cfg.single_play)
        return list(leaf.arms)


def make_policy(
    cfg: PolicyConfig,
    n_arms: int,
    z_max: int,
    horizon: int,
    rng: np.random.Generator,
    models: Sequence[RecoveryModel] | None = None,
) -> BlockPolicy:
    """Instantiate the stateful adapter for one episode."""
    if cfg.kind == "rgp_ucb":
        return RgpUcbPolicy(cfg, n_arms, z_max, horizon)
    if cfg.kind == "rgp_ts":
        return RgpTsPolicy(cfg, n_arms, z_max, horizon, rng)
    if cfg.kind == "ucb_z":
        return UcbZPolicy(cfg, n_arms, z_max, horizon)
    if models is None:
        raise ConfigError("the oracle policy needs the true recovery models")
    return OraclePolicy(cfg, n_arms, z_max, horizon, models)
