"""Depth-d lookahead trees over arm sequences.

A leaf is a sequence of d (arm, covariate-at-play) steps starting from the
current covariate vector; covariates inside the tree follow the same
dynamics as the environment.  With multiple play allowed there are K^d
leaves; with single play, K (K-1) ... (K-d+1).  Leaves are always produced
in lexicographic order of the arm sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .environment import RecoveryModel, advance_covariates, recovery_value
from .exceptions import DepthExceedsArms, TreeTooLarge
from .gp import GpPosterior

ENUMERATION_GUARD = 10_000_000


@dataclass(frozen=True)
class LeafPath:
    """One depth-d arm sequence with the covariate each play lands on."""

    root_z: tuple[int, ...]
    steps: tuple[tuple[int, int], ...]  # (arm, z at play)

    @property
    def arms(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.steps)


@dataclass(frozen=True)
class LeafStats:
    """Posterior aggregate along a leaf: total mean and total variance."""

    eta: float
    var: float


def leaf_count(n_arms: int, d: int, single_play: bool = False) -> int:
    """Number of leaves of the depth-d tree."""
    if single_play:
        if d > n_arms:
            raise DepthExceedsArms(f"single play with d={d} needs at least {d} arms, got {n_arms}")
        count = 1
        for i in range(d):
            count *= n_arms - i
        return count
    return n_arms**d


def _check_guard(n_arms: int, d: int, single_play: bool) -> int:
    count = leaf_count(n_arms, d, single_play)
    if count > ENUMERATION_GUARD:
        raise TreeTooLarge(f"{count} leaves exceed the enumeration guard {ENUMERATION_GUARD}")
    return count


def path_from_arms(root_z: Sequence[int], arms: Sequence[int], z_max: int) -> LeafPath:
    """Replay an arm sequence from root_z, recording the covariate at each play."""
    z = tuple(int(v) for v in root_z)
    root = z
    steps = []
    for arm in arms:
        steps.append((int(arm), z[arm]))
        z = advance_covariates(z, int(arm), z_max)
    return LeafPath(root_z=root, steps=tuple(steps))


def iter_leaves(
    root_z: Sequence[int], d: int, z_max: int, single_play: bool = False
) -> Iterator[LeafPath]:
    """Yield all depth-d leaves in lexicographic arm order."""
    if d < 1:
        raise ValueError("lookahead depth d must be >= 1")
    n_arms = len(root_z)
    if single_play and d > n_arms:
        raise DepthExceedsArms(f"single play with d={d} needs at least {d} arms, got {n_arms}")
    root = tuple(int(v) for v in root_z)

    def rec(z: tuple[int, ...], steps: tuple, used: frozenset[int]) -> Iterator[LeafPath]:
        if len(steps) == d:
            yield LeafPath(root_z=root, steps=steps)
            return
        for arm in range(n_arms):
            if single_play and arm in used:
                continue
            nxt = steps + ((arm, z[arm]),)
            yield from rec(
                advance_covariates(z, arm, z_max),
                nxt,
                used | {arm} if single_play else used,
            )

    yield from rec(root, (), frozenset())


def enumerate_leaves(
    root_z: Sequence[int], d: int, z_max: int, single_play: bool = False
) -> list[LeafPath]:
    """All depth-d leaves as a list, lexicographic in the arm sequence."""
    _check_guard(len(root_z), d, single_play)
    return list(iter_leaves(root_z, d, z_max, single_play))


def leaf_reward_true(path: LeafPath, models: Sequence[RecoveryModel]) -> float:
    """Sum of the true recovery values along the leaf."""
    return sum(recovery_value(models[arm], z) for arm, z in path.steps)


def leaf_stats(path: LeafPath, posteriors: Sequence[GpPosterior]) -> LeafStats:
    """Posterior mean and variance of the leaf's total reward.

    All quantities are taken from the posteriors as frozen at the root; the
    variance sums posterior covariances over same-arm step pairs, including
    the diagonal.
    """
    eta = 0.0
    by_arm: dict[int, list[int]] = {}
    for arm, z in path.steps:
        eta += posteriors[arm].mean_var(z)[0]
        by_arm.setdefault(arm, []).append(z)
    var = 0.0
    for arm, zs in by_arm.items():
        post = posteriors[arm]
        for i, zi in enumerate(zs):
            var += post.mean_var(zi)[1]
            for zj in zs[i + 1 :]:
                var += 2.0 * post.cov(zi, zj)
    return LeafStats(eta=eta, var=var)


def best_leaf_exhaustive(
    root_z: Sequence[int],
    d: int,
    z_max: int,
    value_fn: Callable[[LeafPath], float],
    single_play: bool = False,
) -> tuple[LeafPath, float]:
    """Argmax of value_fn over all leaves; first leaf in lexicographic order wins ties."""
    _check_guard(len(root_z), d, single_play)
    best_path = None
    best_value = -np.inf
    for path in iter_leaves(root_z, d, z_max, single_play):
        value = float(value_fn(path))
        if value > best_value:
            best_path, best_value = path, value
    assert best_path is not None
    return best_path, best_value


# Above this many leaves the vectorized search recurses over the first arm
# instead of materializing the whole (leaves x arms) covariate array.
_VECTOR_CHUNK = 2_000_000


def _table_argmax_arms(tables: np.ndarray, root_z: tuple[int, ...], d: int, z_max: int) -> tuple[float, tuple[int, ...]]:
    n_arms = tables.shape[0]
    if n_arms**d > _VECTOR_CHUNK:
        best_value = -np.inf
        best_arms: tuple[int, ...] = ()
        for arm in range(n_arms):
            head = float(tables[arm, root_z[arm]])
            sub_value, sub_arms = _table_argmax_arms(
                tables, advance_covariates(root_z, arm, z_max), d - 1, z_max
            )
            if head + sub_value > best_value:
                best_value = head + sub_value
                best_arms = (arm,) + sub_arms
        return best_value, best_arms
    arm_idx = np.arange(n_arms)
    z = np.asarray(root_z, dtype=np.int64).reshape(1, -1)
    values = np.zeros(1)
    for _ in range(d):
        step_vals = tables[arm_idx[None, :], z]  # (paths, K)
        values = (values[:, None] + step_vals).reshape(-1)
        z = np.repeat(z, n_arms, axis=0)
        z = np.minimum(z + 1, z_max)
        z[np.arange(z.shape[0]), np.tile(arm_idx, z.shape[0] // n_arms)] = 0
    best = int(np.argmax(values))
    arms = []
    for _ in range(d):
        arms.append(best % n_arms)
        best //= n_arms
    arms.reverse()
    return float(values[int(np.argmax(values))]), tuple(arms)


def best_leaf_table(tables: np.ndarray, root_z: Sequence[int], d: int, z_max: int) -> tuple[LeafPath, float]:
    """Vectorized multiple-play argmax when the leaf value is a sum of per-arm tables.

    ``tables[j, z]`` is the value of playing arm j at covariate z.  Returns
    the same (leaf, value) as best_leaf_exhaustive with the summed-table
    value function; ties resolve to the lexicographically first arm
    sequence.  Used for sampled-table and true-model leaf searches.
    """
    n_arms = len(root_z)
    _check_guard(n_arms, d, False)
    root = tuple(int(v) for v in root_z)
    value, arms = _table_argmax_arms(tables, root, d, z_max)
    return path_from_arms(root, arms, z_max), value
