"""Budgeted optimistic planning over a sampled reward table.

The planner searches the depth-d lookahead tree best-first.  Each node i
(a partial arm sequence) carries the accumulated sampled reward u(i) and an
optimistic bound b(i) = u(i) + psi(z(i), d - depth(i)), where psi bounds the
best achievable continuation: psi(z, l) = l * max_j g_j(z_j, l) and
g_j(z, l) is the largest table value arm j can reach within the next l
steps.  Expanding the max-b frontier node preserves the invariant that some
frontier node covers the optimal leaf, so when a depth-d node is selected
the search has found an exact optimum and stops early.  On budget
exhaustion the deepest node discovered (expanded or frontier) with the
largest bound is returned and extended greedily to a full depth-d play
sequence.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .environment import advance_covariates
from .exceptions import InvalidLambda
from .lookahead import LeafPath, path_from_arms

__all__ = [
    "SampleTable",
    "PlanNode",
    "PlanResult",
    "sample_points",
    "g_max",
    "psi",
    "op_search",
    "op_error_bound",
]


@dataclass(frozen=True)
class SampleTable:
    """Per-arm sampled values of the recovery functions.

    ``values[j]`` maps each covariate the planner can touch for arm j to one
    sampled function value.  The domain for a depth-d search from root
    covariates Z is {Z_j, ..., Z_j + d} union {0, ..., d}, capped at z_max:
    plays can land on any of the first d of each range, and the optimistic
    bound additionally inspects one step past both.
    """

    values: tuple[dict[int, float], ...]
    z_max: int

    @property
    def n_arms(self) -> int:
        return len(self.values)

    def value(self, arm: int, z: int) -> float:
        return self.values[arm][z]

    def flat_values(self) -> np.ndarray:
        return np.array([v for per_arm in self.values for v in per_arm.values()])

    def dense(self) -> np.ndarray:
        """(n_arms, z_max + 1) array with unsampled entries set to -inf."""
        out = np.full((self.n_arms, self.z_max + 1), -np.inf)
        for arm, per_arm in enumerate(self.values):
            for z, val in per_arm.items():
                out[arm, z] = val
        return out


def sample_points(root_z: Sequence[int], d: int, z_max: int) -> list[list[int]]:
    """Covariates each arm's function must be sampled at for a depth-d plan."""
    shared = set(range(0, min(d, z_max) + 1))
    points = []
    for zj in root_z:
        own = {min(int(zj) + m, z_max) for m in range(d + 1)}
        points.append(sorted(own | shared))
    return points


def g_max(table: SampleTable, arm: int, z: int, l: int) -> float:
    """Best sampled value arm ``arm`` can reach within the next ``l`` steps.

    Covers playing the arm after waiting 0..l further rounds from covariate
    z, and any covariate reachable after an intermediate reset; indices are
    capped at z_max.
    """
    if l < 1:
        raise ValueError("g_max needs l >= 1")
    per_arm = table.values[arm]
    zm = table.z_max
    best = -math.inf
    for m in range(l + 1):
        best = max(best, per_arm[min(z + m, zm)], per_arm[min(m, zm)])
    return best


def psi(table: SampleTable, z_vec: Sequence[int], remaining: int) -> float:
    """Optimistic bound on the total sampled reward of ``remaining`` more plays."""
    if remaining == 0:
        return 0.0
    return remaining * max(g_max(table, arm, z, remaining) for arm, z in enumerate(z_vec))


@dataclass(frozen=True)
class PlanNode:
    """A partial arm sequence in the search tree."""

    path: tuple[int, ...]
    u: float
    b: float
    z: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class PlanResult:
    """Outcome of one optimistic-planning search.

    ``leaf`` always has full depth d so the caller has d arms to play.  When
    the budget ran out at depth_reached < d, the tail beyond depth_reached
    is a greedy completion (largest g_max arm at each step) and
    ``greedy_completed`` is set.  ``value`` is the sampled value of the full
    returned leaf; with ``stopped_early`` it equals the exact tree optimum.
    """

    leaf: LeafPath
    value: float
    depth_reached: int
    nodes_expanded: int
    stopped_early: bool
    greedy_completed: bool


def _greedy_extend(table: SampleTable, path: tuple[int, ...], z: tuple[int, ...], d: int) -> tuple[int, ...]:
    arms = path
    while len(arms) < d:
        rem = d - len(arms)
        best_arm = 0
        best_g = -math.inf
        for arm in range(table.n_arms):
            g = g_max(table, arm, z[arm], rem)
            if g > best_g:
                best_arm, best_g = arm, g
        arms = arms + (best_arm,)
        z = advance_covariates(z, best_arm, table.z_max)
    return arms


def _leaf_value(table: SampleTable, root_z: tuple[int, ...], arms: tuple[int, ...]) -> float:
    total = 0.0
    z = root_z
    for arm in arms:
        total += table.value(arm, z[arm])
        z = advance_covariates(z, arm, table.z_max)
    return total


def op_search(
    table: SampleTable,
    root_z: Sequence[int],
    d: int,
    budget: int,
    trace: list | None = None,
) -> PlanResult:
    """Best-first search of the depth-d tree under an expansion budget.

    The frontier is ordered by (b, depth, lexicographically smaller path):
    larger bound first, deeper node on equal bound.  Selecting a depth-d
    node proves it optimal and stops the search; otherwise, after ``budget``
    expansions, the deepest node discovered (expanded or frontier) with the
    largest bound is returned, completed greedily to depth d.

    When ``trace`` is a list, one (expansion_index, depth, b, u) tuple is
    appended per expansion.
    """
    if d < 1:
        raise ValueError("planning depth d must be >= 1")
    if budget < 1:
        raise ValueError("expansion budget must be >= 1")
    root = tuple(int(v) for v in root_z)
    n_arms = len(root)
    b_root = psi(table, root, d)
    # Min-heap keys: (-b, -depth, path).  Tuple paths break remaining ties
    # lexicographically, which keeps the search fully deterministic.
    heap: list[tuple[float, int, tuple[int, ...], float, tuple[int, ...]]] = [
        (-b_root, 0, (), 0.0, root)
    ]
    expanded: list[tuple[int, float, tuple[int, ...]]] = []  # (depth, b, path)
    nodes_expanded = 0
    while True:
        neg_b, neg_depth, path, u, z = heapq.heappop(heap)
        depth = -neg_depth
        if depth == d:
            leaf = path_from_arms(root, path, table.z_max)
            return PlanResult(
                leaf=leaf,
                value=u,
                depth_reached=d,
                nodes_expanded=nodes_expanded,
                stopped_early=True,
                greedy_completed=False,
            )
        if nodes_expanded >= budget:
            heapq.heappush(heap, (neg_b, neg_depth, path, u, z))
            break
        if trace is not None:
            trace.append((nodes_expanded, depth, -neg_b, u))
        expanded.append((depth, -neg_b, path))
        child_depth = depth + 1
        rem = d - child_depth
        for arm in range(n_arms):
            u2 = u + table.value(arm, z[arm])
            z2 = advance_covariates(z, arm, table.z_max)
            b2 = u2 + psi(table, z2, rem) if rem else u2
            heapq.heappush(heap, (-b2, -child_depth, path + (arm,), u2, z2))
        nodes_expanded += 1
    # Budget exhausted: deepest node anywhere in the tree, largest b first,
    # then lexicographically smallest path.  Frontier nodes are eligible on
    # purpose: a frontier node at full depth carries its exact value (its
    # bound has no continuation term), so the selection degenerates to the
    # best leaf discovered so far once any leaf has been materialized.
    candidates = expanded + [(-nd, -nb, p) for nb, nd, p, _, _ in heap]
    depth_reached = max(c[0] for c in candidates)
    _, best_b, best_path = max(
        (c for c in candidates if c[0] == depth_reached),
        key=lambda c: (c[1], tuple(-a for a in c[2])),
    )
    arms = _greedy_extend(table, best_path, _replay_z(root, best_path, table.z_max), d)
    leaf = path_from_arms(root, arms, table.z_max)
    return PlanResult(
        leaf=leaf,
        value=_leaf_value(table, root, arms),
        depth_reached=depth_reached,
        nodes_expanded=nodes_expanded,
        stopped_early=False,
        greedy_completed=len(arms) > len(best_path),
    )


def _replay_z(root: tuple[int, ...], arms: tuple[int, ...], z_max: int) -> tuple[int, ...]:
    z = root
    for arm in arms:
        z = advance_covariates(z, arm, z_max)
    return z


def op_error_bound(table: SampleTable, result: PlanResult, lam: float, d0: int) -> float:
    """Worst-case gap between the tree optimum and the returned leaf's value.

    Valid when the proportion of near-optimal nodes decays with rate
    ``lam`` in (1/K, 1]; d0 is the depth up to which all nodes count as
    near-optimal.  Zero when the search stopped early (the result is then
    exact); clipped below at zero otherwise.
    """
    n_arms = table.n_arms
    if not (1.0 / n_arms < lam <= 1.0):
        raise InvalidLambda(f"lambda must lie in (1/{n_arms}, 1], got {lam}")
    if result.stopped_early:
        return 0.0
    if d0 < 0:
        raise ValueError("d0 must be >= 0")
    flat = table.flat_values()
    delta = float(flat.max() - min(float(flat.min()), 0.0))
    n0 = (n_arms ** (d0 + 1) - 1) / (n_arms - 1) if n_arms > 1 else d0 + 1
    n = result.nodes_expanded
    if n <= n0:
        raise ValueError(f"error bound needs nodes_expanded > n0 = {n0}, got {n}")
    d = len(result.leaf.steps)
    lk = lam * n_arms
    bound = (d - math.log(n - n0) / math.log(lk) - math.log(lk - 1.0) / math.log(lk) + 1.0) * delta
    return max(bound, 0.0)
