"""Lookahead-tree enumeration, leaf rewards, and posterior leaf statistics."""

import itertools
import math

import numpy as np
import pytest

from recobandits.environment import RecoveryModel, advance_covariates
from recobandits.exceptions import DepthExceedsArms, TreeTooLarge
from recobandits.gp import GpPosterior
from recobandits.kernels import KernelSpec, kernel_matrix
from recobandits.lookahead import (
    best_leaf_exhaustive,
    best_leaf_table,
    enumerate_leaves,
    leaf_count,
    leaf_reward_true,
    leaf_stats,
    path_from_arms,
)


def dense_mean_cov(post, q1, q2):
    """Posterior mean at q1 and covariance (q1, q2) by direct dense solve."""
    zs, ys = post.observed_z, post.observed_y
    prior = float(kernel_matrix(post.spec, [q1], [q2])[0, 0])
    if zs.size == 0:
        return 0.0, prior
    a = kernel_matrix(post.spec, zs, zs) + post.noise_sd**2 * np.eye(zs.size)
    k1 = kernel_matrix(post.spec, zs, [q1])[:, 0]
    k2 = kernel_matrix(post.spec, zs, [q2])[:, 0]
    return float(k1 @ np.linalg.solve(a, ys)), prior - float(k1 @ np.linalg.solve(a, k2))


def stats_oracle(path, posteriors):
    """Independent Eq.-style double sum over the leaf's steps."""
    eta = sum(dense_mean_cov(posteriors[a], z, z)[0] for a, z in path.steps)
    var = 0.0
    for (a1, z1) in path.steps:
        for (a2, z2) in path.steps:
            if a1 == a2:
                var += dense_mean_cov(posteriors[a1], z1, z2)[1]
    return eta, var


def random_posteriors(rng, k, spec=None, n_max=8):
    if spec is None:
        spec = KernelSpec(family="se", lengthscale=float(rng.uniform(1.0, 4.0)))
    posts = []
    for _ in range(k):
        post = GpPosterior(spec, 0.1)
        for _ in range(int(rng.integers(0, n_max + 1))):
            post = post.append(int(rng.integers(0, 11)), float(rng.normal()))
        posts.append(post)
    return posts


def table_model(values):
    return RecoveryModel(
        kind="gp", kernel=KernelSpec(family="se"), table=np.asarray(values, dtype=float)
    )


def test_leaf_counts():
    assert leaf_count(3, 2) == 9
    assert leaf_count(4, 3) == 64
    assert leaf_count(3, 2, single_play=True) == 6
    assert leaf_count(4, 4, single_play=True) == 24
    with pytest.raises(DepthExceedsArms):
        leaf_count(2, 3, single_play=True)


def test_depth_one_leaves():
    leaves = enumerate_leaves((3, 5), 1, 30)
    assert len(leaves) == 2
    assert leaves[0].steps == ((0, 3),)
    assert leaves[1].steps == ((1, 5),)


def test_depth_two_multiple_play_dynamics():
    leaves = enumerate_leaves((3, 5), 2, 30)
    assert [leaf.arms for leaf in leaves] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    by_arms = {leaf.arms: leaf for leaf in leaves}
    assert by_arms[(0, 0)].steps == ((0, 3), (0, 0))
    assert by_arms[(0, 1)].steps == ((0, 3), (1, 6))
    assert by_arms[(1, 0)].steps == ((1, 5), (0, 4))
    assert by_arms[(1, 1)].steps == ((1, 5), (1, 0))


def test_z_max_cap_inside_tree():
    leaves = enumerate_leaves((3, 3), 3, 4)
    by_arms = {leaf.arms: leaf for leaf in leaves}
    # Arm 1 ages 3 -> 4 -> capped at 4 while arm 0 is played twice.
    assert by_arms[(0, 0, 1)].steps == ((0, 3), (0, 0), (1, 4))


def test_single_play_leaves_distinct_arms():
    leaves = enumerate_leaves((1, 2, 3), 2, 10, single_play=True)
    assert len(leaves) == 6
    for leaf in leaves:
        assert len(set(leaf.arms)) == 2
    assert [leaf.arms for leaf in leaves] == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]


def test_enumeration_is_deterministic():
    a = enumerate_leaves((2, 0, 4), 3, 6)
    b = enumerate_leaves((2, 0, 4), 3, 6)
    assert a == b


def test_replay_consistency():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        z_max = int(rng.integers(2, 10))
        root = tuple(int(v) for v in rng.integers(0, z_max + 1, size=k))
        for leaf in enumerate_leaves(root, d, z_max):
            z = root
            for arm, z_at_play in leaf.steps:
                assert z_at_play == z[arm]
                z = advance_covariates(z, arm, z_max)


def test_path_from_arms_matches_enumeration():
    root = (2, 5, 0)
    leaves = enumerate_leaves(root, 3, 8)
    for leaf in leaves[:10]:
        assert path_from_arms(root, leaf.arms, 8) == leaf


def test_leaf_reward_true():
    models = [table_model(np.arange(5) * 0.1), table_model(np.ones(5) * 0.3)]
    leaf = enumerate_leaves((2, 3), 1, 4)[0]
    assert leaf_reward_true(leaf, models) == pytest.approx(0.2, abs=1e-12)
    constant = [table_model(np.full(5, 0.3)), table_model(np.full(5, 0.3))]
    for leaf in enumerate_leaves((2, 3), 3, 4):
        assert leaf_reward_true(leaf, constant) == pytest.approx(0.9, abs=1e-12)


def test_leaf_stats_single_play_additivity():
    rng = np.random.default_rng(1)
    posts = random_posteriors(rng, 4)
    root = (2, 7, 0, 4)
    for leaf in enumerate_leaves(root, 3, 10, single_play=True):
        st = leaf_stats(leaf, posts)
        direct = sum(posts[a].mean_var(z)[1] for a, z in leaf.steps)
        assert st.var == pytest.approx(direct, abs=1e-12)


def test_leaf_stats_repeated_arm_hand_formula():
    rng = np.random.default_rng(2)
    posts = random_posteriors(rng, 2)
    root = (5, 3)
    leaf = path_from_arms(root, (0, 0), 10)
    st = leaf_stats(leaf, posts)
    _, v5 = dense_mean_cov(posts[0], 5, 5)
    _, v0 = dense_mean_cov(posts[0], 0, 0)
    _, c50 = dense_mean_cov(posts[0], 5, 0)
    assert st.var == pytest.approx(v5 + v0 + 2.0 * c50, abs=1e-8)
    m5 = dense_mean_cov(posts[0], 5, 5)[0]
    m0 = dense_mean_cov(posts[0], 0, 0)[0]
    assert st.eta == pytest.approx(m5 + m0, abs=1e-8)


def test_leaf_stats_prior_repeat_fully_correlated():
    sv = 1.4
    spec = KernelSpec(family="se", lengthscale=2.0, signal_variance=sv)
    posts = [GpPosterior(spec, 0.1), GpPosterior(spec, 0.1)]
    leaf = path_from_arms((0, 3), (0, 0), 10)  # both plays land on z = 0
    st = leaf_stats(leaf, posts)
    assert st.var == pytest.approx(4.0 * sv, abs=1e-10)


def test_leaf_stats_matches_double_sum_oracle():
    rng = np.random.default_rng(3)
    for _ in range(15):
        k = int(rng.integers(2, 4))
        d = int(rng.integers(1, 4))
        posts = random_posteriors(rng, k)
        root = tuple(int(v) for v in rng.integers(0, 8, size=k))
        for leaf in enumerate_leaves(root, d, 10):
            st = leaf_stats(leaf, posts)
            eta, var = stats_oracle(leaf, posts)
            assert st.eta == pytest.approx(eta, abs=1e-8)
            assert st.var == pytest.approx(var, abs=1e-8)


def test_leaf_variance_bounds():
    # Provable caps: var <= (max per-arm repeats) * sum of step variances
    # <= d * sum, and var <= d^2 * signal_variance.
    rng = np.random.default_rng(4)
    for _ in range(25):
        k = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        sv = float(rng.uniform(0.5, 2.0))
        spec = KernelSpec(family="se", lengthscale=float(rng.uniform(1.0, 4.0)), signal_variance=sv)
        posts = random_posteriors(rng, k, spec=spec)
        root = tuple(int(v) for v in rng.integers(0, 11, size=k))
        for leaf in enumerate_leaves(root, d, 10):
            st = leaf_stats(leaf, posts)
            step_vars = sum(posts[a].mean_var(z)[1] for a, z in leaf.steps)
            assert -1e-10 <= st.var <= d * step_vars + 1e-8
            assert st.var <= d * d * sv + 1e-8


def test_best_leaf_exhaustive_depth_one():
    values = {0: 0.3, 1: 0.9, 2: 0.5}
    leaf, value = best_leaf_exhaustive((0, 0, 0), 1, 5, lambda p: values[p.arms[0]])
    assert leaf.arms == (1,)
    assert value == pytest.approx(0.9)


def test_best_leaf_exhaustive_dominating_arm():
    models = [table_model(np.full(6, 0.9)), table_model(np.full(6, 0.1))]
    leaf, value = best_leaf_exhaustive(
        (2, 2), 3, 5, lambda p: leaf_reward_true(p, models)
    )
    assert leaf.arms == (0, 0, 0)
    assert value == pytest.approx(2.7, abs=1e-12)


def test_best_leaf_exhaustive_tie_break_lexicographic():
    leaf, _ = best_leaf_exhaustive((1, 1), 2, 5, lambda p: 0.0)
    assert leaf.arms == (0, 0)


def test_best_leaf_exhaustive_matches_bruteforce():
    rng = np.random.default_rng(5)
    for _ in range(10):
        k, d, z_max = 3, 3, 7
        tables = rng.normal(size=(k, z_max + 1))
        root = tuple(int(v) for v in rng.integers(0, z_max + 1, size=k))

        def value_fn(path):
            return sum(tables[a, z] for a, z in path.steps)

        leaf, value = best_leaf_exhaustive(root, d, z_max, value_fn)
        best_arms, best_value = None, -np.inf
        for arms in itertools.product(range(k), repeat=d):
            v = value_fn(path_from_arms(root, arms, z_max))
            if v > best_value:
                best_arms, best_value = arms, v
        assert leaf.arms == best_arms
        assert value == pytest.approx(best_value, abs=1e-12)


def test_best_leaf_table_matches_exhaustive():
    rng = np.random.default_rng(6)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        z_max = int(rng.integers(3, 9))
        tables = rng.normal(size=(k, z_max + 1))
        root = tuple(int(v) for v in rng.integers(0, z_max + 1, size=k))
        leaf_t, value_t = best_leaf_table(tables, root, d, z_max)
        leaf_e, value_e = best_leaf_exhaustive(
            root, d, z_max, lambda p: sum(tables[a, z] for a, z in p.steps)
        )
        assert leaf_t == leaf_e
        assert value_t == pytest.approx(value_e, abs=1e-10)


def test_guards():
    with pytest.raises(DepthExceedsArms):
        enumerate_leaves((0, 0), 3, 5, single_play=True)
    with pytest.raises(ValueError):
        enumerate_leaves((0, 0), 0, 5)
    big_root = (0,) * 30
    with pytest.raises(TreeTooLarge):
        enumerate_leaves(big_root, 5, 5)  # 30^5 = 24.3M leaves
    with pytest.raises(TreeTooLarge):
        best_leaf_exhaustive(big_root, 5, 5, lambda p: 0.0)
