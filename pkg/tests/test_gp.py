"""GP posterior queries against a dense linear-algebra oracle, rank-1
identities, joint sampling, and the information-gain diagnostic."""

import math

import numpy as np
import pytest
from scipy import stats

from recobandits.exceptions import NoiseZero
from recobandits.gp import GpPosterior, information_gain
from recobandits.kernels import KernelSpec, kernel_matrix

FAMILIES = ("se", "matern12", "matern32", "matern52")


def dense_mean_cov(spec, noise_sd, zs, ys, q1, q2):
    """Posterior mean at q1 and covariance (q1, q2) by direct dense solve."""
    zs = np.asarray(zs)
    ys = np.asarray(ys, dtype=float)
    if zs.size == 0:
        return 0.0, float(kernel_matrix(spec, [q1], [q2])[0, 0])
    a = kernel_matrix(spec, zs, zs) + noise_sd**2 * np.eye(zs.size)
    k1 = kernel_matrix(spec, zs, [q1])[:, 0]
    k2 = kernel_matrix(spec, zs, [q2])[:, 0]
    mean = float(k1 @ np.linalg.solve(a, ys))
    cov = float(kernel_matrix(spec, [q1], [q2])[0, 0] - k1 @ np.linalg.solve(a, k2))
    return mean, cov


def random_posterior(rng, spec=None, n_max=20, noise_sd=0.1, grid=None):
    if spec is None:
        spec = KernelSpec(
            family=str(rng.choice(FAMILIES)),
            lengthscale=float(rng.uniform(0.8, 6.0)),
            signal_variance=float(rng.uniform(0.3, 2.0)),
        )
    n = int(rng.integers(0, n_max + 1))
    zs = rng.integers(0, 31, size=n)
    ys = rng.normal(size=n)
    return GpPosterior(spec, noise_sd, zs, ys, grid_z_max=grid), zs, ys


def test_prior_recovery():
    spec = KernelSpec(family="se", lengthscale=2.0, signal_variance=1.3)
    post = GpPosterior(spec, 0.1)
    for z in (0, 4, 17):
        mean, var = post.mean_var(z)
        assert mean == 0.0
        assert var == pytest.approx(1.3, abs=1e-12)
    assert post.cov(2, 9) == pytest.approx(kernel_matrix(spec, [2], [9])[0, 0], abs=1e-12)


def test_single_observation_closed_form():
    spec = KernelSpec(family="se", lengthscale=2.0, signal_variance=1.0)
    post = GpPosterior(spec, 0.1, [3], [1.0])
    mean, var = post.mean_var(3)
    assert mean == pytest.approx(1.0 / 1.01, abs=1e-8)
    assert mean == pytest.approx(0.990099, abs=1e-6)
    assert var == pytest.approx(1.0 - 1.0 / 1.01, abs=1e-8)
    assert var == pytest.approx(0.009901, abs=1e-6)


def test_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(60):
        post, zs, ys = random_posterior(rng)
        for _ in range(4):
            q1, q2 = int(rng.integers(0, 31)), int(rng.integers(0, 31))
            mean, var = post.mean_var(q1)
            omean, ovar = dense_mean_cov(post.spec, post.noise_sd, zs, ys, q1, q1)
            assert abs(mean - omean) < 1e-8
            assert abs(var - max(ovar, 0.0)) < 1e-8
            _, ocov = dense_mean_cov(post.spec, post.noise_sd, zs, ys, q1, q2)
            assert abs(post.cov(q1, q2) - ocov) < 1e-8


def test_grid_cache_agrees_with_factor_path():
    rng = np.random.default_rng(4)
    for _ in range(20):
        spec = KernelSpec(
            family=str(rng.choice(FAMILIES)), lengthscale=float(rng.uniform(1.0, 5.0))
        )
        plain = GpPosterior(spec, 0.1)
        cached = GpPosterior(spec, 0.1, grid_z_max=30)
        for _ in range(int(rng.integers(1, 15))):
            z, y = int(rng.integers(0, 31)), float(rng.normal())
            plain = plain.append(z, y)
            cached = cached.append(z, y)
        for q in rng.integers(0, 31, size=5):
            mp, vp = plain.mean_var(int(q))
            mc, vc = cached.mean_var(int(q))
            assert abs(mp - mc) < 1e-8
            assert abs(vp - vc) < 1e-8
        assert abs(plain.cov(0, 30) - cached.cov(0, 30)) < 1e-8


def test_append_equals_batch_fit():
    rng = np.random.default_rng(5)
    for _ in range(20):
        spec = KernelSpec(
            family=str(rng.choice(FAMILIES)), lengthscale=float(rng.uniform(1.0, 5.0))
        )
        zs = rng.integers(0, 31, size=10)
        ys = rng.normal(size=10)
        incremental = GpPosterior(spec, 0.1)
        for z, y in zip(zs, ys):
            incremental = incremental.append(int(z), float(y))
        batch = GpPosterior(spec, 0.1, zs, ys)
        for q in range(0, 31, 3):
            mi, vi = incremental.mean_var(q)
            mb, vb = batch.mean_var(q)
            assert abs(mi - mb) < 1e-8
            assert abs(vi - vb) < 1e-8


def test_append_shrinks_variance_at_point():
    spec = KernelSpec(family="se", lengthscale=2.0)
    post = GpPosterior(spec, 0.1)
    assert post.mean_var(3)[1] == pytest.approx(1.0, abs=1e-12)
    post = post.append(3, 1.0)
    assert post.mean_var(3)[1] == pytest.approx(0.009901, abs=1e-6)


def test_variance_monotone_in_observations():
    rng = np.random.default_rng(6)
    spec = KernelSpec(family="se", lengthscale=3.0)
    post = GpPosterior(spec, 0.1)
    for _ in range(25):
        prev = [post.mean_var(z)[1] for z in range(31)]
        post = post.append(int(rng.integers(0, 31)), float(rng.normal()))
        for z in range(31):
            assert post.mean_var(z)[1] <= prev[z] + 1e-8


def test_noiseless_interpolation():
    spec = KernelSpec(family="se", lengthscale=2.0)
    post = GpPosterior(spec, 0.0, [5], [0.7])
    mean, var = post.mean_var(5)
    assert abs(mean - 0.7) < 1e-6
    assert var < 1e-6


def test_rank1_variance_identity_and_drop_bound():
    # After the n-th observation at s: var(z; n-1) - var(z; n) equals
    # cov(s, z; n-1)^2 / (var(s; n-1) + noise^2), and is bounded by
    # var(s; n-1) / noise^2 at unit signal variance.
    rng = np.random.default_rng(7)
    for _ in range(15):
        spec = KernelSpec(
            family=str(rng.choice(FAMILIES)),
            lengthscale=float(rng.uniform(1.0, 5.0)),
            signal_variance=1.0,
        )
        noise = 0.1
        post = GpPosterior(spec, noise)
        for _ in range(12):
            s = int(rng.integers(0, 31))
            before_var_s = post.mean_var(s)[1]
            before = {z: (post.mean_var(z)[1], post.cov(s, z)) for z in range(31)}
            post = post.append(s, float(rng.normal()))
            for z in range(31):
                var_before, cov_before = before[z]
                drop = var_before - post.mean_var(z)[1]
                predicted = cov_before**2 / (before_var_s + noise**2)
                assert abs(drop - predicted) < 1e-8
                assert drop <= before_var_s / noise**2 + 1e-8


def test_posterior_cov_cauchy_schwarz():
    rng = np.random.default_rng(8)
    for _ in range(30):
        post, _, _ = random_posterior(rng)
        z1, z2 = int(rng.integers(0, 31)), int(rng.integers(0, 31))
        v1 = post.mean_var(z1)[1]
        v2 = post.mean_var(z2)[1]
        c = post.cov(z1, z2)
        assert abs(c) <= math.sqrt(max(v1, 0.0) * max(v2, 0.0)) + 1e-8
        assert 2.0 * abs(c) <= v1 + v2 + 1e-8
        assert c == pytest.approx(post.cov(z2, z1), abs=1e-12)


def test_joint_matches_pointwise_queries():
    rng = np.random.default_rng(9)
    post, _, _ = random_posterior(rng, n_max=12)
    zs = [0, 4, 9, 30]
    mean, cov = post.joint(zs)
    for i, zi in enumerate(zs):
        mi, vi = post.mean_var(zi)
        assert abs(mean[i] - mi) < 1e-8
        assert abs(cov[i, i] - vi) < 1e-8
        for j, zj in enumerate(zs):
            assert abs(cov[i, j] - post.cov(zi, zj)) < 1e-8


def test_joint_sample_duplicates_identical():
    spec = KernelSpec(family="se", lengthscale=2.0)
    post = GpPosterior(spec, 0.1, [1, 6], [0.2, -0.4])
    rng = np.random.default_rng(10)
    draw = post.joint_sample([4, 4], rng)
    assert draw[0] == draw[1]


def test_joint_sample_degenerate_posterior():
    spec = KernelSpec(family="se", lengthscale=2.0)
    post = GpPosterior(spec, 0.0, [5], [0.7])
    rng = np.random.default_rng(11)
    for _ in range(20):
        draw = post.joint_sample([5], rng)
        assert abs(draw[0] - 0.7) < 1e-4


def test_joint_sample_moments_match_posterior():
    spec = KernelSpec(family="se", lengthscale=3.0)
    post = GpPosterior(spec, 0.1, [2, 7, 7], [0.5, 1.0, 0.8])
    rng = np.random.default_rng(12)
    n = 100_000
    draws = np.array([post.joint_sample([0, 5], rng) for _ in range(n)])
    mean, cov = post.joint([0, 5])
    sample_cov = np.cov(draws[:, 0], draws[:, 1])
    # Asymptotic standard error of a Gaussian sample covariance entry.
    se01 = math.sqrt((cov[0, 0] * cov[1, 1] + cov[0, 1] ** 2) / n)
    assert abs(sample_cov[0, 1] - cov[0, 1]) < 3.0 * se01
    for i in range(2):
        se_mean = math.sqrt(cov[i, i] / n)
        assert abs(draws[:, i].mean() - mean[i]) < 3.0 * se_mean
        se_var = cov[i, i] * math.sqrt(2.0 / n)
        assert abs(sample_cov[i, i] - cov[i, i]) < 3.0 * se_var


def test_joint_sample_marginal_is_gaussian():
    spec = KernelSpec(family="se", lengthscale=2.0)
    post = GpPosterior(spec, 0.1, [3, 9], [1.0, -0.2])
    mean, var = post.mean_var(6)
    rng = np.random.default_rng(13)
    draws = np.array([post.joint_sample([6], rng)[0] for _ in range(10_000)])
    _, pvalue = stats.kstest(draws, "norm", args=(mean, math.sqrt(var)))
    assert pvalue > 0.01


def test_information_gain_empty():
    spec = KernelSpec(family="se", lengthscale=2.0)
    assert information_gain(spec, 0.1, []) == 0.0


def test_information_gain_single_point():
    spec = KernelSpec(family="se", lengthscale=2.0, signal_variance=1.0)
    gain = information_gain(spec, 1.0, [0])
    assert gain == pytest.approx(0.5 * math.log(2.0), abs=1e-10)
    assert gain == pytest.approx(0.34657, abs=1e-5)


def test_information_gain_matches_logdet_oracle():
    # Sequential conditioning telescopes to 0.5 * logdet(I + K / noise^2).
    rng = np.random.default_rng(14)
    for _ in range(20):
        spec = KernelSpec(
            family=str(rng.choice(FAMILIES)),
            lengthscale=float(rng.uniform(1.0, 5.0)),
            signal_variance=float(rng.uniform(0.3, 2.0)),
        )
        noise = float(rng.uniform(0.05, 1.0))
        zs = [int(z) for z in rng.integers(0, 31, size=int(rng.integers(1, 12)))]
        k = kernel_matrix(spec, zs, zs)
        _, logdet = np.linalg.slogdet(np.eye(len(zs)) + k / noise**2)
        assert information_gain(spec, noise, zs) == pytest.approx(0.5 * logdet, abs=1e-8)


def test_information_gain_monotone_and_shrinking_on_repeats():
    spec = KernelSpec(family="se", lengthscale=2.0)
    gains = [information_gain(spec, 0.5, [7] * n) for n in range(6)]
    increments = np.diff(gains)
    assert all(g2 >= g1 - 1e-12 for g1, g2 in zip(gains, gains[1:]))
    assert all(i2 < i1 for i1, i2 in zip(increments, increments[1:]))


def test_information_gain_noise_zero_raises():
    spec = KernelSpec(family="se", lengthscale=2.0)
    with pytest.raises(NoiseZero):
        information_gain(spec, 0.0, [1, 2])


def test_grid_cache_requires_positive_noise():
    spec = KernelSpec(family="se", lengthscale=2.0)
    with pytest.raises(NoiseZero):
        GpPosterior(spec, 0.0, grid_z_max=10)


def test_input_validation():
    spec = KernelSpec(family="se", lengthscale=2.0)
    with pytest.raises(ValueError):
        GpPosterior(spec, -0.1)
    with pytest.raises(ValueError):
        GpPosterior(spec, 0.1, [1, 2], [0.5])
    with pytest.raises(ValueError):
        GpPosterior(spec, 0.1, [-1], [0.5])
    post = GpPosterior(spec, 0.1)
    with pytest.raises(ValueError):
        post.append(-3, 0.0)


def test_append_is_persistent():
    spec = KernelSpec(family="se", lengthscale=2.0)
    base = GpPosterior(spec, 0.1, [4], [1.0])
    snapshot = base.mean_var(4)
    extended = base.append(4, -1.0)
    assert base.n_obs == 1 and extended.n_obs == 2
    assert base.mean_var(4) == snapshot
    assert extended.mean_var(4)[0] != snapshot[0]
