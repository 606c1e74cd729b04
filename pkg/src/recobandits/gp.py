"""Gaussian-process regression posteriors over integer covariates.

A :class:`GpPosterior` is an immutable snapshot of the posterior after N
noisy observations.  Queries (mean, variance, covariance, joint sampling)
are exact Gaussian conditioning:

    mean(z)      = k_N(z)^T (K_N + noise^2 I)^{-1} y_N
    cov(z, z')   = k(z, z') - k_N(z)^T (K_N + noise^2 I)^{-1} k_N(z')

Two equivalent representations are maintained:

* a Cholesky factor of (K_N + noise^2 I), extended by one row per appended
  observation (O(N^2) per append), which answers queries at any covariate;
* optionally, posterior mean/covariance tables over the grid {0..grid_z_max},
  updated by rank-1 conditioning per observation (O(|Z|^2) per append,
  O(1) per query).  Sequential conditioning of a Gaussian is exact, so the
  two paths agree to rounding error; tests cross-validate them.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import FactorizationFailure, NoiseZero
from .kernels import BASE_JITTER, MAX_JITTER, KernelSpec, cholesky_with_jitter, gram, kernel_eval, kernel_matrix

__all__ = ["GpPosterior", "information_gain"]


class GpPosterior:
    """Posterior of a GP prior ``spec`` after observing ``ys`` at ``zs``.

    Immutable: :meth:`append` returns a new posterior sharing no mutable
    state, so snapshots taken at different rounds remain valid and queries
    are safe under concurrent reads.
    """

    def __init__(self, spec: KernelSpec, noise_sd: float, zs=(), ys=(), *, grid_z_max: int | None = None):
        if noise_sd < 0 or not math.isfinite(noise_sd):
            raise ValueError(f"noise_sd must be finite and >= 0, got {noise_sd}")
        self.spec = spec
        self.noise_sd = float(noise_sd)
        self._z = np.asarray(zs, dtype=np.int64).reshape(-1)
        self._y = np.asarray(ys, dtype=float).reshape(-1)
        if self._z.shape != self._y.shape:
            raise ValueError("zs and ys must have equal length")
        if self._z.size and self._z.min() < 0:
            raise ValueError("covariates must be nonnegative")
        self._grid_z_max = grid_z_max
        self._v_cache: dict[int, np.ndarray] = {}
        self._refit(min_jitter=0.0)
        if grid_z_max is not None:
            if self.noise_sd <= 0:
                raise NoiseZero("the grid cache requires strictly positive noise")
            zgrid = np.arange(grid_z_max + 1)
            self._grid_m = np.zeros(grid_z_max + 1)
            self._grid_c = gram(spec, zgrid)
            for z, y in zip(self._z, self._y):
                self._grid_condition(int(z), float(y))

    # ------------------------------------------------------------------
    # construction helpers

    def _refit(self, min_jitter: float) -> None:
        """Factor (K_N + noise^2 I) from scratch, adding jitter only on failure."""
        n = self._z.size
        if n == 0:
            self._L = np.zeros((0, 0))
            self._w = np.zeros(0)
            self._jitter = min_jitter
            return
        cov = gram(self.spec, self._z) + self.noise_sd**2 * np.eye(n)
        limit = MAX_JITTER * self.spec.signal_variance
        jitter = min_jitter
        while True:
            try:
                self._L = np.linalg.cholesky(cov + jitter * np.eye(n))
                break
            except np.linalg.LinAlgError:
                jitter = BASE_JITTER * self.spec.signal_variance if jitter == 0.0 else jitter * 10.0
                if jitter > limit * (1.0 + 1e-12):
                    raise FactorizationFailure(
                        f"posterior factorization failed up to jitter {limit:g}"
                    ) from None
        self._jitter = jitter
        self._w = solve_triangular(self._L, self._y, lower=True, check_finite=False)

    def _grid_condition(self, z: int, y: float) -> None:
        """Rank-1 update of the grid tables with one noisy observation at z."""
        c = self._grid_c[:, z].copy()
        s = self._grid_c[z, z] + self.noise_sd**2
        self._grid_m = self._grid_m + c * ((y - self._grid_m[z]) / s)
        self._grid_c = self._grid_c - np.outer(c, c / s)

    # ------------------------------------------------------------------
    # basic accessors

    @property
    def n_obs(self) -> int:
        return int(self._z.size)

    @property
    def observed_z(self) -> np.ndarray:
        return self._z.copy()

    @property
    def observed_y(self) -> np.ndarray:
        return self._y.copy()

    # ------------------------------------------------------------------
    # updating

    def append(self, z: int, y: float) -> "GpPosterior":
        """Posterior with one more observation, via Cholesky row extension."""
        z = int(z)
        if z < 0:
            raise ValueError("covariates must be nonnegative")
        new = object.__new__(GpPosterior)
        new.spec = self.spec
        new.noise_sd = self.noise_sd
        new._z = np.append(self._z, z)
        new._y = np.append(self._y, float(y))
        new._grid_z_max = self._grid_z_max
        new._v_cache = {}
        n = self._z.size
        kzz = kernel_eval(self.spec, z, z) + self.noise_sd**2 + self._jitter
        if n == 0:
            if kzz <= 0:
                new._refit(min_jitter=self._jitter * 10.0)
            else:
                new._L = np.array([[math.sqrt(kzz)]])
                new._w = np.array([float(y) / math.sqrt(kzz)])
                new._jitter = self._jitter
        else:
            k_vec = kernel_matrix(self.spec, self._z, [z])[:, 0]
            a = solve_triangular(self._L, k_vec, lower=True, check_finite=False)
            pivot_sq = kzz - a @ a
            if pivot_sq <= 0:
                # Degenerate extension: rebuild from scratch, letting the
                # jitter ladder escalate only as far as needed.
                new._refit(min_jitter=self._jitter * 10.0)
            else:
                pivot = math.sqrt(pivot_sq)
                ell = np.zeros((n + 1, n + 1))
                ell[:n, :n] = self._L
                ell[n, :n] = a
                ell[n, n] = pivot
                new._L = ell
                new._w = np.append(self._w, (float(y) - a @ self._w) / pivot)
                new._jitter = self._jitter
        if self._grid_z_max is not None:
            new._grid_m = self._grid_m.copy()
            new._grid_c = self._grid_c.copy()
            GpPosterior._grid_condition(new, z, float(y))
        return new

    # ------------------------------------------------------------------
    # queries

    def _v(self, z: int) -> np.ndarray:
        """Cached solve L v = k_N(z); all queries reduce to dot products."""
        v = self._v_cache.get(z)
        if v is None:
            k_vec = kernel_matrix(self.spec, self._z, [z])[:, 0]
            v = solve_triangular(self._L, k_vec, lower=True, check_finite=False)
            self._v_cache[z] = v
        return v

    def mean_var(self, z: int) -> tuple[float, float]:
        """Posterior mean and variance at covariate z (variance clipped at 0)."""
        z = int(z)
        if self._grid_z_max is not None and 0 <= z <= self._grid_z_max:
            return float(self._grid_m[z]), max(float(self._grid_c[z, z]), 0.0)
        if self._z.size == 0:
            return 0.0, kernel_eval(self.spec, z, z)
        v = self._v(z)
        mean = float(v @ self._w)
        var = kernel_eval(self.spec, z, z) - float(v @ v)
        return mean, max(var, 0.0)

    def cov(self, z1: int, z2: int) -> float:
        """Posterior covariance between covariates z1 and z2."""
        z1, z2 = int(z1), int(z2)
        g = self._grid_z_max
        if g is not None and 0 <= z1 <= g and 0 <= z2 <= g:
            return float(self._grid_c[z1, z2])
        if self._z.size == 0:
            return kernel_eval(self.spec, z1, z2)
        return kernel_eval(self.spec, z1, z2) - float(self._v(z1) @ self._v(z2))

    def joint(self, zs) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean vector and covariance matrix at the covariates zs."""
        zs = np.asarray(zs, dtype=np.int64).reshape(-1)
        g = self._grid_z_max
        if g is not None and zs.size and zs.min() >= 0 and zs.max() <= g:
            return self._grid_m[zs].copy(), self._grid_c[np.ix_(zs, zs)].copy()
        prior = kernel_matrix(self.spec, zs, zs)
        if self._z.size == 0:
            return np.zeros(zs.size), prior
        v = np.column_stack([self._v(int(z)) for z in zs])
        return v.T @ self._w, prior - v.T @ v

    def joint_sample(self, zs, rng: np.random.Generator) -> np.ndarray:
        """One draw of the posterior function values at ``zs``.

        Duplicate covariates receive identical values: the draw is taken at
        the sorted distinct covariates and mapped back, so it is a single
        consistent function sample.
        """
        zs = np.asarray(zs, dtype=np.int64).reshape(-1)
        uniq, inverse = np.unique(zs, return_inverse=True)
        mean, cov_mat = self.joint(uniq)
        factor, _ = cholesky_with_jitter(cov_mat, scale=self.spec.signal_variance)
        draw = mean + factor @ rng.standard_normal(uniq.size)
        return draw[inverse]


def information_gain(spec: KernelSpec, noise_sd: float, zs) -> float:
    """Mutual information between noisy observations at ``zs`` and the GP.

    Computed by sequential conditioning: 0.5 * sum log(1 + var_{t-1}(z_t) /
    noise^2).  The value depends only on the covariates, never on observed
    rewards.  Raises NoiseZero when noise_sd == 0, where the quantity is
    unbounded.
    """
    if noise_sd <= 0:
        raise NoiseZero("information gain requires strictly positive noise")
    post = GpPosterior(spec, noise_sd)
    total = 0.0
    for z in zs:
        _, var = post.mean_var(int(z))
        total += 0.5 * math.log1p(var / noise_sd**2)
        post = post.append(int(z), 0.0)
    return total
