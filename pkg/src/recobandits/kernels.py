"""Covariance kernels on the nonnegative integer grid.

Families
--------
``se``        squared exponential, sv * exp(-(z - z')^2 / (2 l^2))
``matern12``  Matern nu=1/2 (exponential), sv * exp(-r / l)
``matern32``  Matern nu=3/2, sv * (1 + sqrt(3) r / l) exp(-sqrt(3) r / l)
``matern52``  Matern nu=5/2, sv * (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) exp(-sqrt(5) r / l)
``linear``    sv * (1 + z z' / l^2)

with r = |z - z'|, l the lengthscale and sv the signal variance.  The
stationary families satisfy k(z, z) = sv; the linear family does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import FactorizationFailure

FAMILIES = ("se", "matern12", "matern32", "matern52", "linear")

# Relative jitter ladder used whenever a covariance matrix is factorized:
# start at BASE_JITTER * signal_variance, escalate tenfold up to
# MAX_JITTER * signal_variance, then give up.
BASE_JITTER = 1e-10
MAX_JITTER = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its hyperparameters."""

    family: str
    lengthscale: float = 1.0
    signal_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}, expected one of {FAMILIES}")
        if not (self.lengthscale > 0 and math.isfinite(self.lengthscale)):
            raise ValueError(f"lengthscale must be positive and finite, got {self.lengthscale}")
        if not (self.signal_variance > 0 and math.isfinite(self.signal_variance)):
            raise ValueError(f"signal_variance must be positive and finite, got {self.signal_variance}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "lengthscale": self.lengthscale,
            "signal_variance": self.signal_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            family=d["family"],
            lengthscale=float(d.get("lengthscale", 1.0)),
            signal_variance=float(d.get("signal_variance", 1.0)),
        )


def kernel_matrix(spec: KernelSpec, a, b) -> np.ndarray:
    """Cross-covariance matrix k(a_i, b_j) with shape (len(a), len(b))."""
    a = np.asarray(a, dtype=float).reshape(-1, 1)
    b = np.asarray(b, dtype=float).reshape(1, -1)
    sv = spec.signal_variance
    ell = spec.lengthscale
    if spec.family == "linear":
        return sv * (1.0 + (a * b) / ell**2)
    r = np.abs(a - b)
    if spec.family == "se":
        return sv * np.exp(-(r**2) / (2.0 * ell**2))
    if spec.family == "matern12":
        return sv * np.exp(-r / ell)
    if spec.family == "matern32":
        s = math.sqrt(3.0) * r / ell
        return sv * (1.0 + s) * np.exp(-s)
    if spec.family == "matern52":
        s = math.sqrt(5.0) * r / ell
        return sv * (1.0 + s + s**2 / 3.0) * np.exp(-s)
    raise AssertionError(f"unreachable family {spec.family}")


def kernel_eval(spec: KernelSpec, z1: int, z2: int) -> float:
    """Scalar kernel evaluation k(z1, z2)."""
    return float(kernel_matrix(spec, [z1], [z2])[0, 0])


def gram(spec: KernelSpec, zs) -> np.ndarray:
    """Gram matrix of the kernel over the covariate list ``zs``."""
    return kernel_matrix(spec, zs, zs)


def cholesky_with_jitter(mat: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``mat``, adding diagonal jitter only on failure.

    The unperturbed matrix is tried first so well-conditioned systems are
    solved exactly; on failure, jitter starts at BASE_JITTER * scale and
    escalates tenfold until the factorization succeeds or MAX_JITTER * scale
    is exceeded, in which case FactorizationFailure is raised.  Returns
    (factor, jitter_used).
    """
    n = mat.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    eye = np.eye(n)
    jitter = 0.0
    limit = MAX_JITTER * scale
    while True:
        try:
            return np.linalg.cholesky(mat + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter = BASE_JITTER * scale if jitter == 0.0 else jitter * 10.0
            if jitter > limit * (1.0 + 1e-12):
                raise FactorizationFailure(
                    f"covariance factorization failed up to jitter {limit:g}"
                ) from None
