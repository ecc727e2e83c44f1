"""Dataset synthesis: sphere covariates, target functions, noise, risk estimates.

Targets come in two kinds: linear x -> s^T x, and kernel-space functions
f = sum_i c_i K(., z_i) whose norm mu0 = sqrt(c^T K_ZZ c) is computed, not
assumed, so norm-dependent bounds can be checked honestly.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ConfigError, NumericalError
from .kernel import gram_matrix, ntk_matrix

__all__ = [
    "LinearTarget",
    "RkhsTarget",
    "TrainingSet",
    "sample_sphere",
    "make_target",
    "add_noise",
    "estimate_risk",
    "build_training_set",
]


@dataclass
class LinearTarget:
    s: np.ndarray


@dataclass
class RkhsTarget:
    centers: np.ndarray
    coeffs: np.ndarray


@dataclass
class TrainingSet:
    """Covariates S, noisy responses y, clean targets f*(S), noise scale, target."""

    covariates: np.ndarray
    responses: np.ndarray
    clean_targets: np.ndarray
    sigma0: float
    target_descriptor: object


def sample_sphere(n, d, seed):
    """n i.i.d. points uniform on the unit sphere in R^d (normalized Gaussians)."""
    if d < 2:
        raise ConfigError(f"sphere sampling needs d >= 2, got d={d}")
    if n < 1:
        raise ConfigError(f"need n >= 1, got n={n}")
    g = rng.standard_normal(rng.stream(seed, "sphere"), (n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    if norms.min() == 0.0:
        raise NumericalError("drew a zero vector while sampling the sphere")
    return g / norms


def make_target(target, mode="biased"):
    """Build the target callable (k x d matrix -> length-k vector) and its norm.

    Linear targets return mu0 = None (their kernel-space norm is not
    established); RKHS targets return mu0 = sqrt(c^T K_ZZ c).
    """
    if isinstance(target, LinearTarget):
        s = np.asarray(target.s, dtype=np.float64)

        def f_linear(X):
            return np.asarray(X, dtype=np.float64) @ s

        return f_linear, None

    if isinstance(target, RkhsTarget):
        Z = np.asarray(target.centers, dtype=np.float64)
        c = np.asarray(target.coeffs, dtype=np.float64)
        K_zz = gram_matrix(Z, mode).gram  # also rejects duplicate centers
        mu0 = float(np.sqrt(max(float(c @ K_zz @ c), 0.0)))

        def f_rkhs(X):
            return ntk_matrix(np.asarray(X, dtype=np.float64), Z, mode) @ c

        return f_rkhs, mu0

    raise ConfigError(f"unknown target kind: {type(target).__name__}")


def add_noise(clean, sigma0, seed):
    """Add i.i.d. Normal(0, sigma0^2) noise; sigma0 = 0 returns the input bitwise."""
    clean = np.asarray(clean, dtype=np.float64)
    if sigma0 < 0:
        raise ConfigError("sigma0 must be nonnegative")
    if sigma0 == 0.0:
        return clean
    return clean + sigma0 * rng.standard_normal(rng.stream(seed, "noise"), clean.shape)


def estimate_risk(f, target, M, d, seed):
    """Monte-Carlo risk (1/M) sum (f - target)^2 over fresh sphere points.

    Returns (risk, standard error of the mean).
    """
    if M < 1:
        raise ConfigError("need M >= 1")
    X = sample_sphere(M, d, rng.subseed(seed, "risk"))
    sq = (np.asarray(f(X), dtype=np.float64) - np.asarray(target(X), dtype=np.float64)) ** 2
    se = float(sq.std(ddof=1) / np.sqrt(M)) if M > 1 else float("nan")
    return float(sq.mean()), se


def build_training_set(n, d, seed, sigma0, target, mode="biased"):
    """Sample covariates, evaluate the target, add noise: the full training set.

    Covariates and noise come from separate (seed, label) streams, so changing
    the noise scale or target never moves the sampled points.
    """
    X = sample_sphere(n, d, rng.subseed(seed, "data"))
    f, _ = make_target(target, mode)
    clean = np.asarray(f(X), dtype=np.float64)
    y = add_noise(clean, sigma0, rng.subseed(seed, "noise"))
    return TrainingSet(
        covariates=X,
        responses=y,
        clean_targets=clean,
        sigma0=float(sigma0),
        target_descriptor=target,
    )
