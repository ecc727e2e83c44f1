"""Kernel complexity, critical radii (sub-root fixed points), stopping time.

The empirical kernel complexity of a spectrum {lam_i} at scale eps is

    R_K(eps) = sqrt((1/n) * sum_i min(lam_i, eps^2)).

sigma0 * R_K is sub-root, so sigma0 * R_K(sqrt(r)) = r has a unique positive
solution r = eps_n^2 (the critical radius), found here by bisection.  The
early-stopping time is the last step t where ((sigma0 eta t)^-1 is still at
least the complexity at scale sqrt(1/(eta t)):

    T_hat = min{ t >= 1 : R_K(sqrt(1/(eta t))) > (sigma0 eta t)^-1 } - 1

with strict ">" (ties do not trigger stopping).  The same complexity function
serves the population sequence lam_j = scale * j^-exponent through a finite
truncation chosen so the discarded tail cannot move the fixed point at solver
tolerance.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DatasetError, NumericalError


def _check_spectrum(eigenvalues):
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ConfigError("spectrum must be a nonempty 1-D vector")
    if np.any(lam < 0):
        raise DatasetError(f"negative eigenvalue in spectrum: min = {lam.min()}")
    return lam


def kernel_complexity(eigenvalues, n, eps):
    """sqrt((1/n) * sum_i min(lam_i, eps^2)); works for empirical and
    truncated population spectra alike."""
    lam = _check_spectrum(eigenvalues)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError(f"sample size must be a positive integer, got {n}")
    if not np.isfinite(eps) or eps < 0:
        raise ConfigError(f"scale eps must be finite and nonnegative, got {eps}")
    return float(np.sqrt(np.minimum(lam, eps * eps).sum() / n))


def fixed_point(eigenvalues, n, sigma0):
    """Unique positive r with sigma0 * R_K(sqrt(r)) = r, by bisection.

    Returns the eps^2 value (the squared critical radius).
    """
    lam = _check_spectrum(eigenvalues)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError(f"sample size must be a positive integer, got {n}")
    if not (np.isfinite(sigma0) and sigma0 > 0):
        raise ConfigError(f"noise scale sigma0 must be positive, got {sigma0}")
    if lam.max() <= 0.0:
        raise NumericalError("degenerate spectrum: all eigenvalues zero, "
                             "no positive fixed point exists")

    # precompute ascending-sorted spectrum + prefix sums so each phi evaluation
    # is O(log k): sum_i min(lam_i, c) = prefix[idx] + c * (k - idx)
    asc = np.sort(lam)
    prefix = np.concatenate([[0.0], np.cumsum(asc)])
    k = asc.size

    def phi(r):
        idx = np.searchsorted(asc, r, side="left")
        return sigma0 * np.sqrt((prefix[idx] + r * (k - idx)) / n)

    lo = 1e-15
    hi = 2.0 * max(float(lam.max()), sigma0 * sigma0)
    expansions = 0
    while phi(hi) >= hi:
        hi *= 2.0
        expansions += 1
        if expansions > 200:
            raise NumericalError("fixed-point bracket expansion did not terminate")
    for _ in range(500):
        if hi - lo <= 1e-13 * max(lo, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        if phi(mid) >= mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class StoppingTime(NamedTuple):
    t_hat: int
    saturated: bool


def stopping_time(eigenvalues, n, sigma0, eta, horizon):
    """Forward scan for T_hat; returns (horizon, saturated=True) if the
    stopping condition never triggers within the horizon."""
    lam = _check_spectrum(eigenvalues)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError(f"sample size must be a positive integer, got {n}")
    if not (np.isfinite(sigma0) and sigma0 > 0):
        raise ConfigError(f"noise scale sigma0 must be positive, got {sigma0}")
    if not (np.isfinite(eta) and eta > 0):
        raise ConfigError(f"step size must be positive, got {eta}")
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise ConfigError(f"horizon must be a positive integer, got {horizon}")

    asc = np.sort(lam)
    prefix = np.concatenate([[0.0], np.cumsum(asc)])
    k = asc.size
    block = 65536
    t0 = 1
    while t0 <= horizon:
        t1 = min(t0 + block, horizon + 1)
        tv = np.arange(t0, t1, dtype=float)
        c = 1.0 / (eta * tv)
        idx = np.searchsorted(asc, c, side="left")
        lhs = np.sqrt((prefix[idx] + c * (k - idx)) / n)
        hit = np.flatnonzero(lhs > 1.0 / (sigma0 * eta * tv))
        if hit.size:
            return StoppingTime(t_hat=int(t0 + hit[0]) - 1, saturated=False)
        t0 = t1
    return StoppingTime(t_hat=int(horizon), saturated=True)


def rate_slope(pairs):
    """OLS slope of log(value) against log(n) over (n, value) pairs."""
    if len(pairs) < 3:
        raise ConfigError(f"need at least 3 (n, value) pairs, got {len(pairs)}")
    ns = np.array([p[0] for p in pairs], dtype=float)
    vals = np.array([p[1] for p in pairs], dtype=float)
    if np.any(ns <= 0) or np.any(vals <= 0):
        raise DatasetError("rate fit needs strictly positive n and values")
    return float(np.polyfit(np.log(ns), np.log(vals), 1)[0])


def population_fixed_point(n, sigma0, exponent, scale=1.0):
    """Critical radius for the population sequence lam_j = scale * j^-exponent.

    The infinite sum is truncated at a finite length L, doubling L until the
    discarded tail eigenvalue drops below 1e-3 of the radius and successive
    doublings agree to relative 1e-4. Truncating a summable power tail biases
    the radius by ~c * L^(1-exponent), so the returned value removes that bias
    by geometric (Richardson) extrapolation across the last doubling; the
    extrapolated radius is accurate well beyond the stopping tolerance.
    Returns (r, truncation_length).
    """
    if not (np.isfinite(exponent) and exponent > 1.0):
        raise ConfigError(
            f"population decay exponent must exceed 1 for a summable tail, got {exponent}")
    if not (np.isfinite(scale) and scale > 0):
        raise ConfigError(f"population scale must be positive, got {scale}")
    q = 2.0 ** (1.0 - exponent)  # per-doubling shrink factor of the tail bias
    length = 256
    r_prev = None
    while length <= 2 ** 24:
        j = np.arange(1, length + 1, dtype=float)
        lam = scale * j ** (-exponent)
        r = fixed_point(lam, n, sigma0)
        tail_ok = lam[-1] < 1e-3 * r
        if r_prev is not None and abs(r - r_prev) <= 1e-4 * r and tail_ok:
            return r + (r - r_prev) * q / (1.0 - q), length
        r_prev = r
        length *= 2
    raise NumericalError("population spectrum truncation did not stabilize")


@dataclass
class ComplexityProfile:
    """Spectrum with its critical radius and stopping time, bundled."""

    eigenvalues: np.ndarray  # stored nonincreasing
    n: int
    sigma0: float
    eta: float
    fixed_point_sq: float
    stopping_time: int
    saturated: bool = False


def complexity_profile(eigenvalues, n, sigma0, eta, horizon):
    lam = _check_spectrum(eigenvalues)
    r = fixed_point(lam, n, sigma0)
    st = stopping_time(lam, n, sigma0, eta, horizon)
    return ComplexityProfile(eigenvalues=np.sort(lam)[::-1].copy(), n=int(n),
                             sigma0=float(sigma0), eta=float(eta),
                             fixed_point_sq=r, stopping_time=st.t_hat,
                             saturated=st.saturated)
