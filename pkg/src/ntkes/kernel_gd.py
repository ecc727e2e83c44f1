"""Kernel regression trained by gradient descent, and the h_t + e_t split.

Kernel GD on the training data has closed linear dynamics: with K_n the
normalized gram matrix, the residual obeys u(t) = -(I - eta*K_n)^t y.  The
regressor after t steps is a kernel expansion over the training points whose
coefficients are the running sum of the iterates alpha^(t') = (I - eta*K_n)^t' y.

The same expansion applied to a *network's* recorded residuals gives h_t, the
RKHS component of the trained network; the leftover e_t = f_t - h_t is measured
in sup norm on a query grid by decomposition_sup_error.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kernel import GramSpectrum, gram_matrix, ntk_matrix


@dataclass
class KernelGDState:
    """Gram matrix plus lazily extended iterate histories.

    alpha_history[t] = (I - eta*K_n)^t y and residual_history[t] = -alpha_history[t];
    histories grow on demand, one matrix-vector product per step.
    """

    spectrum: GramSpectrum
    covariates: np.ndarray  # training inputs; needed for query-time kernel rows
    responses: np.ndarray
    eta: float
    mode: str
    residual_history: list
    alpha_history: list


def kernel_gd_state(S, eta, mode="biased"):
    """Build the state for kernel GD on training set S with step size eta."""
    if not np.isfinite(eta) or eta < 0.0:
        raise ConfigError(f"step size must be finite and nonnegative, got {eta}")
    spectrum = gram_matrix(S, mode)
    y = np.asarray(S.responses, dtype=float).copy()
    return KernelGDState(spectrum=spectrum, covariates=np.asarray(S.covariates, float),
                         responses=y, eta=eta, mode=mode,
                         residual_history=[-y], alpha_history=[y.copy()])


def _extend(state, t):
    """Grow the histories so indices 0..t exist."""
    Kn = state.spectrum.normalized
    alpha = state.alpha_history[-1]
    while len(state.alpha_history) <= t:
        alpha = alpha - state.eta * (Kn @ alpha)
        state.alpha_history.append(alpha)
        state.residual_history.append(-alpha)


def residual_iterate(state, steps):
    """Return u(t) = -(I - eta*K_n)^t y, computed by repeated mat-vec products."""
    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise ConfigError(f"steps must be a nonnegative integer, got {steps}")
    _extend(state, steps)
    return state.residual_history[steps].copy()


def regressor_predict(state, steps, X_query):
    """Evaluate the kernel-GD regressor after `steps` steps on query points.

    f_hat_t(x) = (eta/n) * sum_{t'<t} sum_i K(x, x_i) * alpha_i^(t'); zero at t=0.
    """
    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise ConfigError(f"steps must be a nonnegative integer, got {steps}")
    Xq = np.asarray(X_query, dtype=float)
    if Xq.ndim != 2:
        raise ConfigError("query points must form a 2-D matrix")
    if steps == 0:
        return np.zeros(Xq.shape[0])
    _extend(state, steps - 1)
    coef = np.sum(state.alpha_history[:steps], axis=0)
    rows = ntk_matrix(Xq, state.covariates, state.mode)
    return (state.eta / state.spectrum.n) * (rows @ coef)


def h_component(trace, dataset, eta, steps, X_query, mode="biased"):
    """RKHS component of a trained network, built from its recorded residuals.

    h_t(x) = -(eta/n) * sum_{t'<t} sum_j K(x, x_j) * u_j(t') with u(t') taken
    from trace.residuals.  Zero function at t=0.
    """
    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise ConfigError(f"steps must be a nonnegative integer, got {steps}")
    if len(trace.residuals) < steps:
        raise ConfigError(
            f"trace holds {len(trace.residuals)} residuals, need {steps} "
            f"(t' = 0..{steps - 1})")
    Xq = np.asarray(X_query, dtype=float)
    if Xq.ndim != 2:
        raise ConfigError("query points must form a 2-D matrix")
    n = len(dataset.responses)
    if steps == 0:
        return np.zeros(Xq.shape[0])
    csum = np.sum(trace.residuals[:steps], axis=0)
    rows = ntk_matrix(Xq, np.asarray(dataset.covariates, float), mode)
    return -(eta / n) * (rows @ csum)


def decomposition_sup_error(network_out, h_out):
    """max_i |network_out[i] - h_out[i]| over the query grid."""
    a = np.asarray(network_out, dtype=float)
    b = np.asarray(h_out, dtype=float)
    if a.shape != b.shape:
        raise ConfigError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ConfigError("sup error needs at least one query point")
    return float(np.abs(a - b).max())
