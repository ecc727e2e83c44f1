"""Over-parameterized two-layer ReLU network trained by full-batch gradient descent.

The network is

    f(W, x) = (1/sqrt(m)) * sum_r a_r * max(0, w_r . xt)

where xt is the (optionally bias-augmented) input and the output signs a_r are
frozen at initialization.  Initialization is *symmetric*: hidden weights come in
mirrored pairs with opposite output signs, so the network is exactly zero at
init and the kernel regime starts from a clean slate.

Only the hidden weights move under training.  Neuron blocks are processed in
fixed-size chunks in a fixed order so results are deterministic and memory
stays bounded at large widths.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ConfigError, NumericalError
from .kernel import augment_batch

# neurons per block in forward/gradient passes; fixed so chunked sums are
# reproducible across widths for the same BLAS, sized so a block of
# preactivations stays cache-resident at desk-scale sample sizes
_CHUNK = 4096


@dataclass
class NetworkParams:
    """Trainable state plus the frozen pieces needed to measure drift."""

    weights: np.ndarray        # (m, dim) hidden-layer weights, the only trained part
    signs: np.ndarray          # (m,) output weights in {-1, +1}, frozen
    width: int
    init_scale: float          # kappa used at init
    init_snapshot: np.ndarray  # (m, dim) copy of weights at initialization


@dataclass
class GDConfig:
    eta: float
    max_steps: int
    seed: int = 0


@dataclass
class TrainingTrace:
    """Per-step records; each sequence has max_steps + 1 entries (t = 0..T)."""

    residuals: list        # residuals[t] = f_t(S) - y, shape (n,)
    losses: np.ndarray     # losses[t] = ||residuals[t]||^2 / (2n)
    max_drift: np.ndarray  # max_drift[t] = max_r ||w_r(t) - w_r(0)||_2


def init_symmetric(m, d, kappa, seed, mode="biased"):
    """Draw mirrored-pair weights: rows 2k and 2k+1 equal, signs opposite."""
    if not isinstance(m, (int, np.integer)) or m < 2 or m % 2 != 0:
        raise ConfigError(f"width must be an even integer >= 2, got {m}")
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ConfigError(f"input dimension must be a positive integer, got {d}")
    if not (0.0 < kappa <= 1.0):
        raise ConfigError(f"init scale kappa must lie in (0, 1], got {kappa}")
    dim = d + 1 if mode == "biased" else d
    gen = rng.stream(seed, "init")
    half = kappa * rng.standard_normal(gen, (m // 2, dim))
    s_half = rng.signs(gen, m // 2)
    weights = np.repeat(half, 2, axis=0)
    signs = np.empty(m)
    signs[0::2] = s_half
    signs[1::2] = -s_half
    return NetworkParams(weights=weights, signs=signs, width=m,
                         init_scale=float(kappa), init_snapshot=weights.copy())


def _forward(p, Xa, ind_out=None):
    """Predictions at the current weights; records active-neuron indicators
    into ind_out when given (prediction-only callers skip that traffic)."""
    m = p.width
    W, signs = p.weights, p.signs
    sqrt_m = np.sqrt(m)
    yhat = np.zeros(Xa.shape[0])
    for i0 in range(0, m, _CHUNK):
        i1 = min(i0 + _CHUNK, m)
        pre = W[i0:i1] @ Xa.T
        if ind_out is not None:
            ind_out[i0:i1] = pre >= 0.0
        np.maximum(pre, 0.0, out=pre)
        yhat += (signs[i0:i1] / sqrt_m) @ pre
    return yhat


def _apply_grad(p, Xa, u, ind, eta):
    """In-place GD update: w_r -= (eta / (n sqrt(m))) a_r sum_i ind[r,i] u_i xt_i."""
    if eta == 0.0:
        return
    m, n = p.width, Xa.shape[0]
    coef = eta / (n * np.sqrt(m))
    for i0 in range(0, m, _CHUNK):
        i1 = min(i0 + _CHUNK, m)
        grad = (ind[i0:i1] * u) @ Xa
        p.weights[i0:i1] -= coef * p.signs[i0:i1, None] * grad


def forward_batch(p, X, mode="biased"):
    """Evaluate the network on the rows of X (raw inputs, pre-augmentation)."""
    Xa = augment_batch(X, mode)
    if Xa.shape[1] != p.weights.shape[1]:
        raise ConfigError(
            f"input dimension mismatch: augmented inputs have {Xa.shape[1]} "
            f"coordinates, weights have {p.weights.shape[1]}")
    return _forward(p, Xa)


def gd_step(p, S, eta, mode="biased"):
    """One full-batch GD step in place; returns (params, residual before update)."""
    if not np.isfinite(eta) or eta < 0.0:
        raise ConfigError(f"step size must be finite and nonnegative, got {eta}")
    Xa = augment_batch(S.covariates, mode)
    if Xa.shape[1] != p.weights.shape[1]:
        raise ConfigError("input dimension mismatch between params and training set")
    ind = np.empty((p.width, Xa.shape[0]), dtype=bool)
    yhat = _forward(p, Xa, ind_out=ind)
    u = yhat - np.asarray(S.responses, dtype=float)
    _apply_grad(p, Xa, u, ind, eta)
    return p, u


def weight_drift(p):
    """max_r ||w_r - w_r(0)||_2, computed in chunks."""
    worst = 0.0
    for i0 in range(0, p.width, _CHUNK):
        i1 = min(i0 + _CHUNK, p.width)
        norms = np.linalg.norm(p.weights[i0:i1] - p.init_snapshot[i0:i1], axis=1)
        if norms.size:
            worst = max(worst, float(norms.max()))
    return worst


def train(p, S, cfg, mode="biased", observer=None):
    """Run cfg.max_steps GD steps, recording residuals, losses, and drift.

    observer(t, params), when given, is called at every step t = 0..max_steps
    with the parameters *at* step t (before the update that produces t+1).
    Returns (params, TrainingTrace); params is updated in place.
    """
    if not isinstance(cfg.max_steps, (int, np.integer)) or cfg.max_steps < 0:
        raise ConfigError(f"max_steps must be a nonnegative integer, got {cfg.max_steps}")
    if not np.isfinite(cfg.eta) or cfg.eta < 0.0:
        raise ConfigError(f"step size must be finite and nonnegative, got {cfg.eta}")
    Xa = augment_batch(S.covariates, mode)
    if Xa.shape[1] != p.weights.shape[1]:
        raise ConfigError("input dimension mismatch between params and training set")
    u0_sq = float((Xa * Xa).sum(axis=1).max())
    if cfg.eta * u0_sq >= 2.0:
        raise ConfigError(
            f"step size {cfg.eta} too large: need eta < 2/u0^2 = {2.0 / u0_sq:.6g} "
            f"for the largest augmented input norm in this training set")

    y = np.asarray(S.responses, dtype=float)
    n, T = Xa.shape[0], cfg.max_steps
    residuals = []
    losses = np.zeros(T + 1)
    max_drift = np.zeros(T + 1)
    ind_buf = np.empty((p.width, n), dtype=bool)

    for t in range(T + 1):
        yhat = _forward(p, Xa, ind_out=ind_buf)
        u = yhat - y
        with np.errstate(over="ignore"):  # divergence is caught right below
            loss = float(u @ u) / (2.0 * n)
        if not np.isfinite(loss):
            raise NumericalError(
                f"training diverged at step {t}: loss is not finite", step=t)
        residuals.append(u)
        losses[t] = loss
        max_drift[t] = weight_drift(p)
        if observer is not None:
            observer(t, p)
        if t < T:
            _apply_grad(p, Xa, u, ind_buf, cfg.eta)

    return p, TrainingTrace(residuals=residuals, losses=losses, max_drift=max_drift)
