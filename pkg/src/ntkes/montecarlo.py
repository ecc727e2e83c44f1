"""Monte-Carlo estimators tied to the network's random initialization.

hat_h estimates the NTK from one weight draw by replacing the expectation over
w ~ N(0, kappa^2 I) with the empirical average over the m hidden neurons:

    hat_h(W; u, v) = (1/m) sum_r (u~ . v~) 1{w_r . u~ >= 0} 1{w_r . v~ >= 0}

hat_v_R measures the fraction of neurons whose preactivation on u~ lies within
R of the ReLU kink — the neurons whose indicator can flip during training.
sup_deviation_scan records sup|K - hat_h| over a fixed probe grid as the width
grows, which should shrink like ~ m^(-1/2).
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ConfigError, NumericalError
from .kernel import augment, ntk_eval
from .network import init_symmetric


def hat_h(params, u, v, mode="biased"):
    """Single-draw NTK estimate from the neuron activation pattern."""
    au, av = augment(u, mode), augment(v, mode)
    W = params.weights
    if W.shape[1] != au.size:
        raise ConfigError(
            f"dimension mismatch: weights have {W.shape[1]} coordinates, "
            f"augmented input has {au.size}")
    both = ((W @ au) >= 0.0) & ((W @ av) >= 0.0)
    return float(au @ av) * float(np.count_nonzero(both)) / params.width


def hat_v_R(params, u, R, mode="biased"):
    """Fraction of neurons with |w_r . u~| <= R; always in [0, 1]."""
    if not np.isfinite(R) or R < 0.0:
        raise ConfigError(f"radius R must be finite and nonnegative, got {R}")
    au = augment(u, mode)
    W = params.weights
    if W.shape[1] != au.size:
        raise ConfigError(
            f"dimension mismatch: weights have {W.shape[1]} coordinates, "
            f"augmented input has {au.size}")
    return float(np.count_nonzero(np.abs(W @ au) <= R)) / params.width


@dataclass
class DeviationScan:
    widths: list
    sup_devs: list
    grid_size: int
    seed: int


def sup_deviation_scan(widths, grid_size, d, kappa, seed, mode="biased"):
    """sup over a fixed probe grid of |ntk_eval - hat_h|, one W(0) per width.

    The probe pairs come from a dedicated seed stream and are identical for
    every width, so the sup estimates are comparable along the ladder.
    """
    if len(widths) < 2:
        raise ConfigError(f"need at least 2 widths to scan, got {len(widths)}")
    for m in widths:
        if not isinstance(m, (int, np.integer)) or m < 2 or m % 2 != 0:
            raise ConfigError(f"every width must be an even integer >= 2, got {m}")
    if grid_size < 10:
        raise ConfigError(
            f"grid_size below 10 is statistically meaningless, got {grid_size}")

    gen = rng.stream(seed, "probe")
    G = rng.standard_normal(gen, (2 * grid_size, d))
    norms = np.linalg.norm(G, axis=1)
    if np.any(norms == 0.0):
        raise NumericalError("degenerate zero-norm draw while building probe grid")
    G /= norms[:, None]
    U, V = G[:grid_size], G[grid_size:]
    K_true = np.array([ntk_eval(U[i], V[i], mode) for i in range(grid_size)])

    sup_devs = []
    for m in widths:
        p = init_symmetric(int(m), d=d, kappa=kappa,
                           seed=rng.subseed(seed, f"width.{int(m)}"), mode=mode)
        hats = np.array([hat_h(p, U[i], V[i], mode) for i in range(grid_size)])
        sup_devs.append(float(np.abs(K_true - hats).max()))
    return DeviationScan(widths=list(widths), sup_devs=sup_devs,
                         grid_size=int(grid_size), seed=int(seed))
