"""Closed-form kernel of the infinite-width two-layer ReLU network.

With augmented inputs w = [x; 1] (biased mode) the kernel is

    K(u, v) = <w_u, w_v> / (2*pi) * (pi - theta),   theta = angle(w_u, w_v),

and the bias-free variant uses the raw vectors. This module assembles gram
matrices, their n-normalized form and eigendecomposition, and fits eigenvalue
decay slopes.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DatasetError, NumericalError

__all__ = [
    "GramSpectrum",
    "augment",
    "augment_batch",
    "ntk_eval",
    "ntk_matrix",
    "gram_matrix",
    "eigendecompose",
    "edr_slope",
    "max_augmented_norm",
]

_TWO_PI = 2.0 * np.pi


def _check_mode(mode):
    if mode not in ("biased", "bias_free"):
        raise ConfigError(f"mode must be 'biased' or 'bias_free', got {mode!r}")


def augment(x, mode="biased"):
    """Append the bias coordinate 1 (biased mode) or return x unchanged (bias_free)."""
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise DatasetError("input vector must be 1-d with at least one coordinate")
    if mode == "bias_free":
        return x
    return np.concatenate([x, [1.0]])


def augment_batch(X, mode="biased"):
    """Row-wise augment of an n x d matrix."""
    _check_mode(mode)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DatasetError("covariates must form a nonempty 2-d matrix")
    if mode == "bias_free":
        return X
    return np.hstack([X, np.ones((X.shape[0], 1))])


def max_augmented_norm(X, mode="biased"):
    """max_i ||augment(x_i)||, the quantity bounding kernel values and step sizes."""
    A = augment_batch(X, mode)
    return float(np.sqrt(np.einsum("ij,ij->i", A, A)).max())


def ntk_eval(u, v, mode="biased"):
    """Kernel value at a single pair of d-dimensional points."""
    ua = augment(u, mode)
    va = augment(v, mode)
    if ua.shape != va.shape:
        raise DatasetError("u and v must have equal dimension")
    nu = float(np.linalg.norm(ua))
    nv = float(np.linalg.norm(va))
    if nu == 0.0 or nv == 0.0:
        raise DatasetError("bias-free kernel undefined at the zero vector")
    g = float(ua @ va)
    if np.array_equal(ua, va):
        theta = 0.0  # angle of a vector with itself; skips the ill-conditioned arccos at 1
    else:
        theta = float(np.arccos(np.clip(g / (nu * nv), -1.0, 1.0)))
    return g / _TWO_PI * (np.pi - theta)


def _kernel_block(A, B, self_pair):
    """Kernel matrix from pre-augmented rows; self_pair marks A and B identical."""
    na = np.sqrt(np.einsum("ij,ij->i", A, A))
    nb = na if self_pair else np.sqrt(np.einsum("ij,ij->i", B, B))
    if na.min() == 0.0 or nb.min() == 0.0:
        raise DatasetError("bias-free kernel undefined at the zero vector")
    G = A @ B.T
    C = G / np.outer(na, nb)
    np.clip(C, -1.0, 1.0, out=C)
    if self_pair:
        np.fill_diagonal(C, 1.0)  # exact angle 0 on the diagonal
    return G / _TWO_PI * (np.pi - np.arccos(C))


def ntk_matrix(X, Z, mode="biased"):
    """Cross-kernel matrix K[i, j] = K(x_i, z_j) for two point sets."""
    A = augment_batch(X, mode)
    B = A if Z is X else augment_batch(Z, mode)
    return _kernel_block(A, B, self_pair=Z is X)


@dataclass
class GramSpectrum:
    """Kernel gram matrix over a training set together with its spectrum.

    gram is the raw n x n kernel matrix, normalized = gram / n. eigenvalues
    (nonincreasing, clamped nonnegative) and the orthonormal eigenvectors are
    filled in by eigendecompose.
    """

    gram: np.ndarray
    normalized: np.ndarray
    n: int
    eigenvalues: np.ndarray = None
    eigenvectors: np.ndarray = None


def _reject_duplicate_rows(X):
    rows = np.ascontiguousarray(X)
    void = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1])))
    if np.unique(void).size != rows.shape[0]:
        raise DatasetError("training covariates contain bitwise-identical rows")


def gram_matrix(S, mode="biased"):
    """Assemble the kernel gram matrix of a training set (spectrum left empty).

    Accepts a TrainingSet or a raw n x d covariate matrix. The result is
    bitwise symmetric (upper triangle mirrored) and rejects datasets with
    bitwise-identical covariate rows.
    """
    X = np.asarray(getattr(S, "covariates", S), dtype=np.float64)
    A = augment_batch(X, mode)
    _reject_duplicate_rows(X)
    K = _kernel_block(A, A, self_pair=True)
    iu, ju = np.triu_indices(K.shape[0], k=1)
    K[ju, iu] = K[iu, ju]
    n = K.shape[0]
    return GramSpectrum(gram=K, normalized=K / n, n=n)


def eigendecompose(g):
    """Fill in the nonincreasing eigenvalues and eigenvectors of g.normalized.

    Round-off negatives are clamped to zero; a clamp below -1e-8 times the top
    eigenvalue signals a genuinely indefinite input and emits a diagnostic.
    Solver non-convergence raises NumericalError carrying the off-diagonal
    Frobenius residual.
    """
    if g.normalized is None:
        raise ConfigError("gram matrix not assembled")
    M = np.asarray(g.normalized, dtype=np.float64)
    try:
        w, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        off = M - np.diag(np.diag(M))
        raise NumericalError(
            "symmetric eigendecomposition failed to converge",
            residual=float(np.linalg.norm(off)),
        ) from exc
    w = w[::-1].copy()
    U = U[:, ::-1].copy()
    top = max(float(w[0]), 0.0)
    if w.min() < -1e-8 * top:
        warnings.warn(
            f"clamping eigenvalue {w.min():.3e} below -1e-8 * lambda_1 = {-1e-8 * top:.3e}; "
            "input matrix is not numerically PSD",
            UserWarning,
            stacklevel=2,
        )
    np.maximum(w, 0.0, out=w)
    return replace(g, eigenvalues=w, eigenvectors=U)


def edr_slope(eigenvalues, j_lo, j_hi):
    """OLS slope of log(lambda_j) against log(j) over 1-indexed j in [j_lo, j_hi]."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if not (1 <= j_lo < j_hi <= lam.size):
        raise DatasetError(
            f"need 1 <= j_lo < j_hi <= {lam.size}, got j_lo={j_lo}, j_hi={j_hi}"
        )
    window = lam[j_lo - 1 : j_hi]
    if np.any(window <= 0.0):
        raise DatasetError("eigenvalues in the fit range must be positive")
    j = np.arange(j_lo, j_hi + 1, dtype=np.float64)
    return float(np.polyfit(np.log(j), np.log(window), 1)[0])
