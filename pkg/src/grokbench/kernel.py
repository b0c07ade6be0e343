"""Mahalanobis kernels, ridgeless kernel machines, Jacobians and AGOP."""

from dataclasses import dataclass

import numpy as np

from .linalg import solve_spd, symmetrize

QUADRATIC = "quadratic"
GAUSSIAN = "gaussian"
DEFAULT_BANDWIDTH = 2.5

# Rows of the evaluation set processed per AGOP block; bounds memory at
# chunk * d * p doubles.
AGOP_CHUNK = 256


@dataclass(frozen=True)
class KernelSpec:
    kind: str = QUADRATIC
    bandwidth: float = DEFAULT_BANDWIDTH

    def __post_init__(self):
        if self.kind not in (QUADRATIC, GAUSSIAN):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class KernelMachine:
    spec: KernelSpec
    M: np.ndarray
    X: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0


def _check_dims(M, *mats):
    d = M.shape[0]
    if M.shape != (d, d):
        raise ValueError(f"feature matrix must be square, got {M.shape}")
    for A in mats:
        if A.shape[-1] != d:
            raise ValueError(f"input dimension {A.shape[-1]} does not match feature matrix {d}")


def k_eval(spec, M, x, xp):
    x, xp, M = np.asarray(x, float), np.asarray(xp, float), np.asarray(M, float)
    _check_dims(M, x, xp)
    if spec.kind == QUADRATIC:
        return float(x @ M @ xp) ** 2
    z = x - xp
    return float(np.exp(-(z @ M @ z) / spec.bandwidth))


def _linear(M, X1, X2):
    return X1 @ M @ X2.T


def _gaussian(M, X1, X2, bandwidth):
    XM1 = X1 @ M
    sq1 = np.einsum("ij,ij->i", XM1, X1)
    sq2 = np.einsum("ij,ij->i", X2 @ M, X2)
    dist = sq1[:, None] + sq2[None, :] - 2.0 * (XM1 @ X2.T)
    np.maximum(dist, 0.0, out=dist)
    return np.exp(-dist / bandwidth)


def kernel_matrix(spec, M, X1, X2):
    M = np.asarray(M, float)
    X1, X2 = np.atleast_2d(X1), np.atleast_2d(X2)
    _check_dims(M, X1, X2)
    if spec.kind == QUADRATIC:
        return _linear(M, X1, X2) ** 2
    return _gaussian(M, X1, X2, spec.bandwidth)


def fit(spec, M, X, Y, jitter=0.0):
    """Ridgeless fit ``alpha = k(X, X; M)^-1 Y``."""
    M = symmetrize(M)
    X = np.atleast_2d(np.asarray(X, float))
    Y = np.asarray(Y, float)
    K = kernel_matrix(spec, M, X, X)
    K = symmetrize(K)
    alpha, used = solve_spd(K, Y, jitter)
    return KernelMachine(spec, M, X, alpha, used)


def predict(km, X):
    return kernel_matrix(km.spec, km.M, np.atleast_2d(X), km.X) @ km.alpha


def _column_support(X):
    """Nonzero row indices and values for every column of the training inputs."""
    support = []
    for c in range(X.shape[1]):
        rows = np.flatnonzero(X[:, c])
        support.append((rows, X[rows, c]))
    return support


def _gradient_factors(km, Z, support):
    """Return ``U`` of shape (b, d, p) with Jacobian ``J_i = scale * M @ U[i]``.

    Quadratic: grad f_l(x) = 2 M sum_j alpha_jl (x^T M x_j) x_j.
    Gaussian:  grad f_l(x) = -(2/L) M sum_j alpha_jl k(x, x_j) (x - x_j).
    The sum over training centers is split by nonzero column so one-hot inputs
    cost O(n * nnz * p) rather than O(n^2 * d * p).
    """
    Xtr, alpha = km.X, km.alpha
    if km.spec.kind == QUADRATIC:
        W = _linear(km.M, Z, Xtr)
    else:
        W = _gaussian(km.M, Z, Xtr, km.spec.bandwidth)
    b, d, p = Z.shape[0], Xtr.shape[1], alpha.shape[1]
    U = np.empty((b, d, p))
    for c, (rows, vals) in enumerate(support):
        if rows.size == 0:
            U[:, c, :] = 0.0
        else:
            U[:, c, :] = (W[:, rows] * vals) @ alpha[rows]
    if km.spec.kind == GAUSSIAN:
        U = Z[:, :, None] * (W @ alpha)[:, None, :] - U
    return U


def _gradient_scale(spec):
    return 2.0 if spec.kind == QUADRATIC else -2.0 / spec.bandwidth


def jacobian(km, x):
    """Transposed Jacobian, shape (d, p); column ``l`` is grad f_l(x)."""
    x = np.asarray(x, float)
    _check_dims(km.M, x)
    U = _gradient_factors(km, x[None, :], _column_support(km.X))[0]
    return _gradient_scale(km.spec) * (km.M @ U)


def agop(km, X=None):
    """Average gradient outer product ``(1/n) sum_j J(x_j) J(x_j)^T``.

    Evaluated over the machine's training inputs unless ``X`` is given.
    """
    X = km.X if X is None else np.atleast_2d(np.asarray(X, float))
    if X.shape[0] == 0:
        raise ValueError("AGOP needs at least one evaluation point")
    _check_dims(km.M, X)
    support = _column_support(km.X)
    d = X.shape[1]
    S = np.zeros((d, d))
    for start in range(0, X.shape[0], AGOP_CHUNK):
        U = _gradient_factors(km, X[start:start + AGOP_CHUNK], support)
        flat = U.transpose(1, 0, 2).reshape(d, -1)
        S += flat @ flat.T
    scale = _gradient_scale(km.spec)
    G = (scale * scale / X.shape[0]) * (km.M @ S @ km.M)
    return symmetrize(G)
