"""Dense linear algebra: symmetric eigensystems, PSD powers, SPD solves,
the unitary DFT matrix and circulant/Hankel constructors."""

import warnings

import numpy as np
import scipy.linalg

EIG_CLAMP = 1e-12
NON_PSD_TOL = 1e-6


class SingularKernelError(np.linalg.LinAlgError):
    pass


def symmetrize(A):
    A = np.asarray(A, dtype=float)
    return (A + A.T) / 2.0


def sym_eig(A):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return np.linalg.eigh(symmetrize(A))


def psd_power(M, s, project=False):
    """Fractional power of a PSD matrix.

    Eigenvalues below ``1e-12 * lambda_max`` are clamped to zero first. Inputs
    with ``lambda_min < -1e-6 * lambda_max`` are rejected as materially
    indefinite unless ``project`` is set, in which case the matrix is first
    projected onto the PSD cone (negative eigenvalues dropped).
    """
    if s <= 0:
        raise ValueError("exponent must be positive")
    lam, V = sym_eig(M)
    top = lam[-1]
    if top <= 0:
        if lam[0] < 0 and not project:
            raise ValueError("matrix is not positive semidefinite")
        return np.zeros_like(V)
    if lam[0] < -NON_PSD_TOL * top and not project:
        raise ValueError(
            f"matrix is not positive semidefinite (lambda_min={lam[0]:.3e}, lambda_max={top:.3e})")
    lam = np.where(lam < EIG_CLAMP * top, 0.0, lam)
    out = (V * lam ** s) @ V.T
    return symmetrize(out)


def _factor_solve(K, Y):
    try:
        factor = scipy.linalg.cho_factor(K, lower=True)
        return scipy.linalg.cho_solve(factor, Y)
    except np.linalg.LinAlgError:
        pass
    # Invertible but indefinite kernels (e.g. quadratic kernels with an
    # indefinite M) still admit a Bunch-Kaufman LDL^T solve.
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(K, Y, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise np.linalg.LinAlgError(str(exc)) from exc


def solve_spd(K, Y, jitter=0.0):
    """Solve ``(K + jitter I) alpha = Y`` by symmetric factorization.

    Cholesky first, then symmetric-indefinite LDL^T. If both fail one retry is
    made with jitter ``1e-10 * tr(K)/n`` added. Returns ``(alpha, applied_jitter)``.
    """
    K = np.asarray(K, dtype=float)
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel matrix has non-finite entries")
    n = K.shape[0]
    eye = np.eye(n)
    try:
        return _factor_solve(K + jitter * eye, Y), float(jitter)
    except np.linalg.LinAlgError:
        pass
    retry = jitter + 1e-10 * abs(np.trace(K)) / n
    try:
        return _factor_solve(K + retry * eye, Y), float(retry)
    except np.linalg.LinAlgError as exc:
        raise SingularKernelError(f"kernel matrix is singular even with jitter {retry:.3e}") from exc


def dft(d):
    """Unitary DFT matrix with ``F[j, k] = omega**(j*k) / sqrt(d)``, ``omega = exp(-2 pi i / d)``."""
    if d <= 0:
        raise ValueError("DFT size must be positive")
    jk = np.outer(np.arange(d), np.arange(d)) % d
    return np.exp(-2j * np.pi * jk / d) / np.sqrt(d)


def circulant(c, kind="circulant"):
    """Rows ``c, sigma(c), sigma^2(c), ...`` (circulant) or ``c, sigma^-1(c), ...`` (Hankel).

    ``sigma`` shifts coordinates one cell to the right, so row ``i`` of the
    circulant has ``C[i, j] = c[(j - i) % p]``.
    """
    c = np.asarray(c, dtype=float)
    p = len(c)
    i = np.arange(p)[:, None]
    j = np.arange(p)[None, :]
    if kind == "circulant":
        return c[(j - i) % p]
    if kind == "hankel":
        return c[(j + i) % p]
    raise ValueError(f"unknown circulant kind {kind!r}")


def shift(u, k=1):
    """``sigma^k(u)`` with ``[sigma^k(u)]_j = u[(j - k) % p]``."""
    return np.roll(np.asarray(u), k)


def circulant_log_check(C, tol=1e-9):
    """True when ``C == F diag(sqrt(p) F c) F^H`` for ``c`` its first row."""
    C = np.asarray(C, dtype=float)
    p = C.shape[0]
    F = dft(p)
    eig = np.sqrt(p) * (F @ C[0])
    rebuilt = (F * eig) @ F.conj().T
    norm = np.linalg.norm(C)
    if norm == 0:
        return True
    return bool(np.linalg.norm(C - rebuilt) / norm < tol)
