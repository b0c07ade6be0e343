"""Progress measures, classification metrics and discrete-log reordering."""

from dataclasses import dataclass

import numpy as np

from .dataset import is_prime


def circulant_deviation(A):
    """Normalized total variance of the wrapped diagonals of ``A``.

    Row ``l`` is rotated left by ``l`` so that an exact circulant becomes
    constant down every column; the per-column sums of squared deviations are
    then divided by ``||A||_F^2``.
    """
    A = np.asarray(A, dtype=float)
    norm2 = float(np.sum(A * A))
    if norm2 == 0.0:
        raise ValueError("circulant deviation is undefined for a zero matrix")
    p = A.shape[1]
    idx = (np.arange(A.shape[0])[:, None] + np.arange(p)[None, :]) % p
    S = np.take_along_axis(A, idx, axis=1)
    var = np.sum((S - S.mean(axis=0)) ** 2)
    return float(var / norm2)


def structured_deviation(A):
    """Smaller of the circulant and Hankel deviations (row-reversed block)."""
    A = np.asarray(A, dtype=float)
    return min(circulant_deviation(A), circulant_deviation(A[::-1]))


def agop_alignment(A, B):
    a = np.asarray(A, dtype=float).ravel()
    b = np.asarray(B, dtype=float).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("alignment is undefined for a zero matrix")
    return float(a @ b / (na * nb))


def pearson(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return agop_alignment(A - A.mean(), B - B.mean())


def _labels(Y):
    return np.argmax(Y, axis=1)


def accuracy(pred, Y):
    pred, Y = np.atleast_2d(pred), np.atleast_2d(Y)
    if len(Y) == 0:
        return float("nan")
    # np.argmax returns the lowest index among ties.
    return float(np.mean(np.argmax(pred, axis=1) == _labels(Y)))


def mse(pred, Y):
    pred, Y = np.atleast_2d(pred), np.atleast_2d(Y)
    if Y.size == 0:
        return float("nan")
    return float(np.mean((pred - Y) ** 2))


def correct_class_loss(pred, Y):
    pred, Y = np.atleast_2d(pred), np.atleast_2d(Y)
    if len(Y) == 0:
        return float("nan")
    picked = pred[np.arange(len(Y)), _labels(Y)]
    return float(np.mean((picked - 1.0) ** 2))


@dataclass(frozen=True)
class Generator:
    g: int
    p: int
    # dlog[r] = i with g**i = r (mod p), i in 1..p-1; dlog[0] is unused (0).
    dlog: np.ndarray

    def power(self, i):
        return pow(self.g, i, self.p)


def _order(g, p):
    x, k = g % p, 1
    while x != 1:
        x = (x * g) % p
        k += 1
    return k


def find_generator(p):
    """Smallest generator of the multiplicative group mod ``p``."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if p == 2:
        return Generator(1, 2, np.array([0, 1]))
    for g in range(2, p):
        if _order(g, p) == p - 1:
            break
    dlog = np.zeros(p, dtype=np.int64)
    x = 1
    for i in range(1, p):
        x = (x * g) % p
        dlog[x] = i
    return Generator(g, p, dlog)


def dlog_reorder(block, gen):
    """Move entry ``(r, c)``, ``r, c != 0``, to ``(dlog r, dlog c)``; row/column 0 stay."""
    block = np.asarray(block)
    p = gen.p
    out = block.copy()
    pos = gen.dlog[1:]
    out[np.ix_(pos, pos)] = block[1:, 1:]
    return out


def dlog_inverse_reorder(block, gen):
    block = np.asarray(block)
    out = block.copy()
    pos = gen.dlog[1:]
    out[1:, 1:] = block[np.ix_(pos, pos)]
    return out


def off_diagonal_block(M, p):
    """Bottom-left ``p x p`` block of a ``2p``-indexed feature matrix."""
    return np.asarray(M)[p:2 * p, :p]


def feature_deviation(M, p, op=None, gen=None):
    """Circulant deviation of a feature matrix's bottom-left block.

    For multiplicative tasks the block is reordered by the discrete logarithm
    and its interior ``(p-1) x (p-1)`` sub-block is measured. Returns NaN for a
    zero block.
    """
    block = off_diagonal_block(M, p)
    if op in ("mul", "div"):
        gen = gen or find_generator(p)
        block = dlog_reorder(block, gen)[1:, 1:]
    if not np.any(block):
        return float("nan")
    return structured_deviation(block)


def transition_iteration(values, iters=None, level=0.5):
    """First iteration at which a curve has covered ``level`` of its total change.

    Progress at ``t`` is ``(v_1 - v_t) / (v_1 - v_T)``. Returns None for a
    flat curve.
    """
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return None
    iters = np.arange(1, len(v) + 1) if iters is None else np.asarray(iters)
    total = v[0] - v[-1]
    if total == 0 or not np.isfinite(total):
        return None
    progress = (v[0] - v) / total
    hit = np.flatnonzero(progress >= level)
    return int(iters[hit[0]])


def first_reaching(values, target=1.0, iters=None):
    """First iteration whose value is at least ``target``, or None."""
    v = np.asarray(values, dtype=float)
    iters = np.arange(1, len(v) + 1) if iters is None else np.asarray(iters)
    hit = np.flatnonzero(v >= target)
    return int(iters[hit[0]]) if hit.size else None
