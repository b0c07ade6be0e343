"""Modular-arithmetic tasks, one-hot encodings and seeded train/test splits."""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .rng import Xoshiro256


class Op(str, Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    SUM_OF_SQUARES = "sumsq"


def is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for k in range(3, math.isqrt(n) + 1, 2):
        if n % k == 0:
            return False
    return True


@dataclass(frozen=True)
class ModTask:
    op: Op
    p: int

    def __post_init__(self):
        object.__setattr__(self, "op", Op(self.op))
        if not is_prime(int(self.p)):
            raise ValueError(f"modulus must be prime, got {self.p}")

    def label(self, a, b):
        p = self.p
        if self.op is Op.ADD:
            return (a + b) % p
        if self.op is Op.SUB:
            return (a - b) % p
        if self.op is Op.MUL:
            return (a * b) % p
        if self.op is Op.DIV:
            if b % p == 0:
                raise ZeroDivisionError("division by zero mod p")
            return (a * pow(b, p - 2, p)) % p
        return (a * a + b * b) % p

    @property
    def size(self):
        """Number of distinct input pairs N."""
        return self.p * (self.p - 1) if self.op is Op.DIV else self.p * self.p


def make_table(task):
    """Full Cayley table as ``(a, b, label)`` rows, ``a`` major."""
    b_start = 1 if task.op is Op.DIV else 0
    return [(a, b, task.label(a, b)) for a in range(task.p) for b in range(b_start, task.p)]


def encode_pair(a, b, p):
    if not (0 <= a < p and 0 <= b < p):
        raise ValueError(f"residues ({a}, {b}) out of range for p={p}")
    x = np.zeros(2 * p)
    x[a] = 1.0
    x[p + b] = 1.0
    return x


def decode_pair(x, p):
    return int(np.argmax(x[:p])), int(np.argmax(x[p:2 * p]))


def train_count(fraction, total):
    # Half-up rounding: round(0.5 * 3721) must be 1861.
    return int(math.floor(fraction * total + 0.5))


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    fraction: float
    seed: int
    p: int
    rows: list = field(repr=False)
    # Task id per row (0 for single-task data, 0/1 in multitask mode).
    task_ids: np.ndarray = field(default=None, repr=False)
    # Operation name per task id, when known.
    ops: tuple = ()

    @property
    def X_train(self):
        return self.X[self.train_idx]

    @property
    def Y_train(self):
        return self.Y[self.train_idx]

    @property
    def X_test(self):
        return self.X[self.test_idx]

    @property
    def Y_test(self):
        return self.Y[self.test_idx]

    @property
    def multitask(self):
        return self.X.shape[1] == 2 * self.p + 1

    def with_inputs(self, X):
        """Same split and labels over transformed inputs."""
        return Dataset(X, self.Y, self.train_idx, self.test_idx, self.fraction,
                       self.seed, self.p, self.rows, self.task_ids, self.ops)


def _check_fraction(fraction):
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"training fraction must lie in (0, 1], got {fraction}")


def _seeded_order(n, seed):
    return np.asarray(Xoshiro256(seed).permutation(n), dtype=np.int64)


def split(table, p, fraction, seed=0, ops=()):
    """Encode ``table`` and split it; the first ``round(r*N)`` shuffled rows train."""
    _check_fraction(fraction)
    N = len(table)
    X = np.zeros((N, 2 * p))
    Y = np.zeros((N, p))
    for i, (a, b, label) in enumerate(table):
        X[i] = encode_pair(a, b, p)
        Y[i, label] = 1.0
    order = _seeded_order(N, seed)
    n_train = train_count(fraction, N)
    return Dataset(
        X=X, Y=Y,
        train_idx=np.sort(order[:n_train]),
        test_idx=np.sort(order[n_train:]),
        fraction=fraction, seed=seed, p=p, rows=list(table),
        task_ids=np.zeros(N, dtype=np.int64), ops=tuple(ops),
    )


def make_dataset(task, fraction, seed=0):
    return split(make_table(task), task.p, fraction, seed, ops=(task.op.value,))


def encode_multitask(task_a, task_b, fraction, seed=0):
    """Two tasks over one shared pair split; a trailing bit selects the task."""
    if task_a.p != task_b.p:
        raise ValueError(f"modulus mismatch: {task_a.p} vs {task_b.p}")
    _check_fraction(fraction)
    p = task_a.p
    table_a, table_b = make_table(task_a), make_table(task_b)
    if [r[:2] for r in table_a] != [r[:2] for r in table_b]:
        raise ValueError("tasks must share the same input pairs")
    N = len(table_a)
    X = np.zeros((2 * N, 2 * p + 1))
    Y = np.zeros((2 * N, p))
    rows = []
    for t, table in enumerate((table_a, table_b)):
        for i, (a, b, label) in enumerate(table):
            r = t * N + i
            X[r, :2 * p] = encode_pair(a, b, p)
            X[r, 2 * p] = float(t)
            Y[r, label] = 1.0
            rows.append((a, b, label))
    order = _seeded_order(N, seed)
    n_train = train_count(fraction, N)
    train_pairs = np.sort(order[:n_train])
    test_pairs = np.sort(order[n_train:])
    return Dataset(
        X=X, Y=Y,
        train_idx=np.concatenate([train_pairs, train_pairs + N]),
        test_idx=np.concatenate([test_pairs, test_pairs + N]),
        fraction=fraction, seed=seed, p=p, rows=rows,
        task_ids=np.repeat(np.arange(2), N),
        ops=(task_a.op.value, task_b.op.value),
    )
