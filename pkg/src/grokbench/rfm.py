"""Recursive Feature Machine loop, enforced-circulant variant and random
circulant feature baselines."""

from dataclasses import dataclass, field, fields
import logging

import numpy as np

from . import kernel as kn
from .linalg import SingularKernelError, circulant, psd_power, symmetrize
from .measures import (
    accuracy,
    agop_alignment,
    circulant_deviation,
    correct_class_loss,
    dlog_inverse_reorder,
    feature_deviation,
    find_generator,
    mse,
)
from .rng import Xoshiro256

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RfmConfig:
    kernel: kn.KernelSpec = field(default_factory=kn.KernelSpec)
    iterations: int = 30
    power: float = 0.5
    seed: int = 0
    # Rescale each new feature matrix to unit max-abs entry. Off by default.
    normalize_m: bool = False
    # Additionally refit with enforce_circulant(M_t) at every iteration and
    # record that model's metrics alongside the plain run.
    enforce: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.power > 0:
            raise ValueError("matrix power must be positive")


@dataclass
class MetricsRecord:
    iter: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float
    correct_class_test_loss: float
    circulant_deviation: float = float("nan")
    agop_alignment: float = float("nan")
    task0_loss: float = None
    task0_acc: float = None
    task1_loss: float = None
    task1_acc: float = None

    def as_row(self, multitask=False):
        names = [f.name for f in fields(self)]
        if not multitask:
            names = names[:8]
        return {n: getattr(self, n) for n in names}


HISTORY_COLUMNS = [f.name for f in fields(MetricsRecord)]


class RfmError(RuntimeError):
    def __init__(self, iteration, cause):
        super().__init__(f"RFM failed at iteration {iteration}: {cause}")
        self.iteration = iteration


@dataclass
class RfmResult:
    machine: kn.KernelMachine
    M: np.ndarray
    history: list
    # snapshots[t] is M_t; snapshots[0] is the identity, snapshots[-1] the final AGOP power.
    snapshots: list
    enforced_history: list = None
    jitter_fired: bool = False


def evaluate(pred_train, Y_train, pred_test, Y_test, iteration, data=None):
    rec = MetricsRecord(
        iter=iteration,
        train_loss=mse(pred_train, Y_train),
        train_acc=accuracy(pred_train, Y_train),
        test_loss=mse(pred_test, Y_test),
        test_acc=accuracy(pred_test, Y_test),
        correct_class_test_loss=correct_class_loss(pred_test, Y_test),
    )
    if data is not None and data.multitask:
        tasks = data.task_ids[data.test_idx]
        for t in (0, 1):
            sel = tasks == t
            setattr(rec, f"task{t}_loss", mse(pred_test[sel], Y_test[sel]))
            setattr(rec, f"task{t}_acc", accuracy(pred_test[sel], Y_test[sel]))
    return rec


def _measure_op(data):
    # The structured block of a multitask matrix is still the first 2p coordinates.
    return data.ops[0] if data.ops else None


def _fit_and_score(data, spec, M, iteration):
    try:
        km = kn.fit(spec, M, data.X_train, data.Y_train)
    except SingularKernelError as exc:
        raise RfmError(iteration, exc) from exc
    pred_train = kn.predict(km, data.X_train)
    pred_test = kn.predict(km, data.X_test) if len(data.test_idx) else np.zeros((0, data.p))
    rec = evaluate(pred_train, data.Y_train, pred_test, data.Y_test, iteration, data)
    return km, rec


def rfm_run(data, cfg):
    """Alternate ridgeless fits and AGOP updates for ``cfg.iterations`` rounds.

    History row ``t`` (1-based) scores the predictor fitted with ``M_{t-1}``
    and measures the feature matrix ``M_t`` it produces. AGOP alignment is
    filled in against the final ``M_T`` once the loop finishes.
    """
    if len(data.train_idx) == 0:
        raise ValueError("training split is empty")
    d, p = data.X.shape[1], data.p
    op = _measure_op(data)
    gen = find_generator(p) if op in ("mul", "div") else None
    M = np.eye(d)
    snapshots = [M]
    history, enforced = [], [] if cfg.enforce else None
    jitter_fired = False
    km = None
    for t in range(cfg.iterations):
        km, rec = _fit_and_score(data, cfg.kernel, M, t + 1)
        jitter_fired |= km.jitter > 0
        if cfg.enforce:
            _, erec = _fit_and_score(data, cfg.kernel, enforce_circulant(M, p), t + 1)
            enforced.append(erec)
            log.info("iter %d enforced test_acc=%.4f test_loss=%.5f", erec.iter, erec.test_acc, erec.test_loss)
        try:
            G = kn.agop(km)
            M = psd_power(G, cfg.power)
        except ValueError as exc:
            raise RfmError(t + 1, exc) from exc
        if cfg.normalize_m:
            M = M / np.abs(M).max()
        snapshots.append(M)
        rec.circulant_deviation = feature_deviation(M, p, op, gen)
        history.append(rec)
        log.info("iter %d train_acc=%.4f test_acc=%.4f test_loss=%.5f dev=%.4f",
                 rec.iter, rec.train_acc, rec.test_acc, rec.test_loss, rec.circulant_deviation)
    final = snapshots[-1]
    for rec, Mt in zip(history, snapshots[1:]):
        rec.agop_alignment = agop_alignment(Mt, final)
    return RfmResult(km, final, history, snapshots, enforced, jitter_fired)


def enforce_circulant(M, p, kind="auto"):
    """Project a feature matrix onto the block form ``[[A, C^T], [C, A]]``.

    The matrix is first rescaled to unit diagonal, the diagonal blocks are set
    to ``I - 11^T/p`` and the bottom-left block is replaced by the exact
    circulant whose column ``l`` is ``sigma^l(c)``, ``c`` the block's first
    column. ``kind="hankel"`` uses ``sigma^-l(c)`` instead; ``"auto"`` picks
    whichever of the two the block is closer to.
    """
    M = np.asarray(M, dtype=float)
    if M.shape[0] < 2 * p:
        raise ValueError(f"expected a matrix of size at least {2 * p}, got {M.shape}")
    diag = np.diag(M)
    if np.any(diag <= 0):
        raise ValueError("feature matrix has a non-positive diagonal entry")
    scale = 1.0 / np.sqrt(diag)
    out = M * scale[:, None] * scale[None, :]
    block = out[p:2 * p, :p]
    if kind == "auto":
        kind = "circulant"
        if np.any(block):
            if circulant_deviation(block[::-1]) < circulant_deviation(block):
                kind = "hankel"
    c = block[:, 0]
    # circulant(c) has rows sigma^i(c); its transpose has those as columns.
    C = circulant(c, "circulant").T if kind == "circulant" else circulant(c, "hankel")
    A = np.eye(p) - np.ones((p, p)) / p
    out[:p, :p] = A
    out[p:2 * p, p:2 * p] = A
    out[p:2 * p, :p] = C
    out[:p, p:2 * p] = C.T
    return symmetrize(out)


def random_circulant_M(p, seed=0, c1=1.0, c2=None, kind="circulant", op=None):
    """Block matrix ``[[A, C^T], [C, A]]`` with ``A = c1 I + c2 11^T`` and a random circulant ``C``.

    The first column of ``C`` is i.i.d. uniform on [0, 1]; column ``l`` is its
    ``l``-fold shift (or inverse shift for ``kind="hankel"``). For ``op`` in
    ``{"mul", "div"}`` the circulant lives on the ``(p-1)`` nonzero residues in
    discrete-log order and is permuted back to natural order, with row and
    column 0 left at zero.
    """
    c2 = -1.0 / p if c2 is None else c2
    rng = Xoshiro256(seed)
    if op in ("mul", "div"):
        c = np.array(rng.uniform(0.0, 1.0, p - 1))
        block = np.zeros((p, p))
        block[1:, 1:] = _structured(c, kind)
        C = dlog_inverse_reorder(block, find_generator(p))
    else:
        C = _structured(np.array(rng.uniform(0.0, 1.0, p)), kind)
    A = c1 * np.eye(p) + c2 * np.ones((p, p))
    return np.block([[A, C.T], [C, A]])


def _structured(c, kind):
    if kind == "circulant":
        return circulant(c, "circulant").T
    if kind == "hankel":
        return circulant(c, "hankel")
    raise ValueError(f"unknown kind {kind!r}")


def transform_inputs(M, X, power=0.25):
    """Map each row ``x`` to ``M^power x``.

    Block matrices ``[[A, C^T], [C, A]]`` with a nonnegative circulant ``C``
    are indefinite in general, so the power is taken of their PSD part.
    """
    R = psd_power(M, power, project=True)
    return np.asarray(X, dtype=float) @ R.T
