"""One-hidden-layer network with quadratic activation, trained by hand-written
backprop with AdamW or SGD, plus its AGOP, NFM and NFA correlation."""

from dataclasses import dataclass
import logging
import math

import numpy as np

from .linalg import psd_power, symmetrize
from .measures import agop_alignment, feature_deviation, pearson
from .rfm import MetricsRecord, evaluate
from .rng import Xoshiro256

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    pass


@dataclass
class QuadMlp:
    W1: np.ndarray  # m x d
    W2: np.ndarray  # p x m

    def copy(self):
        return QuadMlp(self.W1.copy(), self.W2.copy())


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adamw"
    lr: float = 1e-3
    weight_decay: float = 1.0
    agop_reg: float = 0.0
    batch_size: int = 32
    epochs: int = 50
    width: int = 1024
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    @classmethod
    def sgd_ablation(cls, **overrides):
        base = dict(optimizer="sgd", lr=1.0, weight_decay=1e-5, agop_reg=1e-3,
                    batch_size=128, width=512)
        base.update(overrides)
        return cls(**base)


def init(d, m, p, seed=0):
    """Entries uniform on ``(-1/sqrt(fan_in), 1/sqrt(fan_in))`` per layer."""
    rng = Xoshiro256(seed)
    b1, b2 = 1.0 / math.sqrt(d), 1.0 / math.sqrt(m)
    W1 = np.array(rng.uniform(-b1, b1, m * d)).reshape(m, d)
    W2 = np.array(rng.uniform(-b2, b2, p * m)).reshape(p, m)
    return QuadMlp(W1, W2)


def forward(net, X):
    H = np.atleast_2d(X) @ net.W1.T
    return (H * H) @ net.W2.T


def loss(pred, Y):
    return float(np.mean((pred - Y) ** 2))


def backward(net, X, Y):
    """Gradients of the mean squared error over all batch entries."""
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    if X.shape[1] != net.W1.shape[1] or Y.shape[1] != net.W2.shape[0] or len(X) != len(Y):
        raise ValueError("input, label and weight shapes do not agree")
    H = X @ net.W1.T
    U = H * H
    R = (2.0 / Y.size) * (U @ net.W2.T - Y)
    dW2 = R.T @ U
    dW1 = (2.0 * (R @ net.W2) * H).T @ X
    return dW1, dW2


def agop_mlp(net, X):
    """AGOP over ``X``; per-sample Jacobian is ``2 W1^T diag(W1 x) W2^T``."""
    X = np.atleast_2d(X)
    H = X @ net.W1.T
    inner = (H.T @ H) * (net.W2.T @ net.W2)
    return symmetrize((4.0 / len(X)) * (net.W1.T @ inner @ net.W1))


def agop_trace(net, X):
    """``tr G`` over ``X`` and its gradients ``(value, dW1, dW2)``."""
    X = np.atleast_2d(X)
    W1, W2 = net.W1, net.W2
    H = X @ W1.T
    S = H.T @ H
    Q = W2.T @ W2
    P = W1 @ W1.T
    c = 4.0 / len(X)
    value = c * float(np.sum(S * Q * P))
    dW1 = c * 2.0 * ((S * Q) @ W1 + (Q * P) @ H.T @ X)
    dW2 = c * 2.0 * (W2 @ (S * P))
    return value, dW1, dW2


def nfm(net):
    return symmetrize(net.W1.T @ net.W1)


def nfa_correlation(net, X):
    return pearson(nfm(net), psd_power(agop_mlp(net, X), 0.5))


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, lr, weight_decay, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.wd, self.betas, self.eps = lr, weight_decay, betas, eps
        self.t = 0
        self.m = self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(w) for w in params]
            self.v = [np.zeros_like(w) for w in params]
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for w, g, m, v in zip(params, grads, self.m, self.v):
            w *= 1 - self.lr * self.wd
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            w -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    """Plain SGD; weight decay enters as an L2 term in the gradient."""

    def __init__(self, lr, weight_decay=0.0):
        self.lr, self.wd = lr, weight_decay

    def step(self, params, grads):
        for w, g in zip(params, grads):
            w -= self.lr * (g + self.wd * w)


def make_optimizer(cfg):
    if cfg.optimizer == "adamw":
        return AdamW(cfg.lr, cfg.weight_decay, cfg.betas, cfg.eps)
    if cfg.optimizer == "sgd":
        return SGD(cfg.lr, cfg.weight_decay)
    raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


@dataclass
class EpochRecord(MetricsRecord):
    nfa_correlation: float = float("nan")


@dataclass
class TrainResult:
    net: QuadMlp
    history: list
    # Square root of the training-set AGOP after each epoch.
    agop_snapshots: list
    nfm_snapshots: list


def _feature_op(data):
    return data.ops[0] if data.ops else None


def train(net, data, cfg, record_snapshots=True, callback=None):
    """Mini-batch training on ``data``'s train split; one history row per epoch."""
    net = net.copy()
    Xtr, Ytr = data.X_train, data.Y_train
    Xte, Yte = data.X_test, data.Y_test
    opt = make_optimizer(cfg)
    rng = Xoshiro256(cfg.seed)
    n = len(Xtr)
    op = _feature_op(data)
    history, agops, nfms = [], [], []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = Xtr[idx], Ytr[idx]
            dW1, dW2 = backward(net, xb, yb)
            if cfg.agop_reg:
                _, r1, r2 = agop_trace(net, xb)
                dW1 = dW1 + cfg.agop_reg * r1
                dW2 = dW2 + cfg.agop_reg * r2
            if not (np.all(np.isfinite(dW1)) and np.all(np.isfinite(dW2))):
                raise DivergenceError(f"non-finite gradient in epoch {epoch}")
            opt.step([net.W1, net.W2], [dW1, dW2])
        pred_tr = forward(net, Xtr)
        pred_te = forward(net, Xte) if len(Xte) else np.zeros((0, data.p))
        base = evaluate(pred_tr, Ytr, pred_te, Yte, epoch, data)
        if not math.isfinite(base.train_loss):
            raise DivergenceError(f"training loss is not finite after epoch {epoch}")
        rec = EpochRecord(**vars(base))
        G = agop_mlp(net, Xtr)
        root = psd_power(G, 0.5) if np.any(G) else G
        rec.nfa_correlation = pearson(nfm(net), root) if np.any(root) else float("nan")
        rec.circulant_deviation = feature_deviation(root, data.p, op)
        history.append(rec)
        agops.append(root)
        if record_snapshots:
            nfms.append(nfm(net))
        log.info("epoch %d train_acc=%.4f test_acc=%.4f train_loss=%.5f nfa=%.3f",
                 epoch, rec.train_acc, rec.test_acc, rec.train_loss, rec.nfa_correlation)
        if callback is not None:
            callback(rec)
    final = agops[-1]
    for rec, G in zip(history, agops):
        if np.any(G) and np.any(final):
            rec.agop_alignment = agop_alignment(G, final)
    if not record_snapshots:
        agops = [final]
    return TrainResult(net, history, agops, nfms)
