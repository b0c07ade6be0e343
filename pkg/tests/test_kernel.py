import numpy as np
import pytest

from grokbench.dataset import ModTask, make_dataset
from grokbench.kernel import (
    KernelMachine,
    KernelSpec,
    agop,
    fit,
    jacobian,
    k_eval,
    kernel_matrix,
    predict,
)
from grokbench.measures import accuracy

Q = KernelSpec("quadratic")
G = KernelSpec("gaussian", 2.5)


def _random_machine(spec, n=12, d=6, p=3, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(d, d)) / np.sqrt(d)
    M = B @ B.T
    X = rng.normal(size=(n, d)) / np.sqrt(d)
    alpha = rng.normal(size=(n, p))
    return KernelMachine(spec, M, X, alpha), rng


def _fd_jacobian(km, x, h=1e-5):
    d = len(x)
    J = np.zeros((d, km.alpha.shape[1]))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        J[i] = (predict(km, x + e)[0] - predict(km, x - e)[0]) / (2 * h)
    return J


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("laplace")
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 0.0)


def test_k_eval_examples():
    x = np.array([0, 1, 0, 0, 0, 1.0])
    assert k_eval(Q, np.eye(6), x, x) == 4.0
    M = np.diag(np.arange(1.0, 7.0))
    assert k_eval(G, M, x, x) == 1.0
    y = np.array([1, 0, 0, 1, 0, 0.0])
    assert k_eval(G, np.eye(6), x, y) == pytest.approx(np.exp(-1.6), abs=1e-15)
    with pytest.raises(ValueError):
        k_eval(Q, np.eye(5), x, x)


def test_quadratic_symmetry():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(5, 5))
    M = B + B.T
    x, y = rng.normal(size=5), rng.normal(size=5)
    assert k_eval(Q, M, x, y) == pytest.approx(k_eval(Q, M.T, y, x), rel=1e-12)


@pytest.mark.parametrize("spec", [Q, G])
def test_kernel_matrix_matches_pointwise(spec):
    rng = np.random.default_rng(2)
    B = rng.normal(size=(4, 4))
    M = B @ B.T
    X = rng.normal(size=(9, 4))
    K = kernel_matrix(spec, M, X, X)
    assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()
    for i, j in rng.integers(0, 9, size=(5, 2)):
        assert K[i, j] == pytest.approx(k_eval(spec, M, X[i], X[j]), rel=1e-10)
    one = kernel_matrix(spec, M, X[:1], X[:1])
    assert one.shape == (1, 1) and one[0, 0] == pytest.approx(k_eval(spec, M, X[0], X[0]))


def test_fit_single_point():
    x = np.array([[1.0, 2.0, 0.0]])
    y = np.array([[3.0, -1.0]])
    km = fit(Q, np.eye(3), x, y)
    assert np.allclose(km.alpha, y / 25.0)
    z = np.array([0.5, 0.0, 1.0])
    assert np.allclose(predict(km, z), k_eval(Q, np.eye(3), z, x[0]) * km.alpha[0])


def test_fit_interpolates_full_table():
    d = make_dataset(ModTask("add", 5), 1.0)
    km = fit(Q, np.eye(10), d.X_train, d.Y_train)
    pred = predict(km, d.X_train)
    assert accuracy(pred, d.Y_train) == 1.0
    assert np.abs(pred - d.Y_train).max() < 1e-6
    again = fit(Q, np.eye(10), d.X_train, d.Y_train)
    assert np.array_equal(predict(again, d.X_train), pred)


@pytest.mark.parametrize("spec", [Q, G])
def test_predict_matches_contraction(spec):
    km, rng = _random_machine(spec)
    Z = rng.normal(size=(4, 6))
    manual = np.array([[sum(k_eval(spec, km.M, z, xj) * km.alpha[j, l] for j, xj in enumerate(km.X))
                        for l in range(3)] for z in Z])
    assert np.allclose(predict(km, Z), manual, rtol=1e-10)


def test_jacobian_examples():
    e1 = np.array([0.0, 1.0, 0.0])
    km = KernelMachine(Q, np.eye(3), e1[None, :], np.ones((1, 1)))
    assert np.allclose(jacobian(km, e1)[:, 0], 2 * e1)
    kg = KernelMachine(G, np.eye(3), e1[None, :], np.ones((1, 1)))
    assert np.allclose(jacobian(kg, e1), 0.0)


@pytest.mark.parametrize("spec", [Q, G])
def test_jacobian_finite_differences(spec):
    km, rng = _random_machine(spec)
    worst = 0.0
    for _ in range(10):
        x = rng.normal(size=6) / np.sqrt(6)
        J = jacobian(km, x)
        fd = _fd_jacobian(km, x)
        worst = max(worst, np.abs(J - fd).max() / np.abs(J).max())
    assert worst < 1e-6


@pytest.mark.parametrize("spec", [Q, G])
def test_agop_matches_fd_outer_products(spec):
    km, rng = _random_machine(spec, n=8)
    Xe = rng.normal(size=(5, 6)) / np.sqrt(6)
    ref = sum(_fd_jacobian(km, x) @ _fd_jacobian(km, x).T for x in Xe) / len(Xe)
    Gm = agop(km, Xe)
    assert np.linalg.norm(Gm - ref) / np.linalg.norm(ref) < 1e-5


@pytest.mark.parametrize("spec", [Q, G])
def test_agop_psd_and_default_rows(spec):
    km, _ = _random_machine(spec, n=30)
    Gm = agop(km)
    lam = np.linalg.eigvalsh(Gm)
    assert lam[0] >= -1e-10 * lam[-1]
    assert np.allclose(Gm, agop(km, km.X))


def test_agop_rank_one_single_sample():
    km, rng = _random_machine(Q, p=1)
    x = rng.normal(size=6)
    Gm = agop(km, x)
    g = jacobian(km, x)[:, 0]
    assert np.allclose(Gm, np.outer(g, g))
    assert np.linalg.matrix_rank(Gm, tol=1e-10 * np.abs(Gm).max()) <= 1


def test_agop_permutation_invariant():
    d = make_dataset(ModTask("add", 7), 0.6, seed=3)
    km = fit(G, np.eye(14), d.X_train, d.Y_train)
    perm = np.random.default_rng(0).permutation(len(d.X_train))
    km2 = fit(G, np.eye(14), d.X_train[perm], d.Y_train[perm])
    assert np.allclose(agop(km), agop(km2), rtol=1e-8, atol=1e-12)


def test_agop_chunking_consistent(monkeypatch):
    import grokbench.kernel as kn
    km, _ = _random_machine(G, n=40)
    full = agop(km)
    monkeypatch.setattr(kn, "AGOP_CHUNK", 7)
    assert np.allclose(agop(km), full, rtol=1e-12)
    with pytest.raises(ValueError):
        agop(km, np.zeros((0, 6)))
