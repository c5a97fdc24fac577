import numpy as np
import pytest

from kgt.topology import (
    TopologyError,
    build_complete,
    build_disconnected,
    build_ring,
    from_weights,
    load_weights,
    make_topology,
    spectral_gap,
)


def random_mixing(n, rng):
    # Metropolis weights on a random connected graph
    A = rng.random((n, n)) < 0.4
    A = np.triu(A, 1)
    A = A | A.T
    for i in range(n - 1):
        A[i, i + 1] = A[i + 1, i] = True
    deg = A.sum(axis=1)
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if A[i, j]:
                W[i, j] = 1.0 / (1 + max(deg[i], deg[j]))
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return W


def power_iteration_rho(W, iters=20000):
    # independent oracle: power iteration on (W - J)^2
    n = W.shape[0]
    M = W - np.full((n, n), 1.0 / n)
    v = np.random.default_rng(1).standard_normal(n)
    lam = 0.0
    for _ in range(iters):
        w = M @ (M @ v)
        lam = np.linalg.norm(w) / np.linalg.norm(v)
        v = w / np.linalg.norm(w)
    return np.sqrt(lam)


def test_ring_trivial_sizes():
    one = build_ring(1)
    assert one.weights.tolist() == [[1.0]]
    assert one.p == 1.0
    two = build_ring(2)
    assert np.all(two.weights == 0.5)
    three = build_ring(3)
    assert np.allclose(three.weights, 1 / 3)
    assert three.p == 1.0


def test_ring_structure():
    W = build_ring(7).weights
    for i in range(7):
        nz = set(np.flatnonzero(W[i]))
        assert nz == {i, (i - 1) % 7, (i + 1) % 7}
        assert np.allclose(W[i, list(nz)], 1 / 3)


def test_ring10_spectral_gap_matches_circulant_eigenvalue():
    rho = (1 + 2 * np.cos(2 * np.pi / 10)) / 3
    W = build_ring(10)
    assert rho == pytest.approx(0.8727, abs=1e-4)
    assert W.p == pytest.approx(1 - rho**2, abs=1e-12)
    assert W.rho == pytest.approx(power_iteration_rho(W.weights), abs=1e-8)


@pytest.mark.parametrize("n", [1, 4, 10])
def test_complete(n):
    W = build_complete(n)
    assert np.all(W.weights == 1.0 / n)
    assert W.p == 1.0


def test_complete_gossip_is_exact_average():
    X = np.random.default_rng(0).standard_normal((5, 10))
    Y = build_complete(10).gossip(X)
    assert np.allclose(Y, X.mean(axis=1, keepdims=True))


def test_disconnected():
    W = build_disconnected(5)
    assert np.array_equal(W.weights, np.eye(5))
    assert W.p == 0.0
    X = np.random.default_rng(0).standard_normal((3, 5))
    assert np.array_equal(W.gossip(X), X)


@pytest.mark.parametrize("builder", [build_ring, build_complete, build_disconnected])
def test_zero_nodes_rejected(builder):
    with pytest.raises(TopologyError):
        builder(0)


def test_from_weights_accepts_and_rejects():
    assert from_weights([[0.5, 0.5], [0.5, 0.5]]).p == 1.0
    with pytest.raises(TopologyError, match="negative"):
        from_weights([[1.1, -0.1], [-0.1, 1.1]])
    with pytest.raises(TopologyError, match="symmetric"):
        from_weights([[0.6, 0.4], [0.5, 0.5]])
    with pytest.raises(TopologyError, match="stochastic"):
        from_weights([[0.6, 0.6], [0.6, 0.6]])
    with pytest.raises(TopologyError, match="square"):
        from_weights([[1.0, 0.0]])


def test_spectral_gap_exact_extremes():
    assert spectral_gap(np.full((6, 6), 1 / 6)) == 1.0
    assert spectral_gap(np.eye(6)) == 0.0
    with pytest.raises(TopologyError):
        spectral_gap([[0.6, 0.4], [0.5, 0.5]])


def test_weights_are_immutable():
    W = build_ring(5)
    with pytest.raises(ValueError):
        W.weights[0, 0] = 2.0


def test_load_from_file(tmp_path):
    path = tmp_path / "w.txt"
    np.savetxt(path, random_mixing(6, np.random.default_rng(3)))
    W = load_weights(path)
    assert W.n == 6 and 0 < W.p <= 1
    assert make_topology(f"file:{path}", 6).p == W.p
    with pytest.raises(TopologyError):
        make_topology(f"file:{path}", 5)
    with pytest.raises(TopologyError):
        make_topology("star", 5)


def _contraction_violation(W, rng, trials=1000, d=4):
    worst = -np.inf
    for _ in range(trials):
        X = rng.standard_normal((d, W.n)) * rng.exponential()
        Xbar = X.mean(axis=1, keepdims=True)
        lhs = np.sum((W.gossip(X) - Xbar) ** 2)
        rhs = (1 - W.p) * np.sum((X - Xbar) ** 2)
        worst = max(worst, (lhs - rhs) / max(1.0, np.sum((X - Xbar) ** 2)))
    return worst


@pytest.mark.parametrize("W", [build_ring(10), build_complete(10), build_disconnected(10),
                               build_ring(25)], ids=["ring", "complete", "disc", "ring25"])
def test_contraction_property(W):
    assert _contraction_violation(W, np.random.default_rng(0)) <= 1e-12


def test_contraction_random_matrices():
    rng = np.random.default_rng(7)
    for n in (4, 8, 12):
        W = from_weights(random_mixing(n, rng))
        assert _contraction_violation(W, rng) <= 1e-12


def test_gossip_preserves_average():
    rng = np.random.default_rng(2)
    for W in (build_ring(9), from_weights(random_mixing(9, rng))):
        X = rng.standard_normal((5, 9))
        assert np.allclose(W.gossip(X).mean(axis=1), X.mean(axis=1), atol=1e-12, rtol=0)
