import numpy as np
import pytest

from decopt import (
    Graph,
    TopologyError,
    complete,
    ladder,
    metropolis_mixing,
    mixing_for,
    random_graph,
    ring,
    spectral_rho,
    uniform_mixing,
)


def test_ring_triangle():
    g = ring(3)
    assert len(g.edges) == 3
    assert g.is_connected() and g.is_regular()


def test_ring_eight_is_two_regular():
    g = ring(8)
    assert len(g.edges) == 8
    assert np.all(g.degrees() == 2)


def test_ring_rejects_two_nodes():
    with pytest.raises(TopologyError):
        ring(2)


def test_ladder_smallest_is_four_cycle():
    g = ladder(4)
    assert len(g.edges) == 4
    assert np.all(g.degrees() == 2)


def test_ladder_eight_grid_counts():
    g = ladder(8)
    assert len(g.edges) == 10
    deg = sorted(g.degrees())
    assert deg == [2, 2, 2, 2, 3, 3, 3, 3]
    assert g.is_connected()


def test_ladder_rejects_odd():
    with pytest.raises(TopologyError):
        ladder(5)


def test_complete_edge_counts():
    assert len(complete(2).edges) == 1
    assert len(complete(8).edges) == 28
    g1 = complete(1)  # single-node network is valid
    assert len(g1.edges) == 0 and g1.is_connected()


def test_graph_validation():
    with pytest.raises(TopologyError):
        Graph(3, frozenset({(1, 1)}))
    with pytest.raises(TopologyError):
        Graph(3, frozenset({(0, 3)}))
    with pytest.raises(TopologyError):
        Graph(0)
    # duplicate edges collapse under canonicalization
    g = Graph(3, frozenset({(0, 1), (1, 0), (1, 2)}))
    assert len(g.edges) == 2


def test_random_graph_p1_is_complete():
    g = random_graph(8, 1.0, seed=5)
    assert g.edges == complete(8).edges


def test_random_graph_deterministic():
    a = random_graph(8, 0.8, seed=42)
    b = random_graph(8, 0.8, seed=42)
    c = random_graph(8, 0.8, seed=43)
    assert a.edges == b.edges
    assert a.edges != c.edges  # overwhelmingly likely for 28 candidate edges


def test_random_graph_connected_over_many_seeds():
    for seed in range(100):
        assert random_graph(8, 0.8, seed=seed).is_connected()


def test_random_graph_rejects_bad_probability():
    with pytest.raises(TopologyError):
        random_graph(8, 0.0, seed=0)
    with pytest.raises(TopologyError):
        random_graph(8, 1.5, seed=0)


def test_random_graph_retry_budget_exhausted():
    # n=20 at tiny p is essentially never connected
    with pytest.raises(TopologyError):
        random_graph(20, 1e-6, seed=0, max_retries=8)


def test_uniform_ring8_rho_matches_published_value():
    m = uniform_mixing(ring(8))
    assert abs(m.rho - 0.8047) < 1e-3
    closed = 1.0 / 3.0 + (2.0 / 3.0) * np.cos(2.0 * np.pi / 8.0)
    assert abs(m.rho - closed) < 1e-10
    assert np.all(m.w[m.w != 0.0] == 1.0 / 3.0)


@pytest.mark.parametrize("n", [5, 8, 12])
def test_uniform_ring_eigenvalues_closed_form(n):
    m = uniform_mixing(ring(n))
    got = np.sort(np.linalg.eigvalsh(m.w))
    expect = np.sort([1.0 / 3.0 + (2.0 / 3.0) * np.cos(2.0 * np.pi * k / n)
                      for k in range(n)])
    assert np.max(np.abs(got - expect)) < 1e-10


def test_uniform_complete8_is_exact_averaging():
    m = uniform_mixing(complete(8))
    assert np.all(m.w == 0.125)
    assert m.rho <= 1e-10


def test_uniform_ring3_equals_complete3():
    m = uniform_mixing(ring(3))
    assert np.all(m.w == 1.0 / 3.0)
    assert m.rho <= 1e-10


def test_uniform_rejects_irregular_graph():
    with pytest.raises(TopologyError, match="metropolis"):
        uniform_mixing(ladder(8))


def test_uniform_rejects_disconnected_graph():
    disconnected = Graph(4, frozenset({(0, 1), (2, 3)}))  # 1-regular, two pieces
    with pytest.raises(TopologyError, match="connected"):
        uniform_mixing(disconnected)


def test_metropolis_complete_formula():
    # degree n-1 everywhere, so every weight is 1/(1 + (n-1)) = 1/n and the
    # matrix coincides with the exact averaging matrix
    n = 6
    m = metropolis_mixing(complete(n))
    off = m.w[~np.eye(n, dtype=bool)]
    assert np.allclose(off, 1.0 / n, atol=1e-15)
    assert np.allclose(np.diag(m.w), 1.0 / n, atol=1e-14)
    assert m.rho <= 1e-10


def test_metropolis_path3_hand_values():
    # degrees (1, 2, 1): edge weights 1/3, self-weights take the remainder
    path = Graph(3, frozenset({(0, 1), (1, 2)}))
    m = metropolis_mixing(path)
    expect = np.array([
        [2.0 / 3.0, 1.0 / 3.0, 0.0],
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.0, 1.0 / 3.0, 2.0 / 3.0],
    ])
    assert np.allclose(m.w, expect, atol=1e-15)
    assert np.allclose(m.w.sum(axis=1), 1.0, atol=1e-12)


def test_metropolis_ladder8_contracts():
    # The published ladder figure uses an unstated weight rule; we only pin
    # that the Metropolis matrix contracts and agrees with the direct
    # operator-norm computation.
    m = metropolis_mixing(ladder(8))
    assert 0.0 < m.rho < 1.0
    dev = m.w - np.full((8, 8), 1.0 / 8.0)
    assert abs(m.rho - np.linalg.norm(dev, 2)) < 1e-10


def test_metropolis_rejects_disconnected():
    with pytest.raises(TopologyError):
        metropolis_mixing(Graph(4, frozenset({(0, 1), (2, 3)})))


def test_spectral_rho_averaging_matrix_is_zero():
    n = 7
    assert spectral_rho(np.full((n, n), 1.0 / n)) <= 1e-12


def test_spectral_rho_identity_raises():
    with pytest.raises(TopologyError):
        spectral_rho(np.eye(5))


@pytest.mark.parametrize("build", [
    lambda: uniform_mixing(ring(8)),
    lambda: metropolis_mixing(ladder(8)),
    lambda: uniform_mixing(complete(5)),
    lambda: metropolis_mixing(random_graph(10, 0.6, seed=3)),
    lambda: uniform_mixing(complete(1)),
])
def test_mixing_invariants(build):
    m = build()
    w = m.w
    assert np.array_equal(w, w.T)
    assert np.abs(w.sum(axis=1) - 1.0).max() <= 1e-12
    assert w.min() >= 0.0 and w.max() <= 1.0
    if m.n > 1:
        dev = w - np.full((m.n, m.n), 1.0 / m.n)
        assert abs(m.rho - np.linalg.norm(dev, 2)) < 1e-10


def test_mean_preservation():
    m = metropolis_mixing(random_graph(9, 0.5, seed=1))
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.standard_normal((9, 4))
        mixed = m.w @ a
        denom = max(1.0, float(np.linalg.norm(a.mean(axis=0))))
        assert np.linalg.norm(mixed.mean(axis=0) - a.mean(axis=0)) / denom <= 1e-12


@pytest.mark.parametrize("build", [
    lambda: uniform_mixing(ring(8)),
    lambda: metropolis_mixing(ladder(8)),
    lambda: metropolis_mixing(random_graph(12, 0.4, seed=7)),
])
def test_contraction_property(build):
    m = build()
    rng = np.random.default_rng(11)
    for _ in range(20):
        a = rng.standard_normal((m.n, 5))
        abar = np.broadcast_to(a.mean(axis=0), a.shape)
        lhs = np.linalg.norm(m.w @ a - abar)
        rhs = m.rho * np.linalg.norm(a - abar)
        assert lhs <= rhs * (1.0 + 1e-10) + 1e-15


def test_single_node_mixing():
    m = uniform_mixing(complete(1))
    assert m.w.shape == (1, 1) and m.w[0, 0] == 1.0
    assert m.rho == 0.0


def test_mixing_for_picks_rule_by_regularity():
    assert np.all(mixing_for(ring(6)).w[mixing_for(ring(6)).w != 0] == 1.0 / 3.0)
    m = mixing_for(ladder(6))  # irregular -> metropolis
    assert 0 < m.rho < 1


def test_mixing_matrix_is_read_only():
    m = uniform_mixing(ring(4))
    with pytest.raises(ValueError):
        m.w[0, 0] = 0.5
