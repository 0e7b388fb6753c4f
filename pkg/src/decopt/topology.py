"""Communication graphs and their doubly stochastic mixing matrices.

A mixing matrix W encodes one gossip round: multiplying the stacked agent
state by W averages every row with its neighbors. The contraction factor of
that averaging is the spectral quantity rho = max(|lambda_2|, |lambda_n|),
which every constructor here computes and caches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TopologyError

__all__ = [
    "Graph",
    "MixingMatrix",
    "ring",
    "ladder",
    "complete",
    "random_graph",
    "uniform_mixing",
    "metropolis_mixing",
    "mixing_for",
    "spectral_rho",
]

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    """Undirected communication graph on nodes 0..n-1.

    Edges are stored as canonical (low, high) pairs. Self-communication is
    implicit in the mixing matrix diagonal, so self-loops are rejected.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError(f"node count must be >= 1, got {self.n}")
        canonical = set()
        for edge in self.edges:
            a, b = edge
            if a == b:
                raise TopologyError(f"self-loop on node {a} is not allowed")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise TopologyError(f"edge {edge} has endpoints outside [0, {self.n})")
            canonical.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(canonical))

    def neighbor_lists(self) -> list[list[int]]:
        neigh = [[] for _ in range(self.n)]
        for a, b in self.edges:
            neigh[a].append(b)
            neigh[b].append(a)
        return neigh

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n))
        for a, b in self.edges:
            adj[a, b] = 1.0
            adj[b, a] = 1.0
        return adj

    def is_regular(self) -> bool:
        deg = self.degrees()
        return bool(np.all(deg == deg[0]))

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        neigh = self.neighbor_lists()
        seen = {0}
        stack = [0]
        while stack:
            node = stack.pop()
            for other in neigh[node]:
                if other not in seen:
                    seen.add(other)
                    stack.append(other)
        return len(seen) == self.n


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic weight matrix with its cached rho."""

    w: np.ndarray
    rho: float

    def __post_init__(self):
        self.w.setflags(write=False)

    @property
    def n(self) -> int:
        return self.w.shape[0]


def ring(n: int) -> Graph:
    """Cycle graph 0-1-...-(n-1)-0. Needs n >= 3 (a 2-cycle duplicates its edge)."""
    if n < 3:
        raise TopologyError(f"ring topology needs n >= 3, got {n}")
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def ladder(n: int) -> Graph:
    """2 x (n/2) grid: two paths of n/2 nodes joined by rung edges."""
    if n < 4 or n % 2 != 0:
        raise TopologyError(f"ladder topology needs even n >= 4, got {n}")
    k = n // 2
    edges = set()
    for i in range(k - 1):
        edges.add((i, i + 1))  # top rail
        edges.add((k + i, k + i + 1))  # bottom rail
    for i in range(k):
        edges.add((i, k + i))  # rungs
    return Graph(n, frozenset(edges))


def complete(n: int) -> Graph:
    """All n(n-1)/2 edges; n=1 gives the valid single-node network."""
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def random_graph(n: int, p_edge: float, seed: int, max_retries: int = 64) -> Graph:
    """Erdos-Renyi G(n, p_edge) sample, resampled until connected.

    Deterministic given ``seed``. Raises if no connected sample shows up
    within ``max_retries`` draws (disconnection is vanishingly rare at the
    edge probabilities used in practice, so a retry budget keeps this total).
    """
    if not 0.0 < p_edge <= 1.0:
        raise TopologyError(f"p_edge must be in (0, 1], got {p_edge}")
    if n < 1:
        raise TopologyError(f"node count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for _ in range(max_retries):
        draws = rng.random(len(pairs))
        g = Graph(n, frozenset(p for p, u in zip(pairs, draws) if u < p_edge))
        if g.is_connected():
            return g
    raise TopologyError(
        f"no connected G({n}, {p_edge}) sample within {max_retries} retries"
    )


def uniform_mixing(g: Graph) -> MixingMatrix:
    """Equal weights 1/(d+1) on self and every neighbor of a regular graph.

    For the ring this puts 1/3 on the diagonal and both neighbors; for the
    complete graph it gives the exact averaging matrix (rho = 0).
    """
    _require_connected(g, "uniform_mixing")
    if not g.is_regular():
        raise TopologyError(
            "uniform_mixing needs a regular graph; use metropolis_mixing instead"
        )
    d = int(g.degrees()[0]) if g.n > 1 else 0
    w = (g.adjacency() + np.eye(g.n)) / (d + 1)
    return _finish_mixing(w, g)


def metropolis_mixing(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights for an arbitrary connected graph.

    W_ij = 1/(1 + max(d_i, d_j)) on edges, diagonal takes the remainder;
    symmetric and doubly stochastic for any degree sequence.
    """
    _require_connected(g, "metropolis_mixing")
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for a, b in g.edges:
        w[a, b] = w[b, a] = 1.0 / (1.0 + max(deg[a], deg[b]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return _finish_mixing(w, g)


def mixing_for(g: Graph) -> MixingMatrix:
    """Uniform weights when the graph is regular, Metropolis weights otherwise."""
    return uniform_mixing(g) if g.is_regular() else metropolis_mixing(g)


def spectral_rho(w) -> float:
    """Largest absolute eigenvalue of W on the subspace orthogonal to the all-ones vector.

    Equals the operator 2-norm of W - (1/n) * ones * ones^T. Values at or
    above 1 mean gossip would not contract (disconnected or periodic
    communication), which is rejected.
    """
    w = np.asarray(w.w if isinstance(w, MixingMatrix) else w, dtype=float)
    n = w.shape[0]
    if n == 1:
        return 0.0
    vals = np.linalg.eigvalsh(w)  # ascending
    rho = float(max(abs(vals[0]), abs(vals[-2])))
    if rho >= 1.0 - 1e-9:
        raise TopologyError(
            f"mixing matrix does not contract (rho = {rho:.12f}); "
            "the communication graph is disconnected or periodic"
        )
    return rho


def _require_connected(g: Graph, who: str):
    if not g.is_connected():
        raise TopologyError(f"{who} requires a connected graph")


def _finish_mixing(w: np.ndarray, g: Graph) -> MixingMatrix:
    _validate_mixing(w, g)
    return MixingMatrix(w=w, rho=spectral_rho(w))


def _validate_mixing(w: np.ndarray, g: Graph):
    n = g.n
    if w.shape != (n, n):
        raise TopologyError(f"weight matrix shape {w.shape} does not match n={n}")
    if not np.array_equal(w, w.T):
        raise TopologyError("weight matrix is not symmetric")
    if w.min() < -ROW_SUM_TOL or w.max() > 1.0 + ROW_SUM_TOL:
        raise TopologyError("weight entries fall outside [0, 1]")
    row_err = np.abs(w.sum(axis=1) - 1.0).max()
    if row_err > ROW_SUM_TOL:
        raise TopologyError(f"row sums deviate from 1 by {row_err:.3e}")
    # Off-diagonal sparsity must match the edge set exactly.
    adj = g.adjacency() > 0
    off_diag = ~np.eye(n, dtype=bool)
    nonzero = w != 0.0
    if not np.array_equal(nonzero & off_diag, adj):
        raise TopologyError("weight sparsity pattern does not match the graph")
