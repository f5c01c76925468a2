"""Comparison graphs and the row-stochastic system matrices built on them.

Objects are indexed ``0 .. n-1`` in memory.  Every stored edge ``(i, j)``
has ``i > j``; files use the same orientation with 1-based indices.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigurationError, DisconnectedGraphError, GraphGenerationError

MAX_ATTEMPTS = 1000


def _canonical_edges(pairs: Iterable[tuple[int, int]], n: int) -> np.ndarray:
    seen: set[tuple[int, int]] = set()
    out = []
    for a, b in pairs:
        a, b = int(a), int(b)
        if a == b:
            raise ConfigurationError(f"self-loop on object {a}")
        if not (0 <= a < n and 0 <= b < n):
            raise ConfigurationError(f"edge ({a}, {b}) has an endpoint outside [0, {n})")
        e = (a, b) if a > b else (b, a)
        if e in seen:
            raise ConfigurationError(f"duplicate edge {e}")
        seen.add(e)
        out.append(e)
    out.sort()
    return np.array(out, dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class ComparisonGraph:
    """Undirected simple graph over ``n`` objects.

    Attributes:
        n: Number of objects.
        edges: ``(m, 2)`` integer array, one row ``(i, j)`` with ``i > j`` per
            edge, sorted lexicographically.
        budget: Optional per-edge comparison count aligned with ``edges``.
    """

    n: int
    edges: np.ndarray
    budget: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigurationError("a comparison graph needs at least two objects")
        self.edges.setflags(write=False)
        if self.budget is not None:
            self.budget.setflags(write=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        pairs: Iterable[tuple[int, int]],
        budget: Mapping[tuple[int, int], float] | None = None,
    ) -> ComparisonGraph:
        """Build a graph from 0-based pairs in any orientation."""
        edges = _canonical_edges(pairs, n)
        w = None
        if budget is not None:
            lookup = {(max(a, b), min(a, b)): v for (a, b), v in budget.items()}
            w = np.array([lookup[tuple(e)] for e in edges.tolist()], dtype=float)
        return cls(n, edges, w)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def neighbors(self, v: int) -> list[int]:
        mask_i = self.edges[:, 0] == v
        mask_j = self.edges[:, 1] == v
        return sorted(self.edges[mask_i, 1].tolist() + self.edges[mask_j, 0].tolist())

    def adjacency(self, weights: np.ndarray | None = None) -> sp.csr_matrix:
        """Symmetric sparse adjacency with optional per-edge weights."""
        w = np.ones(self.n_edges) if weights is None else np.asarray(weights, dtype=float)
        i, j = self.edges[:, 0], self.edges[:, 1]
        a = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n, self.n),
        )
        return a.tocsr()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ComparisonGraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __repr__(self) -> str:
        return f"ComparisonGraph(n={self.n}, edges={self.n_edges})"


def is_connected(g: ComparisonGraph) -> bool:
    n_comp, _ = connected_components(g.adjacency(), directed=False)
    return n_comp == 1


def components(g: ComparisonGraph) -> np.ndarray:
    """Component label per object."""
    return connected_components(g.adjacency(), directed=False)[1]


def union(g1: ComparisonGraph, g2: ComparisonGraph) -> ComparisonGraph:
    if g1.n != g2.n:
        raise ConfigurationError(f"cannot join graphs on {g1.n} and {g2.n} objects")
    edges = np.unique(np.vstack([g1.edges, g2.edges]), axis=0)
    return ComparisonGraph(g1.n, edges)


# ---------------------------------------------------------------------------
# builders


def complete_graph(n: int) -> ComparisonGraph:
    i, j = np.tril_indices(n, k=-1)
    return ComparisonGraph(n, np.column_stack([i, j]).astype(np.int64)[np.lexsort((j, i))])


def star_graph(n: int, center: int | None = None) -> ComparisonGraph:
    c = n - 1 if center is None else center
    return ComparisonGraph.from_edges(n, [(c, v) for v in range(n) if v != c])


def path_graph(n: int) -> ComparisonGraph:
    return ComparisonGraph.from_edges(n, [(v + 1, v) for v in range(n - 1)])


def _pair_stubs(n: int, degree: int, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    # Configuration model: pair half-edges at random, keep simple pairs and
    # re-pair only the stubs that produced loops or repeated edges.
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(n), degree)
    while stubs.size:
        rng.shuffle(stubs)
        leftover: list[int] = []
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            e = (a, b) if a > b else (b, a)
            if a != b and e not in edges:
                edges.add(e)
            else:
                leftover.extend((a, b))
        if leftover:
            left = sorted(set(leftover))
            if all(
                a == b or (max(a, b), min(a, b)) in edges
                for ia, a in enumerate(left)
                for b in left[ia:]
            ):
                return None
        stubs = np.array(leftover, dtype=np.int64)
    return edges


def random_regular_graph(n: int, degree: int, rng: np.random.Generator) -> ComparisonGraph:
    """Connected simple ``degree``-regular graph drawn by stub pairing.

    Samples that dead-end or come out disconnected are discarded and redrawn
    with fresh randomness, at most ``MAX_ATTEMPTS`` times.
    """
    if not 0 < degree < n:
        raise ConfigurationError(f"degree must satisfy 0 < degree < n, got degree={degree}, n={n}")
    if (n * degree) % 2:
        raise ConfigurationError(f"n * degree must be even, got {n} * {degree}")
    for _ in range(MAX_ATTEMPTS):
        edges = _pair_stubs(n, degree, rng)
        if edges is None:
            continue
        g = ComparisonGraph.from_edges(n, edges)
        if is_connected(g):
            return g
    raise GraphGenerationError(
        f"no connected {degree}-regular graph on {n} nodes after {MAX_ATTEMPTS} attempts"
    )


def hub_graph(n: int, n_hubs: int, max_degree: int, rng: np.random.Generator | None = None) -> ComparisonGraph:
    """Hub family: the last ``n_hubs`` objects are hubs joined by a path.

    The other objects are split into ``n_hubs`` groups; group ``s`` hangs off
    hub ``n - 1 - s`` and its members link only to that hub and to each
    other, keeping every non-hub degree at most ``max_degree``.  Group
    membership is shuffled when ``rng`` is given.
    """
    if not 1 <= n_hubs < n:
        raise ConfigurationError(f"need 1 <= n_hubs < n, got n_hubs={n_hubs}")
    if max_degree < 1:
        raise ConfigurationError("max_degree must be at least 1")
    hubs = list(range(n - n_hubs, n))
    pairs = [(hubs[k + 1], hubs[k]) for k in range(n_hubs - 1)]
    others = np.arange(n - n_hubs)
    if rng is not None:
        others = rng.permutation(others)
    for s, group in enumerate(np.array_split(others, n_hubs)):
        hub = n - 1 - s
        members = group.tolist()
        pairs.extend((hub, v) for v in members)
        inner = max_degree - 1
        if inner >= 2 and len(members) >= 3:
            pairs.extend((members[k], members[(k + 1) % len(members)]) for k in range(len(members)))
        elif inner >= 1 and len(members) >= 2:
            pairs.extend((members[k], members[k + 1]) for k in range(0, len(members) - 1, 2 if inner == 1 else 1))
    return ComparisonGraph.from_edges(n, pairs)


def wheel_graph(n: int) -> ComparisonGraph:
    """Cycle on the first ``n - 1`` objects plus spokes to the last one."""
    return hub_graph(n, 1, 3)


def build_graph(kind: str, n: int, rng: np.random.Generator | None = None, **params) -> ComparisonGraph:
    """Dispatch on a graph family name.

    ``kind`` is one of ``complete``, ``star`` (``center``), ``regular``
    (``degree``), ``hub`` (``n_hubs``, ``max_degree``), ``wheel``, ``path`` or
    ``edges`` (``edges``: iterable of 0-based pairs).
    """
    kind = kind.lower()
    if n < 2:
        raise ConfigurationError("need at least two objects")
    if kind == "complete":
        g = complete_graph(n)
    elif kind == "star":
        g = star_graph(n, params.get("center"))
    elif kind in ("regular", "random_regular"):
        if rng is None:
            raise ConfigurationError("random regular graphs need an rng")
        g = random_regular_graph(n, int(params["degree"]), rng)
    elif kind == "hub":
        g = hub_graph(n, int(params.get("n_hubs", 1)), int(params.get("max_degree", 3)), rng)
    elif kind == "wheel":
        g = wheel_graph(n)
    elif kind == "path":
        g = path_graph(n)
    elif kind in ("edges", "from_edges"):
        g = ComparisonGraph.from_edges(n, params["edges"], params.get("budget"))
    else:
        raise ConfigurationError(f"unknown graph kind {kind!r}")
    if not is_connected(g):
        raise DisconnectedGraphError(f"{kind} graph on {n} objects is not connected")
    return g


def knn_quality_graph(qhat: np.ndarray, k: int) -> ComparisonGraph:
    """Join every object to the ``k`` objects with the closest estimated quality.

    Distances are ``|qhat_i - qhat_j|``; ties go to the lower index.  The
    result is the union of all these links, so every degree is at least ``k``.
    """
    q = np.asarray(qhat, dtype=float)
    n = len(q)
    if not 0 <= k < n:
        raise ConfigurationError(f"need 0 <= k < n, got k={k}, n={n}")
    pairs = set()
    idx = np.arange(n)
    for i in range(n):
        dist = np.abs(q - q[i])
        dist[i] = np.inf
        nearest = np.lexsort((idx, dist))[:k]
        pairs.update((max(i, j), min(i, j)) for j in nearest.tolist())
    return ComparisonGraph.from_edges(n, sorted(pairs))


# ---------------------------------------------------------------------------
# system matrices


@dataclass(frozen=True)
class SystemMatrices:
    """Dense ``H~``, ``H``, ``M~`` and ``M`` for a weighted graph.

    ``H~[i, j] = w_ij / rho_i`` on edges; ``H`` is ``H~`` with the reference
    row zeroed, ``M = I - H`` and ``M~ = I - H~``.
    """

    htilde: np.ndarray
    h: np.ndarray
    mtilde: np.ndarray
    m: np.ndarray
    rho: np.ndarray
    reference: int


def generalized_degrees(g: ComparisonGraph, weights: np.ndarray | None = None) -> np.ndarray:
    return np.asarray(g.adjacency(weights).sum(axis=1)).ravel()


def system_matrices(g: ComparisonGraph, weights: np.ndarray | None = None, reference: int | None = None) -> SystemMatrices:
    ref = g.n - 1 if reference is None else reference
    if not 0 <= ref < g.n:
        raise ConfigurationError(f"reference {ref} outside [0, {g.n})")
    if not is_connected(g):
        raise DisconnectedGraphError("system matrix M is singular on a disconnected graph")
    if weights is not None and np.any(np.asarray(weights) <= 0):
        raise ConfigurationError("edge weights must be positive")
    a = g.adjacency(weights).toarray()
    rho = a.sum(axis=1)
    htilde = a / rho[:, None]
    h = htilde.copy()
    h[ref, :] = 0.0
    eye = np.eye(g.n)
    return SystemMatrices(htilde, h, eye - htilde, eye - h, rho, ref)
