import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairrank.errors import ConfigurationError, DisconnectedGraphError, GraphGenerationError
from pairrank.graphs import (
    ComparisonGraph,
    build_graph,
    complete_graph,
    components,
    generalized_degrees,
    hub_graph,
    is_connected,
    knn_quality_graph,
    path_graph,
    random_regular_graph,
    star_graph,
    system_matrices,
    union,
    wheel_graph,
)

from conftest import random_connected_graph


class TestComparisonGraph:
    def test_canonical_orientation(self):
        g = ComparisonGraph.from_edges(4, [(0, 1), (3, 2), (1, 3)])
        assert g.edges.tolist() == [[1, 0], [3, 1], [3, 2]]

    @pytest.mark.parametrize("pairs", [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)], [(-1, 0)]])
    def test_invalid_edges(self, pairs):
        with pytest.raises(ConfigurationError):
            ComparisonGraph.from_edges(4, pairs)

    def test_too_small(self):
        with pytest.raises(ConfigurationError):
            ComparisonGraph.from_edges(1, [])

    def test_budget_aligned(self):
        g = ComparisonGraph.from_edges(3, [(0, 1), (2, 1)], {(0, 1): 5, (1, 2): 7})
        assert g.budget.tolist() == [5.0, 7.0]

    def test_equality_and_immutability(self):
        g = path_graph(4)
        assert g == ComparisonGraph.from_edges(4, [(1, 0), (2, 1), (3, 2)])
        with pytest.raises(ValueError):
            g.edges[0, 0] = 3

    def test_degrees_and_neighbors(self):
        g = star_graph(5)
        assert g.degrees().tolist() == [1, 1, 1, 1, 4]
        assert sorted(g.neighbors(4)) == [0, 1, 2, 3]


class TestBuilders:
    def test_complete(self):
        g = build_graph("complete", 4)
        assert g.n_edges == 6

    def test_star_center(self):
        g = build_graph("star", 5, center=4)
        assert g.n_edges == 4
        assert g.degrees()[4] == 4

    def test_regular_50_6(self, rng):
        g = build_graph("regular", 50, rng, degree=6)
        assert g.n_edges == 150
        assert np.all(g.degrees() == 6)
        assert is_connected(g)

    @pytest.mark.parametrize("n,d", [(10, 3), (12, 11), (50, 12), (7, 2), (100, 4)])
    def test_regular_many(self, n, d):
        for seed in range(5):
            g = random_regular_graph(n, d, np.random.default_rng(seed))
            assert np.all(g.degrees() == d)
            assert is_connected(g)
            assert len(g.edge_set()) == g.n_edges

    def test_regular_reproducible(self):
        a = random_regular_graph(30, 4, np.random.default_rng(11))
        b = random_regular_graph(30, 4, np.random.default_rng(11))
        assert a == b

    @pytest.mark.parametrize("n,d", [(5, 3), (6, 6), (6, 0), (4, 7)])
    def test_regular_infeasible(self, n, d, rng):
        with pytest.raises(ConfigurationError):
            random_regular_graph(n, d, rng)

    def test_regular_never_connected(self, rng):
        # degree 1 graphs on more than two nodes are perfect matchings
        with pytest.raises(GraphGenerationError):
            random_regular_graph(6, 1, rng)

    @pytest.mark.parametrize("n,hubs,delta", [(20, 1, 3), (30, 3, 4), (25, 2, 2), (40, 4, 1)])
    def test_hub_structure(self, n, hubs, delta, rng):
        g = hub_graph(n, hubs, delta, rng)
        assert is_connected(g)
        deg = g.degrees()
        assert np.all(deg[: n - hubs] <= delta)
        hub_set = set(range(n - hubs, n))
        for v in range(n - hubs):
            assert len(hub_set.intersection(g.neighbors(v))) == 1

    def test_wheel(self):
        g = wheel_graph(8)
        assert g.degrees()[7] == 7
        assert np.all(g.degrees()[:7] == 3)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            build_graph("torus", 5)

    def test_disconnected_edges(self):
        with pytest.raises(DisconnectedGraphError):
            build_graph("edges", 4, edges=[(0, 1), (2, 3)])


class TestConnectivity:
    def test_path(self):
        assert is_connected(path_graph(3))

    def test_two_disjoint_edges(self):
        g = ComparisonGraph.from_edges(4, [(1, 0), (3, 2)])
        assert not is_connected(g)
        assert len(set(components(g).tolist())) == 2

    def test_complete(self):
        assert is_connected(complete_graph(4))


class TestUnion:
    def test_idempotent(self):
        g = wheel_graph(6)
        assert union(g, g) == g

    def test_disjoint(self):
        a = ComparisonGraph.from_edges(4, [(1, 0), (3, 2)])
        b = ComparisonGraph.from_edges(4, [(2, 1)])
        assert union(a, b).n_edges == 3

    def test_spanning_trees(self, rng):
        for _ in range(10):
            perm = rng.permutation(8)
            t = ComparisonGraph.from_edges(8, [(perm[k], perm[rng.integers(0, k)]) for k in range(1, 8)])
            assert is_connected(union(t, path_graph(8)))

    def test_mismatched(self):
        with pytest.raises(ConfigurationError):
            union(path_graph(3), path_graph(4))


class TestKnn:
    def test_line(self):
        g = knn_quality_graph(np.array([0.0, 1.0, 2.0, 3.0]), 1)
        assert g.edge_set() == {(1, 0), (2, 1), (3, 2)}

    def test_full(self):
        assert knn_quality_graph(np.linspace(0, 1, 6), 5) == complete_graph(6)

    def test_ties_lower_index(self):
        # object 2 is equidistant from 0 and 1 at distance... all equal: picks 0
        g = knn_quality_graph(np.zeros(4), 1)
        assert g.edge_set() == {(1, 0), (2, 0), (3, 0)}

    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=25), st.integers(1, 2))
    @settings(max_examples=60, deadline=None)
    def test_min_degree(self, q, k):
        g = knn_quality_graph(np.array(q), k)
        assert np.all(g.degrees() >= k)

    def test_invalid_k(self):
        with pytest.raises(ConfigurationError):
            knn_quality_graph(np.zeros(3), 3)


class TestSystemMatrices:
    def test_path_example(self):
        s = system_matrices(path_graph(3), reference=2)
        np.testing.assert_allclose(s.m, [[1, -1, 0], [-0.5, 1, -0.5], [0, 0, 1]])
        np.testing.assert_allclose(s.rho, [1, 2, 1])

    def test_star_reference_center(self):
        s = system_matrices(star_graph(6), reference=5)
        assert np.all(np.count_nonzero(s.h[:5], axis=1) == 1)
        np.testing.assert_allclose(np.linalg.inv(s.m), np.eye(6) + s.h, atol=1e-14)

    def test_disconnected(self):
        with pytest.raises(DisconnectedGraphError):
            system_matrices(ComparisonGraph.from_edges(4, [(1, 0), (3, 2)]))

    def test_nonpositive_weights(self):
        with pytest.raises(ConfigurationError):
            system_matrices(path_graph(3), np.array([1.0, 0.0]))

    @pytest.mark.parametrize("seed", range(20))
    def test_random_properties(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 13))
        g = random_connected_graph(n, rng)
        w = rng.uniform(0.1, 5.0, g.n_edges)
        ref = int(rng.integers(0, n))
        s = system_matrices(g, w, ref)
        np.testing.assert_allclose(s.mtilde @ np.ones(n), 0.0, atol=1e-14)
        np.testing.assert_allclose(s.rho, generalized_degrees(g, w))
        sv = np.linalg.svd(s.mtilde, compute_uv=False)
        assert sv[-1] < 1e-10
        if n > 1:
            assert sv[-2] > 1e-8
        for k in range(n):
            x = np.linalg.solve(s.m, np.eye(n)[k])
            assert np.all(np.isfinite(x))
