import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmtlab.seniors import (
    AdjacencyGraph,
    VertexFunction,
    bfs_rings,
    domination_check,
    graph_distance,
    min_senior_exponent,
    senior_vertices,
    senior_vertices_bruteforce,
    seniors_by_envelope,
)


@st.composite
def random_graphs(draw, max_n=60, max_degree=4):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    adj = [[] for _ in range(n)]
    # a random tree plus a few extra edges, respecting the degree cap
    for v in range(1, n):
        u = int(rng.integers(0, v))
        if len(adj[u]) < max_degree and len(adj[v]) < max_degree:
            adj[u].append(v)
            adj[v].append(u)
    for _ in range(draw(st.integers(0, n))):
        a, b = (int(x) for x in rng.integers(0, n, 2))
        if a != b and b not in adj[a] and len(adj[a]) < max_degree and len(adj[b]) < max_degree:
            adj[a].append(b)
            adj[b].append(a)
    graph = AdjacencyGraph(adj)
    kind = draw(st.sampled_from(["uniform", "integer", "spiky"]))
    if kind == "uniform":
        vals = rng.uniform(0, 1, n)
    elif kind == "integer":
        vals = rng.integers(0, 4, n).astype(float)
    else:
        vals = rng.uniform(0, 1, n) ** 8
    nu = VertexFunction(graph, {i: float(v) for i, v in enumerate(vals)})
    return graph, nu


def quiet(fn, *args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(*args)


class TestExamples:
    def test_path_one_eight_one(self):
        g = AdjacencyGraph.path(3)
        nu = VertexFunction(g, {0: 1.0, 1: 8.0, 2: 1.0})
        res = quiet(senior_vertices, g, nu, 1.0)
        assert res.seniors == [1]
        assert all(res.star[v] == 1 for v in range(3))

    def test_constant_all_senior(self):
        g = AdjacencyGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
        nu = VertexFunction(g, {i: 2.5 for i in range(5)})
        res = senior_vertices(g, nu, 3.0)
        assert sorted(res.seniors) == list(range(5))
        assert domination_check(g, nu, 3.0).ratio == 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            VertexFunction(AdjacencyGraph.path(2), {0: -1.0, 1: 0.0})

    def test_hypothesis_warning(self):
        g = AdjacencyGraph.path(3)
        nu = VertexFunction(g, {0: 1.0, 1: 1.0, 2: 1.0})
        with pytest.warns(RuntimeWarning):
            senior_vertices(g, nu, 0.5)

    def test_min_exponent(self):
        assert min_senior_exponent(9) == 4
        assert min_senior_exponent(1) == 1

    def test_spike_on_regular_tree(self):
        # complete tree with branching b: interior degree b + 1
        b, depth = 3, 5
        edges, nodes, frontier = [], 1, [0]
        for _ in range(depth):
            nxt = []
            for v in frontier:
                for _ in range(b):
                    edges.append((v, nodes))
                    nxt.append(nodes)
                    nodes += 1
            frontier = nxt
        g = AdjacencyGraph.from_edges(nodes, edges)
        D = g.max_degree()
        M = min_senior_exponent(D)
        vals = {v: 0.0 for v in range(nodes)}
        vals[0] = 1.0
        # every vertex gets the largest value the spike allows
        for k, ring in enumerate(bfs_rings(g, 0)):
            for v in ring:
                vals[v] = 2.0 ** (-M * k) * (1 - 1e-9 * (k > 0))
        nu = VertexFunction(g, vals)
        rep = domination_check(g, nu, M)
        assert rep.passed
        assert rep.ratio <= 1.0 / (1.0 - 2.0 ** (-M) * D)
        assert senior_vertices(g, nu, M).seniors == [0]


class TestProperties:
    @given(random_graphs(), st.sampled_from([1.0, 2.0, 3.0, 4.0]))
    def test_pruned_equals_bruteforce(self, gn, M):
        g, nu = gn
        fast = quiet(senior_vertices, g, nu, M)
        slow = quiet(senior_vertices_bruteforce, g, nu, M)
        assert fast.star == slow.star
        assert fast.seniors == slow.seniors

    @given(random_graphs(), st.sampled_from([1.0, 2.0, 3.0]))
    def test_star_is_fixed_point(self, gn, M):
        g, nu = gn
        res = quiet(senior_vertices, g, nu, M)
        for x, z in res.star.items():
            assert res.star[z] == z

    @given(random_graphs(max_n=30), st.sampled_from([1.0, 2.0]))
    def test_triangle_consistency(self, gn, M):
        g, nu = gn
        res = quiet(senior_vertices, g, nu, M)
        for x in g.vertices():
            best = nu(res.star[x]) * 2.0 ** (-M * res.star_distance[x])
            assert res.star_distance[x] == graph_distance(g, x, res.star[x])
            for k, ring in enumerate(bfs_rings(g, x)):
                for z in ring:
                    assert best >= nu(z) * 2.0 ** (-M * k)

    @given(random_graphs(), st.sampled_from([1.0, 2.0, 3.0]))
    def test_envelope_agrees(self, gn, M):
        g, nu = gn
        res = quiet(senior_vertices, g, nu, M)
        positive_seniors = [v for v in res.seniors if nu(v) > 0]
        assert sorted(seniors_by_envelope(g, nu, M)) == sorted(positive_seniors)

    def test_domination_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(2, 40))
            D = int(rng.integers(2, 6))
            adj = [[] for _ in range(n)]
            for v in range(1, n):
                u = int(rng.integers(0, v))
                if len(adj[u]) < D:
                    adj[u].append(v)
                    adj[v].append(u)
            g = AdjacencyGraph(adj)
            M = min_senior_exponent(max(1, g.max_degree())) + int(rng.integers(0, 2))
            nu = VertexFunction(g, {i: float(x) for i, x in enumerate(rng.exponential(1, n) ** 3)})
            rep = domination_check(g, nu, M)
            assert rep.hypothesis_ok
            assert rep.pointwise_violations == 0 and rep.cluster_violations == 0
            assert rep.ratio <= rep.bound * (1 + 1e-12)


def test_pruned_equals_bruteforce_large_graph():
    rng = np.random.default_rng(9)
    n = 500
    edges = [(v, int(rng.integers(0, v))) for v in range(1, n)]
    edges += [tuple(int(x) for x in rng.integers(0, n, 2)) for _ in range(150)]
    g = AdjacencyGraph.from_edges(n, edges)
    nu = VertexFunction(g, {i: float(x) for i, x in enumerate(rng.uniform(0, 1, n) ** 4)})
    M = 2.0
    fast = quiet(senior_vertices, g, nu, M)
    slow = quiet(senior_vertices_bruteforce, g, nu, M)
    assert fast.star == slow.star
