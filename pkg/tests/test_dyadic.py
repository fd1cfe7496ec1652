import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmtlab.dyadic import (
    CubeCountError,
    DyadicLattice,
    WindowError,
    density,
    points_in_triple,
    populated_cubes,
)
from gmtlab.measure import DiscreteMeasure, empty_measure
from gmtlab.zoo import cantor_measure


def lat(d=2, k_min=-4, k_max=2, offset=None):
    return DyadicLattice(d, k_min, k_max, offset)


class TestAddressing:
    def test_unit_level(self):
        assert lat().cube_of_point([0.3, 0.7], 0).coords == (0, 0)

    def test_quarter_level(self):
        assert lat().cube_of_point([0.3, 0.7], -2).coords == (1, 2)

    def test_offset(self):
        assert lat(offset=[0.5, 0.0]).cube_of_point([0.3, 0.7], 0).coords == (-1, 0)

    def test_faces_are_lower_inclusive(self):
        L = lat()
        assert L.cube_of_point([0.5, 0.25], -2).coords == (2, 1)
        assert L.cube_of_point([-0.25, 0.0], -2).coords == (-1, 0)

    def test_outside_window(self):
        with pytest.raises(WindowError):
            lat().cube_of_point([0.0, 0.0], 5)

    def test_parent_is_floor_half(self):
        L = lat()
        Q = L.address(-2, (-3, 5))
        assert L.parent(Q).coords == (-2, 2)
        assert Q in L.children(L.parent(Q))

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.integers(-4, 1))
    def test_point_in_its_box_and_parent(self, x, k):
        L = lat()
        Q = L.cube_of_point(x, k)
        lo, hi = L.box(Q)
        assert np.all(lo <= np.array(x)) and np.all(np.array(x) < hi)
        assert L.cube_of_point(x, k + 1) == L.parent(Q)


class TestGraph:
    def test_interior_degree(self):
        L = lat()
        Q = L.address(-1, (0, 0))
        assert len(L.graph_neighbors(Q)) == 9 == L.max_degree()

    def test_top_level_degree(self):
        L = lat()
        assert len(L.graph_neighbors(L.address(2, (0, 0)))) == 8

    def test_bottom_level_degree(self):
        L = lat()
        assert len(L.graph_neighbors(L.address(-4, (0, 0)))) == 5

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_degree_bound_random(self, d, rng):
        L = DyadicLattice(d, -3, 3, rng.uniform(-1, 1, d))
        for _ in range(200):
            Q = L.address(int(rng.integers(-3, 4)), rng.integers(-20, 20, d))
            assert len(set(L.graph_neighbors(Q))) <= 2 ** d + 2 * d + 1

    def test_neighbors_symmetric(self):
        L = lat()
        Q = L.address(-2, (1, -1))
        for R in L.graph_neighbors(Q):
            assert Q in L.graph_neighbors(R)

    def test_basic_distances(self):
        L = lat()
        Q = L.address(-2, (1, 1))
        assert L.graph_distance(Q, Q, 5) == 0
        assert L.graph_distance(Q, L.parent(Q), 5) == 1

    def test_corner_touching(self):
        L = lat()
        assert L.graph_distance(L.address(-2, (0, 0)), L.address(-2, (1, 1)), 6) == 2
        assert L.graph_distance(L.address(-2, (1, 1)), L.address(-2, (2, 2)), 6) == 2

    def test_cutoff_sentinel(self):
        L = lat()
        assert L.graph_distance(L.address(-4, (0, 0)), L.address(-4, (40, 0)), 3) is None

    def test_metric_on_triples(self, rng):
        L = lat(k_min=-3, k_max=0)
        cubes = [L.address(int(rng.integers(-3, 1)), rng.integers(-4, 4, 2)) for _ in range(12)]
        cut = 30
        dist = {(a, b): L.graph_distance(a, b, cut) for a in cubes for b in cubes}
        for a, b in itertools.product(cubes, cubes):
            assert dist[a, b] == dist[b, a]
            assert (dist[a, b] == 0) == (a == b)
        for a, b, c in itertools.product(cubes, cubes, cubes):
            assert dist[a, c] <= dist[a, b] + dist[b, c]

    def test_rings_partition(self):
        L = lat(k_min=-3, k_max=0)
        Q = L.address(-2, (0, 0))
        seen = set()
        for r, ring in enumerate(L.rings(Q, 3)):
            for R in ring:
                assert R not in seen
                seen.add(R)
                assert L.graph_distance(Q, R, 3) == r


class TestDensity:
    def test_atom_at_center(self):
        L = lat()
        mu = DiscreteMeasure([[0.5, 0.5]], [1.0])
        for s in (0.5, 1.0, 1.7):
            assert density(mu, L, L.address(0, (0, 0)), s) == (1.0, 1.0)

    def test_atom_outside_triple(self):
        L = lat()
        mu = DiscreteMeasure([[2.5, 0.5]], [1.0])
        assert density(mu, L, L.address(0, (0, 0)), 1.0) == (0.0, 0.0)

    def test_cantor_unit_cube(self):
        L = DyadicLattice(2, -10, 0)
        mu = cantor_measure(2, 0.25, 5)
        m, dval = density(mu, L, L.address(0, (0, 0)), 1.0)
        assert m == pytest.approx(1.0, abs=1e-15) and dval == pytest.approx(1.0, abs=1e-15)

    def test_density_exact_formula(self):
        L = lat()
        mu = DiscreteMeasure([[0.1, 0.1]], [3.0])
        m, dval = density(mu, L, L.address(-2, (0, 0)), 1.5)
        assert dval == m / 2.0 ** (-2 * 1.5)

    @given(st.integers(-3, 3), st.floats(0.3, 1.9))
    def test_rescaling_leaves_densities(self, e, s):
        rng = np.random.default_rng(7)
        mu = DiscreteMeasure(rng.uniform(0, 1, (40, 2)), rng.uniform(0, 1, 40))
        L = lat(offset=[0.013, -0.021])
        lam = 2.0 ** e
        t1 = populated_cubes(mu, L, s)
        L2 = L.rescaled(lam)
        t2 = populated_cubes(mu.scaled(lam, s), L2, s)
        assert len(t1) == len(t2)
        for Q, (m, dval) in t1.items():
            Q2 = Q._replace(level=Q.level + e, lattice_id=L2.lattice_id)
            assert t2.density(Q2) == pytest.approx(dval, rel=1e-12)


class TestPopulated:
    def test_empty(self):
        assert len(populated_cubes(empty_measure(2), lat(), 1.0)) == 0

    def test_single_atom_per_level(self):
        L = lat(offset=[0.01, 0.02])
        mu = DiscreteMeasure([[0.3, 0.4]], [1.0])
        table = populated_cubes(mu, L, 1.0)
        for k in range(L.k_min, L.k_max + 1):
            assert len(table.by_level(k)) == 9
        assert len(table) == 9 * (L.k_max - L.k_min + 1)

    def test_two_atoms_at_top_level(self):
        L = DyadicLattice(2, -2, 0, [0.1, 0.1])
        mu = DiscreteMeasure([[0.5, 0.5], [1.5, 0.5]], [1.0, 1.0])
        top = populated_cubes(mu, L, 1.0).by_level(0)
        both = [Q for Q in top if len(points_in_triple(mu, L, Q)) == 2]
        assert len(both) >= 2

    def test_against_bruteforce(self, rng):
        mu = DiscreteMeasure(rng.uniform(-1, 1, (300, 2)), rng.uniform(0, 1, 300))
        L = lat(k_min=-5, k_max=1, offset=[0.0123, 0.0456])
        table = populated_cubes(mu, L, 1.0)
        cubes = list(table)
        for i in rng.choice(len(cubes), 100, replace=False):
            Q = cubes[i]
            assert table[Q] == density(mu, L, Q, 1.0)
        # cubes missing from the table must really be empty
        for _ in range(100):
            k = int(rng.integers(-5, 2))
            Q = L.address(k, rng.integers(-3, 3, 2) * 2 ** max(0, -k))
            if Q not in table:
                assert density(mu, L, Q, 1.0)[0] == 0.0

    def test_cap(self):
        mu = DiscreteMeasure(np.random.default_rng(0).uniform(0, 1, (200, 2)), np.ones(200))
        with pytest.raises(CubeCountError):
            populated_cubes(mu, lat(k_min=-8, k_max=0), 1.0, cap=100)

    def test_csv(self, tmp_path):
        mu = DiscreteMeasure([[0.3, 0.4]], [1.0])
        L = lat(k_min=-1, k_max=0)
        path = tmp_path / "t.csv"
        populated_cubes(mu, L, 1.0).to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "level,c0,c1,mass_3Q,density"
        assert len(lines) == 1 + 18
