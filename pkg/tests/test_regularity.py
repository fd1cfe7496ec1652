import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmtlab.dyadic import DensityTable, DyadicLattice, populated_cubes
from gmtlab.measure import DiscreteMeasure, empty_measure
from gmtlab.regularity import (
    cube_weights,
    epsilon_regular_cubes,
    is_epsilon_regular,
    senior_regular_chain_check,
)
from gmtlab.zoo import cantor_measure, segment_measure


def table_from(lattice, dens):
    return DensityTable(lattice, 1.0, {Q: (d * 2.0 ** Q.level, d) for Q, d in dens.items()})


class TestEpsilonRegular:
    def test_equal_densities(self):
        L = DyadicLattice(2, -3, 0)
        cubes = [L.address(k, (i, j)) for k in (-3, -2) for i in range(3) for j in range(3)]
        table = table_from(L, {Q: 1.0 for Q in cubes})
        for eps in (1e-6, 0.1, 1.0):
            assert all(is_epsilon_regular(table, Q, eps, 6) for Q in cubes)

    def test_empty_cube_next_to_mass(self):
        L = DyadicLattice(2, -3, 0)
        Q, R = L.address(-2, (0, 0)), L.address(-2, (1, 0))
        table = table_from(L, {R: 1.0})
        assert not is_epsilon_regular(table, Q, 0.5, 3)

    def test_violation_outside_radius_ignored(self):
        L = DyadicLattice(2, -3, 0)
        Q, far = L.address(-3, (0, 0)), L.address(-3, (9, 0))
        table = table_from(L, {Q: 1.0, far: 100.0})
        assert is_epsilon_regular(table, Q, 0.1, 3)
        assert not is_epsilon_regular(table, Q, 0.1, 12)

    def test_monotone_in_epsilon(self):
        mu = cantor_measure(2, 0.25, 4)
        L = DyadicLattice(2, -7, 0, [0.0031, 0.0017])
        table = populated_cubes(mu, L, 1.0)
        prev = set()
        for eps in (0.05, 0.2, 0.5, 1.0, 2.0):
            cur = set(epsilon_regular_cubes(mu, L, 1.0, eps, R_graph=4, table=table))
            assert prev <= cur
            prev = cur

    def test_line_cubes_at_middle_scales(self):
        n = 512
        h = 1.0 / n
        mu = segment_measure(n, d=2)
        L = DyadicLattice(2, -8, -1, [0.0, -0.5 * 2.0 ** -8 + 1e-4])
        table = populated_cubes(mu, L, 1.0)
        cands = []
        for Q in table:
            side = 2.0 ** Q.level
            lo, hi = L.box(Q)
            mid = 0.5 * (lo + hi)
            on_support = lo[1] <= 0.0 < hi[1]
            if on_support and 10 * h <= side <= 0.1 and 0.25 <= mid[0] <= 0.75:
                cands.append(Q)
        assert cands
        reg = epsilon_regular_cubes(mu, L, 1.0, 0.1, R_graph=3, candidates=cands, table=table)
        assert reg == cands


class TestChain:
    def test_empty_measure_is_vacuous(self):
        rep = senior_regular_chain_check(empty_measure(2), DyadicLattice(2, -3, 0), 1.0)
        assert rep.verdict == "vacuous" and rep.passed

    def test_single_atom(self):
        mu = DiscreteMeasure([[0.3, 0.4]], [1.0])
        L = DyadicLattice(2, -5, 0, [0.01, 0.02])
        rep = senior_regular_chain_check(mu, L, 1.0, scan_all_regular=True)
        assert rep.passed
        assert rep.n_cubes == 9 * 6
        assert rep.M == 4

    def test_cantor_six_levels(self):
        mu = cantor_measure(2, 0.25, 3)
        L = DyadicLattice(2, -6, 0, [0.0021, 0.0013])
        rep = senior_regular_chain_check(mu, L, 1.0, p=2.0)
        assert rep.violations == []
        assert rep.ratio <= rep.bound

    def test_weights(self):
        L = DyadicLattice(2, -1, 0)
        table = table_from(L, {L.address(0, (0, 0)): 2.0})
        assert cube_weights(table, 2.0) == {L.address(0, (0, 0)): 8.0}

    def test_hops_matches_full_lattice(self):
        mu = cantor_measure(2, 0.25, 2)
        L = DyadicLattice(2, -4, 0, [0.0021, 0.0013])
        a = senior_regular_chain_check(mu, L, 1.0, hops=1)
        b = senior_regular_chain_check(mu, L, 1.0, hops=None)
        assert sorted(a.seniors) == sorted(b.seniors)
        assert a.violations == b.violations
