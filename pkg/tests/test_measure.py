import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmtlab.measure import (
    CoincidentPointsError,
    DiscreteMeasure,
    ad_regularity_check,
    ball_mass,
    coordinate_energies,
    empty_measure,
    energy,
    ksum,
    load_measure,
    niceness_constant,
    reasonable_growth_check,
    save_measure,
)
from gmtlab.zoo import cantor_measure, segment_measure

from strategies import measures


def atom(w=1.0, dim=2, at=None):
    x = np.zeros((1, dim)) if at is None else np.atleast_2d(at)
    return DiscreteMeasure(x, [w], dim=dim)


class TestConstruction:
    def test_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            DiscreteMeasure([[0.0], [1.0]], [1.0, -1.0])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            DiscreteMeasure([[0.0], [np.nan]], [1.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            DiscreteMeasure([[0.0], [1.0]], [1.0])

    def test_coincident_points_name_the_pair(self):
        with pytest.raises(CoincidentPointsError) as err:
            DiscreteMeasure([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], [1, 1, 1])
        assert set(err.value.pair) == {0, 2}

    def test_merge_sums_weights(self):
        mu = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], [1, 2, 3], merge=True)
        assert len(mu) == 2
        assert mu.total_mass == 6
        assert mu.ball_mass([0, 0], 0.5) == 4

    def test_immutable(self):
        mu = segment_measure(8)
        with pytest.raises(ValueError):
            mu.points[0, 0] = 3.0

    def test_total_mass_compensated(self):
        w = [1.0, 1e-16, 1e-16, 1e-16, 1e-16]
        mu = DiscreteMeasure(np.arange(5.0)[:, None], w)
        assert mu.total_mass == math.fsum(w)
        assert ksum(w) == math.fsum(w)


class TestBallMass:
    def test_atom_inside(self):
        assert ball_mass(atom(2.0), [0, 0], 1.0) == 2.0

    def test_empty(self):
        assert ball_mass(empty_measure(2), [0.3, 0.1], 1.0) == 0.0

    def test_square_corners(self):
        mu = DiscreteMeasure([[0, 0], [1, 0], [0, 1], [1, 1]], np.ones(4))
        assert ball_mass(mu, [0.5, 0.5], 0.8) == 4.0

    def test_ball_is_open(self):
        mu = DiscreteMeasure([[1.0, 0.0]], [1.0])
        assert ball_mass(mu, [0, 0], 1.0) == 0.0
        assert ball_mass(mu, [0, 0], 1.0 + 1e-12) == 1.0

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            ball_mass(atom(), [0, 0], 0.0)

    def test_index_matches_bruteforce_bitwise(self, rng):
        mu = DiscreteMeasure(rng.uniform(-1, 1, (500, 2)), rng.uniform(0, 1, 500))
        for _ in range(1000):
            x = rng.uniform(-1.2, 1.2, 2)
            r = rng.uniform(1e-3, 1.5)
            assert mu.ball_mass(x, r) == mu.ball_mass_bruteforce(x, r)

    def test_index_exact_on_boundary_distances(self):
        mu = segment_measure(64, d=2)
        # radii equal to exact point distances stress the open-ball rule
        for r in mu.distances_from([0.0, 0.0])[:20]:
            assert mu.ball_mass([0.0, 0.0], r) == mu.ball_mass_bruteforce([0.0, 0.0], r)

    @given(measures(), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_monotone_in_radius(self, mu, r1, r2):
        x = mu.points[0] * 0.5
        lo, hi = sorted((r1, r2))
        assert mu.ball_mass(x, lo) <= mu.ball_mass(x, hi)


class TestNiceness:
    def test_single_atom(self):
        rep = niceness_constant(atom(1.0), 1.0, r_min=0.5, r_max=2.0)
        assert rep.constant == pytest.approx(2.0)
        assert rep.witness[1] == pytest.approx(0.5)

    def test_zero_measure(self):
        assert niceness_constant(empty_measure(2), 1.0, 0.5, 2.0).constant == 0.0

    def test_rejects_nonpositive_rmin(self):
        with pytest.raises(ValueError):
            niceness_constant(atom(), 1.0, r_min=0.0, r_max=1.0)

    def test_segment_tends_to_two(self):
        # interior balls of a unit-density segment carry mass 2r, so the sup ratio is 2
        errs = []
        for n in (32, 128, 512, 2048):
            c = niceness_constant(segment_measure(n), 1.0, r_min=0.1, r_max=0.4).constant
            assert c >= 2.0
            errs.append(c - 2.0)
            assert errs[-1] <= 8.0 / n
        assert errs == sorted(errs, reverse=True)

    def test_witness_reproduces_constant(self):
        mu = cantor_measure(2, 0.25, 3)
        rep = niceness_constant(mu, 1.0)
        c, r, q = rep.witness
        assert mu.ball_mass(c, r) / r == pytest.approx(rep.constant, rel=1e-14)
        assert q == rep.constant

    @given(measures(dim=2, min_size=2, max_size=15), st.floats(0.1, 10.0), st.floats(0.5, 1.8))
    def test_rescaling_invariance(self, mu, lam, s):
        base = niceness_constant(mu, s, r_min=0.05, r_max=2.0)
        scaled_mu = mu.scaled(lam, s)
        scaled = niceness_constant(scaled_mu, s, r_min=0.05 * lam, r_max=2.0 * lam,
                                   centers=np.vstack([mu.points * lam]))
        unscaled = niceness_constant(mu, s, r_min=0.05, r_max=2.0, centers=mu.points)
        assert scaled.constant == pytest.approx(unscaled.constant, rel=1e-9)
        assert base.constant >= unscaled.constant


class TestADRegularity:
    def test_single_atom_minimum(self):
        rep = ad_regularity_check(atom(1.0), 1.0, 4.0, r_min=0.5, r_max=2.0)
        assert rep.constant == pytest.approx(0.5)
        assert rep.witness[1] == pytest.approx(2.0)

    def test_empty_is_vacuous(self):
        assert ad_regularity_check(empty_measure(2), 1.0, 2.0).verdict == "vacuous"

    def test_line_lower_ratio(self):
        for n in (64, 256):
            mu = segment_measure(n, d=2)
            h = 1.0 / n
            rep = ad_regularity_check(mu, 1.0, 2.5, r_min=2 * h, r_max=0.25)
            assert rep.constant >= 1.0 - 2 * h
            assert rep.passed

    def test_segment_passes_with_lambda_two(self):
        for n in (128, 512, 2048):
            rep = ad_regularity_check(segment_measure(n), 1.0, 2.0 + 8.0 / n, r_min=0.1, r_max=0.4)
            assert rep.passed

    def test_cantor_ratio_spread(self):
        for n in (3, 4, 5):
            mu = cantor_measure(2, 0.25, n)
            rep = ad_regularity_check(mu, 1.0, 100.0)
            assert rep.upper_constant / rep.constant < 10


class TestReasonableGrowth:
    def test_beta_is_an_input(self):
        mu = segment_measure(64, d=2)
        low = reasonable_growth_check(mu, 1.0, 10.0, beta=0.0, R=2.0)
        high = reasonable_growth_check(mu, 1.0, 10.0, beta=0.5, R=2.0)
        assert high.constant <= low.constant
        assert low.passed

    def test_empty(self):
        assert reasonable_growth_check(empty_measure(2), 1.0, 1.0, 0.1, 1.0).passed


class TestEnergy:
    def test_two_atoms(self):
        mu = DiscreteMeasure([[0.0], [1.0]], [1, 1])
        assert energy(mu, 2.0) == 2.0

    def test_single_atom(self):
        assert energy(atom(), 2.0) == 0.0

    def test_three_on_a_line(self):
        mu = DiscreteMeasure([[0.0], [1.0], [2.0]], [1, 1, 1])
        assert energy(mu, 2.0) == 5.0

    def test_rejects_small_s(self):
        with pytest.raises(ValueError):
            energy(atom(), 1.0)

    @given(measures(min_size=2, max_size=40), st.floats(1.05, 2.9))
    def test_coordinate_identity(self, mu, s):
        total = energy(mu, s)
        split = math.fsum(coordinate_energies(mu, s))
        assert split == pytest.approx(total, rel=1e-12)

    def test_blocked_sum_matches_naive(self, rng):
        mu = DiscreteMeasure(rng.uniform(0, 1, (700, 2)), rng.uniform(0, 1, 700))
        d = np.linalg.norm(mu.points[:, None] - mu.points[None], axis=2)
        np.fill_diagonal(d, np.inf)
        w = mu.weights
        assert energy(mu, 1.5) == pytest.approx(np.sum(np.outer(w, w) / d ** 0.5), rel=1e-12)

    def test_reproducible(self, rng):
        mu = DiscreteMeasure(rng.uniform(0, 1, (600, 3)), rng.uniform(0, 1, 600))
        assert energy(mu, 1.7) == energy(mu.permuted(np.arange(600)), 1.7)


class TestFiles:
    @pytest.mark.parametrize("name", ["m.json", "m.gmtm"])
    def test_roundtrip(self, tmp_path, rng, name):
        mu = DiscreteMeasure(rng.normal(size=(50, 3)), rng.uniform(0, 1, 50))
        path = save_measure(mu, tmp_path / name)
        back = load_measure(path)
        assert back.digest() == mu.digest()

    def test_binary_header(self, tmp_path):
        path = save_measure(segment_measure(4, d=2), tmp_path / "m.bin")
        raw = path.read_bytes()
        assert raw[:4] == b"GMTM"
        assert len(raw) == 4 + 4 + 8 + 4 * 3 * 8

    def test_truncated_binary(self, tmp_path):
        path = save_measure(segment_measure(4, d=2), tmp_path / "m.bin")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            load_measure(path)
