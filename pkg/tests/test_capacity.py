import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchilbert.capacity import (MassDistribution, circle_sampler, fekete_points, is_negligible,
                                log_vandermonde, logarithmic_potential, sampler_from_json,
                                segment_sampler, transfinite_diameter, vandermonde_product)
from qchilbert.errors import InputError

# lattice points, so separations stay far above rounding error
points = st.lists(st.tuples(st.integers(-500, 500), st.integers(-500, 500)), min_size=2, max_size=8,
                  unique=True).map(lambda ps: [complex(a, b) / 100 for a, b in ps])


class TestVandermonde:
    def test_single_pair(self):
        assert vandermonde_product([0, 1]) == 1.0

    def test_cube_roots_of_unity(self):
        z = np.exp(2j * np.pi * np.arange(3) / 3)
        assert vandermonde_product(z) == pytest.approx(3 * math.sqrt(3), rel=1e-14)

    def test_duplicate_point(self):
        assert vandermonde_product([0, 1, 1]) == 0.0

    def test_too_few(self):
        with pytest.raises(InputError):
            vandermonde_product([1.0])

    @given(points, st.randoms())
    def test_permutation_invariant(self, pts, rnd):
        perm = list(pts)
        rnd.shuffle(perm)
        assert log_vandermonde(perm) == pytest.approx(log_vandermonde(pts), abs=1e-9)

    @given(points, st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
    def test_translation_invariant(self, pts, shift):
        moved = np.asarray(pts) + shift
        assert log_vandermonde(moved) == pytest.approx(log_vandermonde(pts), abs=1e-8)


class TestFekete:
    def test_three_points_on_circle_match_exhaustive_search(self):
        cand = np.exp(2j * np.pi * np.arange(60) / 60)
        best = max(vandermonde_product(cand[list(c)]) for c in itertools.combinations(range(60), 3))
        _, v = fekete_points(cand, 3)
        assert v == pytest.approx(best, rel=1e-12)
        assert v == pytest.approx(3 * math.sqrt(3), rel=1e-12)

    def test_antipodal_pair(self):
        pts, v = fekete_points(circle_sampler(m=64), 2)
        assert v == pytest.approx(2.0)
        assert abs(pts[0] + pts[1]) < 1e-12

    def test_two_point_set(self):
        pts, v = fekete_points(np.array([0, 1], dtype=complex), 2)
        assert sorted(pts.real) == [0.0, 1.0]
        assert v == 1.0

    def test_empty_sampler(self):
        with pytest.raises(InputError):
            fekete_points(np.array([], dtype=complex), 2)

    def test_no_single_exchange_improves(self):
        cand = circle_sampler(m=97)() * (1 + 0.3 * np.cos(3 * np.angle(circle_sampler(m=97)())))
        pts, v = fekete_points(cand, 6)
        for i in range(6):
            for c in cand:
                if c in pts:
                    continue
                trial = pts.copy()
                trial[i] = c
                assert vandermonde_product(trial) <= v * (1 + 1e-9)


@pytest.fixture(scope="module")
def circle2():
    return transfinite_diameter(circle_sampler(radius=2.0), 30)


@pytest.fixture(scope="module")
def segment():
    return transfinite_diameter(segment_sampler(-2, 2), 30)


class TestTransfiniteDiameter:
    def test_circle_radius_two(self, circle2):
        assert circle2.extrapolated_tau == pytest.approx(2.0, rel=0.01)

    def test_segment_length_four(self, segment):
        # capacity of a segment is a quarter of its length
        assert segment.extrapolated_tau == pytest.approx(1.0, rel=0.02)

    @pytest.mark.parametrize("name", ["circle2", "segment"])
    def test_tau_nonincreasing(self, name, request):
        est = request.getfixturevalue(name)
        taus = [est.tau_n[k] for k in sorted(est.tau_n)]
        assert all(b <= a * (1 + 1e-6) for a, b in zip(taus, taus[1:]))

    def test_equispaced_circle_points_are_exact(self):
        # n equispaced points on |z| = R have V_n = n^{n/2} R^{n(n-1)/2}
        n, R = 12, 2.0
        z = R * np.exp(2j * np.pi * np.arange(n) / n)
        assert log_vandermonde(z) == pytest.approx(n / 2 * math.log(n) + n * (n - 1) / 2 * math.log(R))

    def test_single_point_set(self):
        est = transfinite_diameter(np.array([0.5 + 0.5j] * 10), 5)
        assert all(t == 0.0 for t in est.tau_n.values())

    @pytest.mark.parametrize("scale", [0.5, 3.0])
    def test_scaling(self, scale):
        base = transfinite_diameter(circle_sampler(radius=1.0, m=1024), 20).extrapolated_tau
        scaled = transfinite_diameter(circle_sampler(radius=scale, m=1024), 20).extrapolated_tau
        assert scaled == pytest.approx(scale * base, rel=0.01)
        seg = transfinite_diameter(segment_sampler(-1, 1, 2001), 20).extrapolated_tau
        seg_s = transfinite_diameter(segment_sampler(-scale, scale, 2001), 20).extrapolated_tau
        assert seg_s == pytest.approx(scale * seg, rel=0.01)

    def test_json_roundtrip(self, circle2):
        obj = circle2.to_json()
        assert obj["n"] == 30 and set(obj) >= {"V_n", "tau_n", "extrapolated_tau"}


class TestPotential:
    def test_unit_mass_at_distance_one(self):
        assert logarithmic_potential(MassDistribution([0], [1.0]), 1) == 0.0

    def test_unit_mass_at_distance_e(self):
        assert logarithmic_potential(MassDistribution([0], [1.0]), math.e) == pytest.approx(-1.0)

    def test_two_halves(self):
        m = MassDistribution([1, -1], [0.5, 0.5])
        assert logarithmic_potential(m, 0) == 0.0

    def test_at_mass_point(self):
        assert logarithmic_potential(MassDistribution([0], [1.0]), 0) == math.inf

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InputError):
            MassDistribution([0, 1], [0.5, 0.6])


class TestNegligible:
    def test_empty(self):
        assert is_negligible([])

    def test_single_point(self):
        assert is_negligible([0.3 + 0.1j])

    def test_finitely_many_points(self):
        assert is_negligible(np.exp(2j * np.pi * np.arange(5) / 5))

    def test_circle_sampling_is_not(self):
        assert not is_negligible(circle_sampler(m=256)())


def test_sampler_json():
    s = sampler_from_json({"kind": "segment", "endpoints": [-1, 1], "m": 11})
    assert s().size == 11
    with pytest.raises(InputError):
        sampler_from_json({"kind": "cloud"})
