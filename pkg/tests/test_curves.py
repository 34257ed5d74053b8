import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchilbert.curves import (JordanCurve, NontangentialRay, PlanarDomain, boundary_probes,
                              check_A_condition, check_qhb_condition, circle, distance_to_boundary,
                              domain_from_json, nontangential_points, quasihyperbolic_distance,
                              signed_area, square, tangent_at)
from qchilbert.errors import DomainError, InputError, UnsupportedError


def brute_force_distance(curve: JordanCurve, z: complex) -> float:
    """Distance to the polyline by scanning every segment."""
    a = curve.samples
    b = np.roll(a, -1)
    best = math.inf
    for p, q in zip(a, b):
        d = q - p
        t = min(max(((z - p) * np.conj(d)).real / abs(d) ** 2, 0.0), 1.0)
        best = min(best, abs(z - (p + t * d)))
    return best


class TestCurves:
    def test_polyline_is_closed_counterclockwise_and_simple(self, disk):
        c = disk.boundary
        assert signed_area(c.samples) > 0
        assert c.is_simple()

    def test_clockwise_samples_are_reoriented(self):
        z = np.exp(-2j * np.pi * np.arange(64) / 64)
        c = JordanCurve.from_points(np.column_stack([z.real, z.imag]))
        assert signed_area(c.samples) > 0

    def test_self_intersecting_samples_are_rejected(self):
        bowtie = [[0, 0], [1, 1], [1, 0], [0, 1]]
        with pytest.raises(InputError):
            domain_from_json({"samples": bowtie})

    def test_basepoint_outside_is_rejected(self):
        with pytest.raises(DomainError):
            PlanarDomain(circle(0, 1, 64), z0=2.0)


class TestDistance:
    def test_disk_centre(self, disk):
        assert distance_to_boundary(disk, 0j) == pytest.approx(1.0, abs=1e-4)

    def test_disk_half_radius(self, disk):
        assert distance_to_boundary(disk, 0.5) == pytest.approx(0.5, abs=1e-4)

    @pytest.mark.parametrize("z", [0.9 + 0j, 0.95 + 0.01j, 0.5 + 0.7j, 1.2 + 1.5j])
    def test_trefoil_matches_segment_scan(self, trefoil, z):
        assert distance_to_boundary(trefoil, z) == pytest.approx(
            brute_force_distance(trefoil.boundary, z), rel=1e-12)

    def test_boundary_point_is_rejected(self, disk):
        with pytest.raises(DomainError):
            distance_to_boundary(disk, 1.0 + 0j)

    def test_exterior_point_is_rejected(self, disk):
        with pytest.raises(DomainError):
            distance_to_boundary(disk, 2.0 + 0j)


class TestQuasihyperbolic:
    @pytest.mark.parametrize("r", [0.5, 0.9])
    def test_radial_closed_form(self, disk, r):
        # along a radius k = int_0^r dt / (1 - t)
        k = quasihyperbolic_distance(disk, r, 0j, resolution=1 / 256)
        assert k == pytest.approx(math.log(1 / (1 - r)), rel=0.02)

    def test_coincident_points(self, disk):
        assert quasihyperbolic_distance(disk, 0.3j, 0.3j) == 0.0

    def test_refinement_does_not_increase(self, disk):
        coarse = quasihyperbolic_distance(disk, 0.6 + 0.2j, -0.3j, resolution=1 / 32)
        fine = quasihyperbolic_distance(disk, 0.6 + 0.2j, -0.3j, resolution=1 / 128)
        assert fine <= coarse + 0.02

    @given(st.tuples(*[st.floats(-0.6, 0.6)] * 6))
    def test_metric_axioms(self, coords):
        d = _disk64()
        a, b, c = (complex(coords[i], coords[i + 1]) for i in (0, 2, 4))
        k = lambda p, q: quasihyperbolic_distance(d, p, q, resolution=1 / 32)  # noqa: E731
        tol = 0.05
        assert k(a, b) >= 0
        assert abs(k(a, b) - k(b, a)) <= 2 * tol
        assert k(a, c) <= k(a, b) + k(b, c) + tol


_D64 = {}


def _disk64():
    if "d" not in _D64:
        _D64["d"] = PlanarDomain(circle(0, 1, 256), 0j, "disk", indicator=lambda z: np.abs(z) < 1)
    return _D64["d"]


class TestQHB:
    def test_disk_radial_probes_fit_identity(self, disk):
        probes = np.array([1 - 2.0 ** -j for j in range(1, 8)], dtype=complex)
        fit = check_qhb_condition(disk, 0j, probes, resolution=1 / 128)
        assert fit.a == pytest.approx(1.0, abs=0.1)
        assert fit.violations == 0
        assert fit.holds

    def test_disk_forced_identity_constants(self, disk):
        probes = np.array([1 - 2.0 ** -j for j in range(1, 8)], dtype=complex)
        fit = check_qhb_condition(disk, 0j, probes, resolution=1 / 128, fixed=(1.0, 0.0))
        assert fit.max_residual <= fit.tol

    def test_trefoil_holds_with_finite_constants(self, trefoil):
        probes = boundary_probes(trefoil, np.arange(16) / 16 + 1 / 32,
                                 [0.2, 0.1, 0.05, 0.025, 0.0125])
        fit = check_qhb_condition(trefoil, -0.2 + 0j, probes)
        assert np.isfinite(fit.a) and np.isfinite(fit.b)
        assert fit.violations == 0
        assert fit.verdict == "holds numerically"

    def test_too_few_probes(self, disk):
        with pytest.raises(InputError):
            check_qhb_condition(disk, 0j, [0.5 + 0j])


class TestACondition:
    def test_disk_ratio_tends_to_half(self, disk):
        rep = check_A_condition(disk, 1.0 + 0j, [0.2, 0.1, 0.05, 0.025])
        assert rep.ratios[-1] == pytest.approx(0.5, abs=0.02)
        assert rep.verdict == "holds"

    def test_trefoil_cusp_ratio_tends_to_one(self, trefoil):
        rep = check_A_condition(trefoil, 1.0 + 0j, [0.2, 0.1, 0.05, 0.025])
        assert np.all(np.diff(rep.ratios) > 0)
        assert rep.trend == "to-one"
        assert rep.verdict == "fails"

    def test_empty_radii(self, disk):
        with pytest.raises(InputError):
            check_A_condition(disk, 1.0 + 0j, [])

    @given(st.floats(0.0, 2 * math.pi), st.floats(0.01, 0.5))
    def test_ratios_are_fractions(self, theta, rho):
        rep = check_A_condition(_disk64(), complex(np.exp(1j * theta)), [rho], n_samples=2000)
        assert 0.0 <= rep.ratios[0] <= 1.0


class TestTangents:
    def test_circle_tangent_at_one(self, disk):
        t = tangent_at(disk.boundary, 0.0)
        assert abs(t - 1j) < 1e-6

    def test_square_corner_has_none(self):
        sq = square()
        corner = sq.boundary.locate(1 + 1j)
        assert tangent_at(sq.boundary, corner) is None

    def test_trefoil_cusp_has_a_tangent_line(self, trefoil):
        # both arcs through the cusp 1 come from circles centred at 1 +- i
        t = tangent_at(trefoil.boundary, trefoil.boundary.locate(1 + 0j))
        assert t is not None
        assert min(abs(t - 1), abs(t + 1)) < 1e-4


class TestNontangential:
    def test_radial_points(self, disk):
        pts = nontangential_points(NontangentialRay(1 + 0j, 0.0, (0.1, 0.01)), disk)
        np.testing.assert_allclose(pts, [0.9, 0.99], atol=1e-6)

    def test_cone_points_are_interior(self, disk):
        ray = NontangentialRay(1j, math.pi / 3, (0.1, 0.01))
        pts = nontangential_points(ray, disk)
        assert pts.size == 6
        assert np.all(np.abs(pts) < 1)
        off = np.abs(np.angle((pts - 1j) / -1j))
        assert np.all(off <= math.pi / 6 + 1e-9)

    def test_square_corner_vertex(self):
        with pytest.raises(UnsupportedError):
            nontangential_points(NontangentialRay(1 + 1j, 0.0, (0.1,)), square())

    def test_aperture_must_be_acute(self):
        with pytest.raises(InputError):
            NontangentialRay(1 + 0j, math.pi / 2, (0.1,))


class TestDomainJson:
    def test_circle(self):
        d = domain_from_json({"parametric": {"kind": "circle", "params": {}}})
        assert d.contains(np.array([0.5 + 0.5j]))[0]

    def test_trefoil(self):
        d = domain_from_json({"parametric": {"kind": "three_disks"}})
        assert d.contains(np.array([1 + 1.5j]))[0]
        assert not d.contains(np.array([1.5 + 0j]))[0]

    def test_unknown_kind(self):
        with pytest.raises(InputError):
            domain_from_json({"parametric": {"kind": "blob"}})
