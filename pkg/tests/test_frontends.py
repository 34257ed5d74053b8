import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchilbert.boundary import ArcPartition, BoundaryFunction, certify_cbv
from qchilbert.errors import DomainError, InputError, UnsupportedError
from qchilbert.frontends import (EllipticMatrix, PoincareProblemSpec, dilatation_bound,
                                 extend_coefficient, image_domain, matrix_from_mu, mu_from_matrix,
                                 mu_value, normal_field, solve_a_harmonic_directional,
                                 solve_dirichlet, solve_directional, solve_neumann, solve_poincare,
                                 stencil_residual)

MODES = 256
unit_mu = st.builds(lambda r, t: r * complex(np.exp(1j * t)), st.floats(0, 0.95), st.floats(0, 2 * np.pi))


def data(fn, curve, n=4 * MODES):
    return BoundaryFunction.from_callable(fn, n, curve)


def centred(sol, exact):
    z = sol.grid
    got = sol.u(z) - sol.u(np.array([0j]))[0]
    return float(np.max(np.abs(got - (exact(z) - exact(0j)))))


class TestDictionary:
    def test_half_is_diag(self):
        A = matrix_from_mu(0.5)
        np.testing.assert_allclose(A.at(0.2j), [[1 / 3, 0], [0, 3]], atol=1e-15)
        assert mu_value(EllipticMatrix.constant(1 / 3, 0.0, 3.0)) == pytest.approx(0.5, abs=1e-15)

    def test_roundtrip_on_random_samples(self, rng):
        r = 0.95 * np.sqrt(rng.random(100))
        mus = r * np.exp(2j * np.pi * rng.random(100))
        back = np.array([mu_value(matrix_from_mu(m)) for m in mus])
        assert np.max(np.abs(back - mus)) <= 1e-12

    @given(unit_mu)
    def test_entries_bounded_by_dilatation(self, mu):
        A = matrix_from_mu(mu).at(0j)
        assert np.max(np.abs(A)) <= dilatation_bound(mu) * (1 + 1e-12)
        assert np.linalg.det(A) == pytest.approx(1.0, abs=1e-9)

    @given(unit_mu)
    def test_roundtrip_property(self, mu):
        assert abs(mu_value(matrix_from_mu(mu)) - mu) <= 1e-12

    def test_field_roundtrip(self):
        mu = lambda z: 0.3 * np.exp(1j * np.real(z))  # noqa: E731
        back = mu_from_matrix(matrix_from_mu(mu))
        z = np.array([0.1, 0.5 + 0.2j])
        np.testing.assert_allclose(back(z), mu(z), atol=1e-12)

    def test_real_parts_are_a_harmonic(self):
        # u = Re H(z + mu conj z) for analytic H solves div(A grad u) = 0 with A = A(mu)
        mu = 0.3 - 0.2j
        u = lambda z: np.real((z + mu * np.conj(z)) ** 2 + 0.3 * (z + mu * np.conj(z)) ** 3)  # noqa: E731
        pts = 0.5 * np.exp(1j * np.linspace(0, 6, 13))
        assert stencil_residual(u, matrix_from_mu(mu), pts, 1e-3) < 1e-5
        assert stencil_residual(u, EllipticMatrix.constant(1.0, 0.0, 1.0), pts, 1e-3) > 0.1

    def test_degenerate_mu(self):
        with pytest.raises(DomainError):
            matrix_from_mu(1.0)
        with pytest.raises(DomainError):
            dilatation_bound(1.0)

    @pytest.mark.parametrize("entries", [(1.0, 0.5, 0.4, 1.0), (2.0, 0.0, 0.0, 2.0), (-1.0, 0.0, 0.0, -1.0)])
    def test_invalid_matrices(self, entries):
        with pytest.raises(InputError):
            EllipticMatrix.from_fields(*entries)


class TestHarmonicFrontends:
    def test_dirichlet_cosine(self, disk):
        sol = solve_dirichlet(disk, data(np.cos, disk.boundary), N=MODES)
        assert np.max(np.abs(sol.u(sol.grid) - sol.grid.real)) < 1e-10
        assert sol.passed

    def test_neumann_cosine(self, disk):
        sol = solve_neumann(disk, data(np.cos, disk.boundary), N=MODES)
        assert centred(sol, lambda z: -np.real(z)) < 1e-4
        assert [t.name for t in sol.tables] == ["normal_limit", "normal_derivative", "angular_derivative"]
        assert all(t.pass_fraction >= 0.99 for t in sol.tables)
        assert sol.report["flux"] == pytest.approx(0.0, abs=1e-12)

    def test_directional_sine(self, disk):
        sol = solve_directional(disk, normal_field(disk), data(np.sin, disk.boundary), N=MODES)
        assert centred(sol, lambda z: -np.imag(z)) < 1e-4
        assert sol.report["gradient_identity"] < 1e-6

    def test_poincare_scaling(self, disk):
        spec = PoincareProblemSpec(disk, data(lambda t: 2 * np.cos(t), disk.boundary), "poincare",
                                   normal_field(disk), None, data(lambda t: 2.0 + 0 * t, disk.boundary))
        sol = solve_poincare(spec, N=MODES)
        assert centred(sol, lambda z: -np.real(z)) < 1e-4

    def test_poincare_with_zero_order_term(self, disk):
        spec = PoincareProblemSpec(disk, data(np.cos, disk.boundary), "poincare", normal_field(disk),
                                   data(lambda t: 1.0 + 0 * t, disk.boundary))
        with pytest.raises(UnsupportedError):
            solve_poincare(spec, N=MODES)

    def test_problem_validation(self, disk):
        with pytest.raises(InputError):
            PoincareProblemSpec(disk, data(np.cos, disk.boundary), "robin")
        with pytest.raises(InputError):
            PoincareProblemSpec(disk, data(np.cos, disk.boundary), "directional")
        part = ArcPartition.full()
        bad = BoundaryFunction.from_callable(lambda t: 2 * np.exp(1j * t), 64, exceptional=part.exceptional)
        with pytest.raises(InputError):
            PoincareProblemSpec(disk, data(np.cos, disk.boundary), "directional",
                                certify_cbv(bad, part))

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_dirichlet_is_linear(self, disk, a, b):
        c = disk.boundary
        s1 = solve_dirichlet(disk, data(np.cos, c, 256), N=64)
        s2 = solve_dirichlet(disk, data(lambda t: np.sin(2 * t), c, 256), N=64)
        s = solve_dirichlet(disk, data(lambda t: a * np.cos(t) + b * np.sin(2 * t), c, 256), N=64)
        z = s.grid
        np.testing.assert_allclose(s.u(z), a * s1.u(z) + b * s2.u(z), atol=1e-10)


class TestQuasiconformalFrontends:
    def test_dirichlet_with_constant_dilatation(self, disk):
        sol = solve_dirichlet(disk, data(np.cos, disk.boundary), mu=0.3, N=MODES, n=256, L=4.0)
        assert sol.tables[0].pass_fraction >= 0.99
        assert sol.report["beltrami_relative"] <= 1e-2
        assert sol.report["stencil_residual"] <= 1e-2

    def test_a_harmonic_directional(self, disk):
        A = matrix_from_mu(0.5)
        sol = solve_a_harmonic_directional(disk, A, normal_field(disk), data(np.cos, disk.boundary),
                                           N=MODES, n=256, L=4.0)
        t = sol.tables[0]
        assert t.max_residual <= 5e-2
        assert sol.report["stencil_residual"] <= 1e-2
        assert sol.report["holder_class"].startswith("not certified")

    def test_identity_matrix_reduces_to_harmonic(self, disk):
        A = EllipticMatrix.constant(1.0, 0.0, 1.0)
        sol = solve_a_harmonic_directional(disk, A, normal_field(disk), data(np.cos, disk.boundary), N=MODES)
        assert centred(sol, lambda z: -np.real(z)) < 1e-4


class TestExtension:
    def test_regions(self, disk):
        mu = lambda z: 0.4 * np.exp(1j * np.angle(z + 0j)) * np.abs(z)  # noqa: E731
        ext = extend_coefficient(disk, mu, margin=0.5)
        z = np.array([0.5 + 0j, 1.2 + 0j, 2.0 + 0j])
        np.testing.assert_allclose(ext(z), [0.2, 0.4, 0.0], atol=1e-3)
        assert ext.k == pytest.approx(0.7, abs=1e-3)

    def test_clipping(self, disk):
        ext = extend_coefficient(disk, lambda z: 0.9 * np.real(z) + 0j)
        assert np.max(np.abs(ext(np.array([0.99, 1.1])))) <= ext.k + 1e-12

    def test_degenerate(self, disk):
        with pytest.raises(DomainError):
            extend_coefficient(disk, lambda z: 1.5 + 0 * z)

    def test_affine_image_is_ellipse(self, disk):
        dom, _, _ = image_domain(lambda z: z + 0.3 * np.conj(z), disk)
        assert dom.radial(np.array([0.0]))[0] == pytest.approx(1.3, rel=1e-6)
        assert dom.radial(np.array([np.pi / 2]))[0] == pytest.approx(0.7, rel=1e-6)

    def test_non_starlike_image(self, disk):
        with pytest.raises(UnsupportedError):
            image_domain(lambda z: z + 0.9 * z ** 3, disk)
