import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchilbert.conformal import conjugate_periodic, holder_exponent_estimate, riemann_map
from qchilbert.curves import starlike
from qchilbert.errors import InputError, UnsupportedError


def radius(th):
    return 1.0 + 0.1 * np.cos(2 * th)


def radius_prime(th):
    return -0.2 * np.sin(2 * th)


def symm_solution(n=64):
    """Boundary density of the interior Green's function by Symm's integral equation.

    Solves  int log|z(s) - z(t)| psi(t) dt - C = log|z(s)|,  int psi = 1,
    on 2n nodes, splitting off log(4 sin^2((s-t)/2)) / 2 and integrating it with
    Kress's trigonometric product weights.
    """
    t = np.pi * np.arange(2 * n) / n
    z = radius(t) * np.exp(1j * t)
    dz = (radius_prime(t) + 1j * radius(t)) * np.exp(1j * t)
    diff = t[:, None] - t[None, :]
    m = np.arange(1, n)
    R = -(2 * np.pi / n) * np.sum(np.cos(m[None, None, :] * diff[..., None]) / m, axis=-1) \
        - (np.pi / n ** 2) * np.cos(n * diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        smooth = np.log(np.abs(z[:, None] - z[None, :])) - 0.5 * np.log(4 * np.sin(diff / 2) ** 2)
    smooth[np.diag_indices(2 * n)] = np.log(np.abs(dz))
    K = 0.5 * R + (np.pi / n) * smooth
    A = np.zeros((2 * n + 1, 2 * n + 1))
    A[:-1, :-1] = K
    A[:-1, -1] = -1.0
    A[-1, :-1] = np.pi / n
    rhs = np.concatenate([np.log(np.abs(z)), [1.0]])
    sol = np.linalg.solve(A, rhs)
    psi, C = sol[:-1], sol[-1]
    # log g'(0) = C - int log|zeta| psi
    log_gprime = C - (np.pi / n) * np.dot(np.log(np.abs(z)), psi)
    return psi, log_gprime


def cumulative_angle(psi, s):
    """2 pi * int_0^{2 pi s} psi by trigonometric interpolation."""
    N = psi.size
    c = np.fft.fft(psi) / N
    k = np.fft.fftfreq(N, 1.0 / N)
    t = 2 * np.pi * np.asarray(s)
    out = c[0].real * t
    for kk, ck in zip(k[1:], c[1:]):
        if abs(kk) == N // 2:
            ck = ck / 2
            out = out + 2 * (ck * (np.exp(1j * kk * t) - 1) / (1j * kk)).real / 2
            continue
        out = out + (ck * (np.exp(1j * kk * t) - 1) / (1j * kk)).real
    return 2 * np.pi * out


@pytest.fixture(scope="module")
def oval():
    return starlike(radius, name="oval")


@pytest.fixture(scope="module")
def oval_map(oval):
    return riemann_map(oval)


class TestAgainstSymm:
    def test_boundary_correspondence(self, oval_map):
        psi, _ = symm_solution()
        s = np.linspace(0, 1, 41)
        phi = cumulative_angle(psi, s)
        got = np.unwrap(2 * np.pi * oval_map.boundary_map(s))
        got = got - got[0]
        np.testing.assert_allclose(got, phi, atol=1e-8)

    def test_conformal_radius(self, oval_map):
        _, log_gprime = symm_solution()
        assert oval_map.series[1].real == pytest.approx(math.exp(-log_gprime), rel=1e-10)
        assert abs(oval_map.series[1].imag) < 1e-12

    def test_symm_density_integrates_to_one(self):
        psi, _ = symm_solution(32)
        assert np.pi / 32 * psi.sum() == pytest.approx(1.0)


class TestExactMaps:
    def test_identity(self, disk):
        g = riemann_map(disk, "identity")
        z = np.array([0.3 + 0.4j, -0.5j])
        np.testing.assert_allclose(g.forward(z), z)

    @pytest.mark.parametrize("a", [0.3, 0.2 - 0.5j])
    def test_moebius_series_matches_closed_form(self, disk, a):
        g = riemann_map(disk, "moebius", a=a)
        w = 0.7 * np.exp(1j * np.linspace(0, 6, 9))
        np.testing.assert_allclose(np.polynomial.polynomial.polyval(w, g.series), g.inverse(w),
                                   atol=1e-10)
        assert abs(g.forward(a)) < 1e-15

    def test_moebius_outside(self, disk):
        with pytest.raises(InputError):
            riemann_map(disk, "moebius", a=1.2)

    def test_moebius_needs_disk(self, oval):
        with pytest.raises(UnsupportedError):
            riemann_map(oval, "moebius", a=0.1)

    def test_non_starlike(self, trefoil):
        with pytest.raises(UnsupportedError):
            riemann_map(trefoil)

    def test_unknown_method(self, disk):
        with pytest.raises(InputError):
            riemann_map(disk, "schwarz-christoffel")


class TestTheodorsen:
    def test_normalization(self, oval_map):
        assert abs(oval_map.forward(0j)) < 1e-12
        d = oval_map.derivative(0j)
        assert d.real > 0 and abs(d.imag) < 1e-10

    @given(st.floats(0, 0.95), st.floats(0, 2 * math.pi))
    def test_forward_inverts_series(self, oval_map, r, t):
        w = r * complex(np.exp(1j * t))
        assert abs(oval_map.forward(oval_map.inverse(w)) - w) < 1e-10

    def test_boundary_maps_are_inverse(self, oval_map):
        p = np.linspace(0, 1, 37, endpoint=False)
        back = oval_map.boundary_map(oval_map.boundary_inverse(p))
        assert np.max(np.abs(np.mod(back - p + 0.5, 1) - 0.5)) < 1e-9

    def test_inverse_lands_on_boundary(self, oval, oval_map):
        th = 2 * np.pi * np.arange(64) / 64
        z = oval_map.inverse(0.999999 * np.exp(1j * th))
        assert np.max(np.abs(np.abs(z) - radius(np.angle(z)))) < 1e-5

    def test_smooth_boundary_is_lipschitz_both_ways(self, oval_map):
        est = holder_exponent_estimate(oval_map)
        assert est["forward"] == pytest.approx(1.0, abs=0.05)
        assert est["inverse"] == pytest.approx(1.0, abs=0.05)


@given(st.integers(1, 30), st.floats(0, 2 * math.pi))
def test_conjugate_of_cosine_is_sine(k, shift):
    t = 2 * np.pi * np.arange(64) / 64
    np.testing.assert_allclose(conjugate_periodic(np.cos(k * t + shift)), np.sin(k * t + shift),
                               atol=1e-12)
