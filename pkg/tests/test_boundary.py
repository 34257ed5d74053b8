import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchilbert.boundary import (ArcPartition, BoundaryFunction, argument_function,
                                boundary_from_json, certify_cbv, one_sided_jumps,
                                partition_from_json, total_variation)
from qchilbert.errors import CertificationError, InputError


def sampled(fn, n=1024, exceptional=()):
    return BoundaryFunction.from_callable(fn, n, exceptional=exceptional)


def step(t):
    return np.where(np.mod(t, 2 * np.pi) < np.pi, 1.0, -1.0)


class TestTotalVariation:
    def test_constant(self):
        assert total_variation(sampled(lambda t: np.full_like(t, 3.0))) == 0.0

    def test_two_jumps_of_two(self):
        assert total_variation(sampled(step)) == pytest.approx(4.0)

    def test_chord_sums_converge_to_arc_length(self):
        prev = 0.0
        for n in (64, 256, 1024, 4096):
            v = total_variation(sampled(lambda t: np.exp(1j * t), n))
            assert v >= prev
            prev = v
        assert prev == pytest.approx(2 * math.pi, rel=0.005)

    def test_open_arc_excludes_wrap(self):
        fn = sampled(lambda t: t)
        assert total_variation(fn, (0.0, 1.0)) == pytest.approx(2 * math.pi, rel=0.01)

    @given(st.lists(st.floats(0.05, 1.0), min_size=8, max_size=8))
    def test_invariant_under_monotone_reparameterization(self, gaps):
        # the same value sequence at moved parameters has the same variation
        fn = sampled(lambda t: np.cos(3 * t) + 0.5j * np.sin(t), 256)
        knots = np.concatenate([[0.0], np.cumsum(gaps)])
        knots /= knots[-1]
        h = np.interp(fn.params, np.linspace(0, 1, 9), knots)
        moved = BoundaryFunction(h, fn.values)
        assert total_variation(moved) == pytest.approx(total_variation(fn), rel=1e-12)

    @given(st.integers(0, 10_000))
    def test_random_resampling_approaches_same_variation(self, seed):
        rng = np.random.default_rng(seed)
        s = np.sort(rng.random(4096))
        f = lambda p: np.cos(2 * np.pi * 3 * p)  # noqa: E731
        irregular = BoundaryFunction(s, f(s))
        regular = BoundaryFunction(np.arange(4096) / 4096, f(np.arange(4096) / 4096))
        assert total_variation(irregular) == pytest.approx(total_variation(regular), rel=0.01)


class TestCertify:
    def test_smooth_single_arc(self):
        cbv = certify_cbv(sampled(lambda t: np.exp(1j * t), exceptional=(0.0,)), ArcPartition.full())
        assert len(cbv.per_arc_variation) == 1
        assert cbv.sup_variation == pytest.approx(2 * math.pi, rel=0.01)

    def test_step_with_isolated_jumps(self):
        fn = sampled(step, exceptional=(0.0, 0.5))
        cbv = certify_cbv(fn, ArcPartition.from_breakpoints([0.0, 0.5]))
        assert cbv.per_arc_variation == (0.0, 0.0)

    def test_oscillation_fails_and_names_arc(self):
        fn = sampled(lambda t: np.sin(1 / (t - 1.0)), 1024, exceptional=(0.0, 0.5))
        with pytest.raises(CertificationError) as err:
            certify_cbv(fn, ArcPartition.from_breakpoints([0.0, 0.5]))
        assert err.value.arc == 0

    def test_loose_sample_must_be_exceptional(self):
        fn = sampled(step)
        part = ArcPartition(((0.0, 0.5), (0.5, 1.0)), ())
        with pytest.raises(InputError):
            certify_cbv(fn, part)

    def test_overlapping_arcs(self):
        with pytest.raises(InputError):
            ArcPartition(((0.0, 0.6), (0.5, 1.0)), ())


class TestArgument:
    def test_one_gives_zero(self):
        a = argument_function(certify_cbv(sampled(lambda t: np.ones_like(t) + 0j), ArcPartition.full()))
        assert np.all(a.alpha.values == 0.0)

    def test_minus_one_gives_plus_pi(self):
        a = argument_function(certify_cbv(sampled(lambda t: -np.ones_like(t) + 0j), ArcPartition.full()))
        np.testing.assert_allclose(a.alpha.values[1:], math.pi)

    def test_rotation_gives_angle(self):
        # cut at theta = pi so the arc is (-pi, pi); compare with cumulative phase increments
        fn = sampled(lambda t: np.exp(1j * t), 1024)
        part = ArcPartition.full(0.5)
        a = argument_function(certify_cbv(fn, part))
        order = part.arc_samples(fn, 0)
        incr = np.concatenate([[0.0], np.cumsum(np.angle(fn.values[order][1:] / fn.values[order][:-1]))])
        expected = np.angle(fn.values[order][0]) + incr
        np.testing.assert_allclose(a.alpha.values[order], expected, atol=1e-12)
        theta = np.where(fn.theta > math.pi, fn.theta - 2 * math.pi, fn.theta)
        np.testing.assert_allclose(a.alpha.values[order], theta[order], atol=1e-12)

    def test_not_unimodular(self):
        with pytest.raises(InputError):
            argument_function(certify_cbv(sampled(lambda t: 2 * np.exp(1j * t)), ArcPartition.full()))

    @given(st.integers(1, 4), st.floats(-3.0, 3.0), st.lists(st.floats(0.05, 0.95), min_size=1,
                                                              max_size=3, unique=True))
    def test_reproduces_coefficient_and_respects_bound(self, k, phase, cuts):
        fn = sampled(lambda t: np.exp(1j * (k * t + phase + 0.3 * np.sin(t))), 512)
        part = ArcPartition.from_breakpoints(cuts)
        fn = BoundaryFunction(fn.params, fn.values, None, fn.source, part.exceptional)
        lam = certify_cbv(fn, part)
        a = argument_function(lam)
        ok = part.arc_index(fn.params) >= 0
        np.testing.assert_allclose(np.exp(1j * a.alpha.values[ok]), fn.values[ok], atol=1e-9)
        assert np.max(np.abs(a.alpha.values[ok])) <= math.pi + 1.5 * math.pi * lam.sup_variation
        for i, arc in enumerate(part.arcs):
            assert total_variation(a.alpha, arc) <= 1.5 * math.pi * lam.per_arc_variation[i] + 1e-9

    def test_jump_of_rotation_phase(self):
        fn = sampled(lambda t: np.exp(1j * t), 1024, exceptional=(0.0,))
        a = argument_function(certify_cbv(fn, ArcPartition.full()))
        ((e, J),) = a.jumps()
        assert e == 0.0
        assert J == pytest.approx(-2 * math.pi, abs=1e-9)


def test_one_sided_jumps_of_step():
    fn = sampled(step, exceptional=(0.0, 0.5))
    jumps = dict(one_sided_jumps(fn, ArcPartition.from_breakpoints([0.0, 0.5])))
    assert jumps[0.0] == pytest.approx(2.0)
    assert jumps[0.5] == pytest.approx(-2.0)


class TestJson:
    def test_expression(self):
        fn = boundary_from_json({"kind": "expr", "expr": "cos(theta)"}, 64)
        np.testing.assert_allclose(fn.values, np.cos(2 * np.pi * np.arange(64) / 64))

    def test_piecewise_with_exceptional(self):
        obj = {"kind": "piecewise", "exceptional": [0.0, math.pi],
               "arcs": [{"from": 0.0, "to": math.pi, "value": 1.0},
                        {"from": math.pi, "to": 2 * math.pi, "value": -1.0}]}
        fn = boundary_from_json(obj, 64)
        assert fn.exceptional == (0.0, 0.5)
        assert fn.values[5] == 1.0 and fn.values[40] == -1.0

    def test_samples(self):
        th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
        fn = boundary_from_json({"kind": "samples", "theta": th.tolist(),
                                 "values": np.sin(th).tolist()}, 32)
        np.testing.assert_allclose(fn.values, np.sin(th), atol=1e-12)

    def test_partition_breakpoints(self):
        fn = boundary_from_json("1", 16)
        part = partition_from_json({"breakpoints": [0.0, math.pi]}, fn)
        assert part.arcs == ((0.0, 0.5), (0.5, 1.0))

    def test_unknown_kind(self):
        with pytest.raises(InputError):
            boundary_from_json({"kind": "spline"}, 16)
