import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci_integrate

from beamwander.errors import ConvergenceError, DomainError
from beamwander.specfun import (
    QuadratureSpec,
    bessel_i0_scaled,
    bessel_i1_scaled,
    clipped_gaussian_fit,
    incomplete_weber_q0,
    incomplete_weber_q0_scaled,
    integrate,
    one_minus_i0_scaled,
)

mp.mp.dps = 40


def mp_i0e(x):
    return float(mp.exp(-x) * mp.besseli(0, x))


def mp_i1e(x):
    return float(mp.exp(-x) * mp.besseli(1, x))


def series_i0(x, terms=80):
    # independent power series, adequate for moderate x
    return sum((x / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(terms))


class TestScaledBessel:
    @pytest.mark.parametrize("x", [0.0, 1e-8, 0.3, 1.0, 4.0, 17.5, 50.0, 700.0, 1e4, 1e6])
    def test_against_mpmath(self, x):
        assert bessel_i0_scaled(x) == pytest.approx(mp_i0e(x), rel=1e-14)
        assert bessel_i1_scaled(x) == pytest.approx(mp_i1e(x), rel=1e-14, abs=1e-300)

    @pytest.mark.parametrize("x", [0.5, 3.0, 10.0])
    def test_against_power_series(self, x):
        assert bessel_i0_scaled(x) == pytest.approx(math.exp(-x) * series_i0(x), rel=1e-13)

    def test_values_at_zero(self):
        assert bessel_i0_scaled(0.0) == 1.0
        assert bessel_i1_scaled(0.0) == 0.0

    def test_large_argument_asymptote(self):
        x = 1e8
        assert bessel_i0_scaled(x) == pytest.approx(1 / math.sqrt(2 * math.pi * x), rel=1e-8)

    def test_array_in_array_out(self):
        out = bessel_i0_scaled(np.array([0.0, 1.0]))
        assert isinstance(out, np.ndarray) and out.shape == (2,)
        assert isinstance(bessel_i0_scaled(1.0), float)

    @pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            bessel_i0_scaled(bad)
        with pytest.raises(DomainError):
            bessel_i1_scaled(bad)

    @given(st.floats(0, 1e5))
    def test_ordering(self, x):
        # 0 <= I1 <= I0 and I0 e^{-x} <= 1
        i0, i1 = bessel_i0_scaled(x), bessel_i1_scaled(x)
        assert 0 <= i1 <= i0 <= 1


class TestOneMinusI0:
    @pytest.mark.parametrize("y", [0.0, 1e-12, 1e-7, 9.9e-5, 1e-4, 1e-3, 0.5, 0.999, 1.0, 5.0, 300.0])
    def test_against_mpmath(self, y):
        expected = float(1 - mp.exp(-mp.mpf(y)) * mp.besseli(0, mp.mpf(y)))
        assert one_minus_i0_scaled(y) == pytest.approx(expected, rel=1e-13, abs=0)


class TestClippedGaussianFit:
    @pytest.mark.parametrize("y", [1e-9, 1e-5, 1e-3, 0.2, 0.999, 1.0, 4.0, 40.0, 400.0, 5000.0])
    def test_against_mpmath(self, y):
        ym = mp.mpf(y)
        f0 = 1 - mp.exp(-ym / 2)
        den = 1 - mp.exp(-ym) * mp.besseli(0, ym)
        log_term = mp.log(2 * f0 / den)
        mu = 2 * ym * mp.exp(-ym) * mp.besseli(1, ym) / den / log_term
        got = clipped_gaussian_fit(y)
        assert got[0] == pytest.approx(float(f0), rel=1e-13)
        assert got[1] == pytest.approx(float(mu), rel=1e-12)
        assert got[2] == pytest.approx(float(log_term), rel=1e-12)

    def test_zero_limit(self):
        assert clipped_gaussian_fit(0.0) == (0.0, 2.0, 0.0)

    def test_small_y_shape_tends_to_two(self):
        assert clipped_gaussian_fit(1e-10)[1] == pytest.approx(2.0, rel=1e-8)


class TestIntegrate:
    def test_polynomial_exact(self):
        val, err = integrate(lambda x: 3 * x**2, 0.0, 2.0)
        assert val == pytest.approx(8.0, rel=1e-15)
        assert err < 1e-10

    def test_against_scipy_quad_oscillatory(self):
        f = lambda x: np.sin(30 * x) * np.exp(-x)
        val, _ = integrate(f, 0.0, 5.0, QuadratureSpec(1e-14, 1e-13))
        ref, _ = sci_integrate.quad(f, 0.0, 5.0, epsabs=1e-14, epsrel=1e-13, limit=500)
        assert val == pytest.approx(ref, abs=1e-13)

    def test_infinite_range(self):
        val, _ = integrate(lambda x: np.exp(-(x**2)), 0.0, math.inf)
        assert val == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-12)

    def test_vector_valued(self):
        val, err = integrate(lambda x: np.stack([x, x**2], axis=-1), 0.0, 1.0)
        np.testing.assert_allclose(val, [0.5, 1.0 / 3.0], rtol=1e-14)
        assert err.shape == (2,)

    def test_break_points_help_kinks(self):
        val, _ = integrate(lambda x: np.abs(x - 0.3), 0.0, 1.0, points=[0.3])
        assert val == pytest.approx(0.045 + 0.245, rel=1e-14)

    def test_empty_interval(self):
        assert integrate(lambda x: x, 1.0, 1.0)[0] == 0.0

    def test_convergence_error_carries_estimate(self):
        spec = QuadratureSpec(1e-15, 1e-15, max_subdivisions=3)
        with pytest.raises(ConvergenceError) as info:
            integrate(lambda x: 1 / np.sqrt(x + 1e-12), 0.0, 1.0, spec)
        assert info.value.estimate == pytest.approx(2.0, rel=1e-2)
        assert info.value.error > 0

    def test_non_finite_integrand(self):
        with pytest.raises(DomainError):
            integrate(lambda x: np.full_like(x, np.nan), 0.0, 1.0)

    def test_reversed_limits_rejected(self):
        with pytest.raises(DomainError):
            integrate(lambda x: x, 1.0, 0.0)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            QuadratureSpec(abs_tol=0.0)
        with pytest.raises(DomainError):
            QuadratureSpec(max_subdivisions=0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-3, 3), st.floats(0.1, 4))
    def test_gaussian_segments(self, lo, width):
        hi = lo + width
        val, _ = integrate(lambda x: np.exp(-(x**2) / 2), lo, hi)
        ref = math.sqrt(math.pi / 2) * (math.erf(hi / math.sqrt(2)) - math.erf(lo / math.sqrt(2)))
        assert val == pytest.approx(ref, rel=1e-10, abs=1e-13)


def mp_weber_q0(x, z):
    x, z = mp.mpf(x), mp.mpf(z)
    f = lambda t: t * mp.exp(-(t**2) / (4 * x)) * mp.besseli(0, t)
    return mp.exp(x) / (2 * x) * mp.quad(f, [0, min(z, 2 * x), z])


class TestIncompleteWeber:
    @pytest.mark.parametrize("x,z", [(0.5, 0.3), (0.5, 3.0), (2.0, 4.0), (8.0, 20.0), (30.0, 50.0)])
    def test_against_mpmath(self, x, z):
        expected = mp_weber_q0(x, z)
        assert incomplete_weber_q0(x, z) == pytest.approx(float(expected), rel=1e-10)
        assert incomplete_weber_q0_scaled(x, z) == pytest.approx(float(mp.exp(-2 * x) * expected), rel=1e-10)

    def test_full_range_limit(self):
        # the complete integral equals e^{2x}; the scaled form tends to 1
        assert incomplete_weber_q0_scaled(3.0, 200.0) == pytest.approx(1.0, rel=1e-12)

    def test_large_x_stays_finite(self):
        v = incomplete_weber_q0_scaled(5000.0, 10000.0)
        assert v == pytest.approx(0.5, abs=0.01)

    def test_zero_z(self):
        assert incomplete_weber_q0_scaled(1.0, 0.0) == 0.0

    @pytest.mark.parametrize("x,z", [(0.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, math.inf)])
    def test_domain(self, x, z):
        with pytest.raises(DomainError):
            incomplete_weber_q0_scaled(x, z)
