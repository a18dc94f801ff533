import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from secrecy_fading.numerics import (
    EULER_GAMMA,
    BracketError,
    DomainError,
    IntegrationError,
    Tolerance,
    ein,
    exp_integral_e1,
    exp_scaled_e1,
    find_root_bracketed,
    find_roots_vectorized,
    graded_gauss_legendre,
    integrate_1d,
    integrate_2d,
    maximize_scalar,
)

positive = st.floats(min_value=1e-10, max_value=600.0, allow_nan=False)


class TestExponentialIntegral:
    @pytest.mark.parametrize("x", [1e-12, 1e-6, 0.01, 0.5, 1.0, 1.999, 2.0, 2.001, 5.0, 30.0, 200.0, 700.0])
    def test_matches_arbitrary_precision(self, x):
        with mpmath.workdps(40):
            expected = float(mpmath.e1(x))
        assert exp_integral_e1(x) == pytest.approx(expected, rel=1e-13)

    def test_known_value_at_one(self):
        assert exp_integral_e1(1.0) == pytest.approx(0.21938393439552027368, rel=1e-15)

    def test_small_argument_series(self):
        x = 1e-6
        assert exp_integral_e1(x) == pytest.approx(-EULER_GAMMA - math.log(x) + x - x * x / 4, rel=1e-14)

    def test_leading_logarithm_only_to_order_x(self):
        # E1(x) + gamma + ln x = x + O(x^2): the log approximation is off by about x
        x = 1e-6
        assert exp_integral_e1(x) - (-EULER_GAMMA - math.log(x)) == pytest.approx(x, rel=1e-5)

    def test_agrees_with_scipy_on_log_grid(self):
        x = np.logspace(-8, math.log10(700.0), 2000)
        np.testing.assert_allclose(exp_integral_e1(x), special.exp1(x), rtol=5e-14)

    def test_defining_integral(self):
        # E1(x) = int_1^inf exp(-x t)/t dt, evaluated by adaptive quadrature
        for x in (0.3, 1.0, 4.0):
            val = integrate_1d(lambda t: np.exp(-x * t) / t, 1.0, 1.0 + 60.0 / x,
                               Tolerance(rel=1e-13, abs=1e-16, max_iter=500))
            assert exp_integral_e1(x) == pytest.approx(val, rel=1e-11)

    def test_underflows_to_zero(self):
        assert exp_integral_e1(800.0) == 0.0
        assert exp_scaled_e1(800.0) == pytest.approx(1.0 / 800.0, rel=2e-3)

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(DomainError):
            exp_integral_e1(bad)
        with pytest.raises(DomainError):
            exp_scaled_e1(bad)

    def test_array_shape_and_scalar_type(self):
        assert isinstance(exp_integral_e1(2.0), float)
        assert exp_integral_e1(np.ones((3, 4))).shape == (3, 4)

    @given(positive)
    @settings(max_examples=200, deadline=None)
    def test_bracketed_by_elementary_bounds(self, x):
        # 0.5 e^-x ln(1 + 2/x) < E1(x) < e^-x ln(1 + 1/x)
        s = exp_scaled_e1(x)
        assert 0.5 * math.log1p(2.0 / x) < s * (1 + 1e-13)
        assert s < math.log1p(1.0 / x) * (1 + 1e-13)

    @given(st.floats(min_value=1e-8, max_value=700.0))
    @settings(max_examples=300, deadline=None)
    def test_rational_enclosure(self, x):
        # exp(-x)/(x+1) < E1(x) < exp(-x)/x, checked in scaled form to avoid underflow
        s = exp_scaled_e1(x)
        assert 1.0 / (x + 1.0) < s < 1.0 / x

    @given(positive, st.floats(min_value=1e-6, max_value=1.0))
    @settings(max_examples=200, deadline=None)
    def test_strictly_decreasing(self, x, dx):
        assert exp_scaled_e1(x + dx) <= exp_scaled_e1(x) * (1 + 1e-14)

    @pytest.mark.parametrize("x", [0.1, 1.0, 2.0, 3.0, 10.0])
    def test_derivative_is_minus_exp_over_x(self, x):
        h = 1e-5 * x
        slope = (exp_integral_e1(x + h) - exp_integral_e1(x - h)) / (2 * h)
        assert slope == pytest.approx(-math.exp(-x) / x, rel=1e-7)

    def test_continuous_across_method_switch(self):
        left, right = exp_integral_e1(2.0 - 1e-12), exp_integral_e1(2.0 + 1e-12)
        assert abs(left - right) < 1e-12

    @pytest.mark.parametrize("x", [1e-8, 0.5, 1.0, 3.0, 25.0, 300.0])
    def test_ein_identity(self, x):
        # Ein(x) = E1(x) + gamma + ln x
        with mpmath.workdps(40):
            expected = float(mpmath.e1(x) + mpmath.euler + mpmath.log(x))
        assert ein(x) == pytest.approx(expected, rel=1e-12)

    def test_ein_at_zero(self):
        assert ein(0.0) == 0.0
        with pytest.raises(DomainError):
            ein(-1.0)


class TestIntegrate1d:
    def test_log_endpoint_singularity(self):
        assert integrate_1d(np.log, 0.0, 1.0) == pytest.approx(-1.0, rel=1e-9)

    def test_polynomial_exact(self):
        assert integrate_1d(lambda x: 3 * x**2, 0.0, 2.0) == pytest.approx(8.0, rel=1e-14)

    def test_breakpoint_kink(self):
        val = integrate_1d(lambda x: np.abs(x - 0.3), 0.0, 1.0, points=[0.3])
        assert val == pytest.approx(0.045 + 0.245, rel=1e-13)

    def test_exponential_tail(self):
        val = integrate_1d(lambda x: np.exp(-x), 0.0, 50.0)
        assert val == pytest.approx(-math.expm1(-50.0), rel=1e-12)

    def test_requires_ordered_limits(self):
        with pytest.raises(ValueError):
            integrate_1d(lambda x: x, 1.0, 0.0)
        with pytest.raises(ValueError):
            integrate_1d(lambda x: x, 1.0, 1.0)

    def test_constant(self):
        assert integrate_1d(np.ones_like, 0.0, 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_exponential_integral_consistency(self):
        val = integrate_1d(lambda t: np.exp(-t) / t, 1.0, 50.0)
        assert abs(val - exp_integral_e1(1.0)) < 1e-10

    def test_error_estimate_returned(self):
        val, err = integrate_1d(np.cos, 0.0, 1.0, full_output=True)
        assert abs(val - math.sin(1.0)) <= max(err, 1e-15)

    def test_budget_exhaustion_raises(self):
        with pytest.raises(IntegrationError) as info:
            integrate_1d(lambda x: np.sin(1.0 / x), 1e-6, 1.0, Tolerance(rel=1e-14, abs=0.0, max_iter=5))
        assert math.isfinite(info.value.best)


class TestIntegrate2d:
    def test_triangle(self):
        # int_0^1 int_0^x (x + y) dy dx = 1/2
        val = integrate_2d(lambda x, y: x + y, 0.0, 1.0, lambda x: 0.0, lambda x: x)
        assert val == pytest.approx(0.5, rel=1e-12)

    def test_exponential_wedge_probability(self):
        # P(X > Y) for i.i.d. unit exponentials is 1/2
        val = integrate_2d(lambda x, y: np.exp(-x - y), 0.0, 60.0, lambda x: 0.0, lambda x: x)
        assert val == pytest.approx(0.5, rel=1e-10)


class TestGradedRule:
    def test_integrates_exponential(self):
        x, w = graded_gauss_legendre(0.0, 40.0, 1e-3, 16, max_width=2.0)
        assert np.sum(w * np.exp(-x)) == pytest.approx(-math.expm1(-40.0), rel=1e-13)
        assert np.all(np.diff(x) > 0) and x[0] > 0 and x[-1] < 40.0

    def test_resolves_sharp_feature_near_origin(self):
        x, w = graded_gauss_legendre(0.0, 10.0, 1e-4, 16, max_width=1.0)
        val = np.sum(w * np.sqrt(x))
        assert val == pytest.approx(2.0 / 3.0 * 10.0**1.5, rel=1e-8)


class TestRootFinding:
    def test_brent_ln2(self):
        root = find_root_bracketed(lambda x: math.exp(x) - 2.0, 0.0, 1.0, Tolerance(rel=1e-15, abs=0.0))
        assert root == pytest.approx(math.log(2.0), rel=1e-14)

    def test_brent_linear_example(self):
        assert find_root_bracketed(lambda x: x - 2.0, 0.0, 5.0) == pytest.approx(2.0, rel=1e-12)

    def test_brent_exponential_example(self):
        root = find_root_bracketed(lambda x: math.exp(-x) - 0.5, 0.0, 10.0, Tolerance(rel=1e-14))
        assert root == pytest.approx(math.log(2.0), rel=1e-12)

    def test_brent_needs_sign_change(self):
        with pytest.raises(BracketError):
            find_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)

    def test_brent_endpoint_root(self):
        assert find_root_bracketed(lambda x: x - 1.0, 1.0, 3.0) == 1.0

    def test_vectorized_roots(self):
        targets = np.linspace(0.1, 10.0, 50)
        roots = find_roots_vectorized(lambda x: x**3 - targets, np.zeros(50), np.full(50, 3.0))
        np.testing.assert_allclose(roots, np.cbrt(targets), rtol=1e-12)

    @given(st.floats(min_value=-50, max_value=50), st.floats(min_value=0.01, max_value=10))
    @settings(max_examples=100, deadline=None)
    def test_brent_linear(self, root, slope):
        f = lambda x: slope * (x - root)  # noqa: E731
        found = find_root_bracketed(f, root - 7.0, root + 3.0, Tolerance(rel=1e-13, abs=0.0))
        assert found == pytest.approx(root, abs=1e-10)


class TestMaximize:
    def test_sine(self):
        x, v = maximize_scalar(math.sin, 0.0, 3.0, Tolerance(rel=1e-12, abs=1e-14))
        assert x == pytest.approx(math.pi / 2, abs=1e-6)
        assert v == pytest.approx(1.0, abs=1e-12)

    def test_parabola(self):
        x, v = maximize_scalar(lambda t: -(t - 1.0) ** 2, 0.0, 3.0, Tolerance(rel=1e-12, abs=1e-14))
        assert x == pytest.approx(1.0, abs=1e-6)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_constant_ties_go_to_lower_end(self):
        assert maximize_scalar(lambda t: 4.0, -2.0, 5.0) == (-2.0, 4.0)

    def test_boundary_maximum(self):
        x, _ = maximize_scalar(lambda t: -t, 0.0, 1.0)
        assert x == 0.0

    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            maximize_scalar(math.sin, 1.0, 1.0)

    def test_rejects_nonfinite_objective(self):
        with pytest.raises(ValueError):
            maximize_scalar(lambda t: float("nan"), 0.0, 1.0)


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerance(rel=0.0)
    with pytest.raises(ValueError):
        Tolerance(abs=-1.0)
    with pytest.raises(ValueError):
        Tolerance(max_iter=0)
