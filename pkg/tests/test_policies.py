import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secrecy_fading.config import SolverConfig
from secrecy_fading.fading import RayleighFadingPair, pdf
from secrecy_fading.numerics import Tolerance, integrate_1d, maximize_scalar
from secrecy_fading.policies import (
    ConstantPolicy,
    PowerConstraint,
    constant_rate_marginal,
    eaves_moment,
    full_csi_power,
    main_csi_condition,
    main_csi_cutoff,
    main_csi_marginal,
    main_csi_power,
    make_onoff,
    optimize_onoff_threshold,
    solve_constant_rate,
    solve_full_csi,
    solve_main_csi,
)
from secrecy_fading.rates import main_csi_rate, onoff_rate_closed_form

SYM = RayleighFadingPair(1.0, 1.0)
ASYM = RayleighFadingPair(1.0, 2.0)

gains = st.floats(min_value=0.0, max_value=50.0)
lams = st.floats(min_value=1e-3, max_value=10.0)


def _scan_max(objective, p_max):
    # maximize over s = log(1 + P) so small and large powers are both resolved
    s, v = maximize_scalar(lambda s: objective(math.expm1(s)), 0.0, math.log1p(p_max),
                           Tolerance(rel=1e-14, abs=1e-15, max_iter=500), grid_points=2048)
    return math.expm1(s), v


class TestFullCsiPower:
    def test_zero_when_eavesdropper_stronger(self):
        assert full_csi_power(1.0, 2.0, 0.1) == 0.0
        assert full_csi_power(1.0, 1.0, 0.1) == 0.0

    def test_zero_at_or_below_threshold_gap(self):
        assert full_csi_power(1.5, 1.0, 0.5) == 0.0
        assert full_csi_power(1.5 + 1e-9, 1.0, 0.5) > 0.0

    def test_no_eavesdropper_is_water_filling(self):
        for hm, lam in [(2.0, 0.5), (10.0, 0.01), (0.7, 0.2)]:
            assert full_csi_power(hm, 0.0, lam) == pytest.approx(1.0 / lam - 1.0 / hm, rel=1e-14)

    @given(gains, gains, lams)
    @settings(max_examples=300, deadline=None)
    def test_satisfies_stationarity(self, hm, he, lam):
        p = full_csi_power(hm, he, lam)
        assert p >= 0.0
        if p > 0:
            residual = hm / (1 + hm * p) - he / (1 + he * p) - lam
            assert abs(residual) <= 1e-10 * max(1.0, hm)

    @given(gains, gains, lams, st.floats(min_value=1.01, max_value=10.0))
    @settings(max_examples=200, deadline=None)
    def test_decreasing_in_lambda(self, hm, he, lam, factor):
        assert full_csi_power(hm, he, lam * factor) <= full_csi_power(hm, he, lam) + 1e-12

    @given(gains, gains, lams, st.floats(min_value=0.0, max_value=5.0))
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_gains(self, hm, he, lam, dh):
        base = full_csi_power(hm, he, lam)
        assert full_csi_power(hm + dh, he, lam) >= base - 1e-9 * (1 + base)
        assert full_csi_power(hm, he + dh, lam) <= base + 1e-9 * (1 + base)

    def test_vectorized(self):
        hm = np.array([0.5, 2.0, 3.0])
        he = np.array([1.0, 0.5, 0.0])
        out = full_csi_power(hm, he, 0.2)
        assert out.shape == (3,)
        assert out[0] == 0.0 and out[1] > 0 and out[2] > out[1]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            full_csi_power(1.0, 0.5, 0.0)
        with pytest.raises(ValueError):
            full_csi_power(-1.0, 0.5, 0.1)


class TestSolveFullCsi:
    @pytest.mark.parametrize("model", [SYM, ASYM])
    @pytest.mark.parametrize("p_bar", [0.01, 1.0, 1e3])
    def test_constraint_met(self, cfg, model, p_bar):
        pol = solve_full_csi(model, PowerConstraint(p_bar), cfg)
        assert pol.realized_power == pytest.approx(p_bar, rel=1e-5)

    def test_lambda_decreases_with_power(self, cfg):
        lams = [solve_full_csi(SYM, PowerConstraint(p), cfg).lam for p in (0.1, 1.0, 10.0, 100.0)]
        assert all(a > b for a, b in zip(lams, lams[1:]))

    def test_realized_power_matches_monte_carlo(self, cfg):
        pol = solve_full_csi(ASYM, PowerConstraint(2.0), cfg)
        rng = np.random.default_rng(3)
        hm, he = rng.exponential(1.0, 10**6), rng.exponential(2.0, 10**6)
        p = pol.power(hm, he)
        assert abs(p.mean() - 2.0) <= 4 * p.std() / 1e3

    def test_rejects_non_positive_power(self):
        with pytest.raises(ValueError):
            PowerConstraint(0.0)


class TestMainCsi:
    def test_eaves_moment_matches_quadrature(self):
        for P, upper, ge in [(0.01, 3.0, 1.0), (1.0, 2.0, 2.0), (1e4, 5.0, 1.0), (1e-6, 0.5, 0.5)]:
            ref = integrate_1d(lambda t: t * pdf(t, ge) / (1 + t * P), 0.0, upper,
                               Tolerance(rel=1e-13, abs=1e-18, max_iter=500))
            assert float(eaves_moment(P, upper, ge)) == pytest.approx(ref, rel=1e-11)

    @pytest.mark.parametrize("model", [SYM, ASYM])
    def test_special_function_condition_equals_marginal(self, model):
        P = np.array([0.05, 0.3, 1.0, 4.0, 30.0])
        for h in (0.5, 1.5, 4.0):
            a = main_csi_marginal(P, h, 0.2, model)
            b = main_csi_condition(P, h, 0.2, model)
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_marginal_matches_derivative_of_objective(self):
        h, lam, P, dP = 2.0, 0.3, 0.8, 1e-5

        def objective(p):
            inner = integrate_1d(lambda t: (math.log1p(h * p) - np.log1p(t * p)) * pdf(t, 1.0), 0.0, h,
                                 Tolerance(rel=1e-14, abs=1e-18, max_iter=500))
            return inner - lam * p

        slope = (objective(P + dP) - objective(P - dP)) / (2 * dP)
        assert float(main_csi_marginal(P, h, lam, SYM)) == pytest.approx(slope, rel=1e-6)

    def test_cutoff_is_where_zero_power_slope_equals_lambda(self):
        for model in (SYM, ASYM):
            lam = 0.37
            c = main_csi_cutoff(lam, model)
            ge = model.gamma_e
            assert c - ge * (-math.expm1(-c / ge)) == pytest.approx(lam, rel=1e-12)

    @pytest.mark.parametrize("h", [0.8, 1.5, 3.0, 7.0])
    def test_per_state_power_is_brute_force_optimum(self, h):
        lam = 0.25

        def objective(p):
            inner = integrate_1d(lambda t: (math.log1p(h * p) - np.log1p(t * p)) * pdf(t, 1.0), 0.0, h,
                                 Tolerance(rel=1e-13, abs=1e-16, max_iter=500))
            return inner - lam * p

        brute, _ = _scan_max(objective, 1e3)
        assert main_csi_power(h, lam, SYM) == pytest.approx(brute, rel=1e-4, abs=1e-7)

    @pytest.mark.parametrize("model, p_bar", [(SYM, 1.0), (ASYM, 10.0), (SYM, 0.1)])
    def test_policy_table_matches_pointwise_solution(self, cfg, model, p_bar):
        pol = solve_main_csi(model, PowerConstraint(p_bar), cfg)
        for h in np.linspace(pol.cutoff * 1.01 + 1e-3, 8.0, 9):
            assert pol.power(h) == pytest.approx(main_csi_power(h, pol.lam, model), rel=1e-5, abs=1e-9)
        assert pol.power(pol.cutoff * 0.99) == 0.0

    @pytest.mark.parametrize("model", [SYM, ASYM])
    @pytest.mark.parametrize("p_bar", [0.1, 1.0, 100.0])
    def test_constraint_met_and_monotone(self, cfg, model, p_bar):
        pol = solve_main_csi(model, PowerConstraint(p_bar), cfg)
        assert pol.realized_power == pytest.approx(p_bar, rel=1e-5)
        assert pol.diagnostics["monotone_in_gain"]

    def test_grid_refinement_changes_rate_little(self):
        coarse = SolverConfig(grid_points=256)
        fine = SolverConfig(grid_points=1024)
        for model, p_bar in [(SYM, 1.0), (ASYM, 10.0)]:
            c = PowerConstraint(p_bar)
            a = main_csi_rate(solve_main_csi(model, c, coarse), coarse)
            b = main_csi_rate(solve_main_csi(model, c, fine), fine)
            assert a == pytest.approx(b, rel=1e-4)


class TestOnOff:
    def test_threshold_zero_uses_average_power(self):
        pol = make_onoff(SYM, PowerConstraint(1.0), 0.0)
        assert pol.p_const == 1.0 and pol.realized_power == 1.0

    def test_power_meets_constraint_for_any_threshold(self):
        for tau in (0.0, 0.5, 3.0):
            pol = make_onoff(ASYM, PowerConstraint(2.0), tau)
            assert pol.realized_power == pytest.approx(2.0, rel=1e-14)
            assert pol.power(tau * 0.99) == 0.0 and pol.power(tau + 0.01) == pol.p_const

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            make_onoff(SYM, PowerConstraint(1.0), -0.1)

    @pytest.mark.parametrize("model, p_bar", [(SYM, 1.0), (ASYM, 10.0), (SYM, 0.1)])
    def test_optimal_threshold_beats_grid(self, cfg, model, p_bar):
        tau, rate = optimize_onoff_threshold(model, PowerConstraint(p_bar), cfg)
        grid = np.linspace(0.0, 10.0, 2001)
        best = max(onoff_rate_closed_form(model, PowerConstraint(p_bar), t) for t in grid)
        assert rate >= best - 1e-12
        assert rate == pytest.approx(onoff_rate_closed_form(model, PowerConstraint(p_bar), tau), rel=1e-15)


class TestConstantRate:
    @pytest.mark.parametrize("model, p_bar", [(SYM, 1.0), (ASYM, 10.0), (SYM, 100.0)])
    def test_converges_and_meets_constraint(self, cfg, model, p_bar):
        pol = solve_constant_rate(model, PowerConstraint(p_bar), cfg)
        assert pol.converged
        assert pol.kkt_residual <= 1e-6
        assert pol.realized_power == pytest.approx(p_bar, rel=1e-5)

    def test_states_take_global_lagrangian_maximizer(self, cfg):
        pol = solve_constant_rate(SYM, PowerConstraint(1.0), cfg)

        def lagrangian(h, p):
            mean_log = integrate_1d(lambda t: np.log1p(t * p) * pdf(t, 1.0), 0.0, 60.0,
                                    Tolerance(rel=1e-13, abs=1e-16, max_iter=500))
            return math.log1p(h * p) - mean_log - pol.lam * p

        for h in (pol.cutoff * 1.05, 1.5, 3.0, 6.0):
            brute, best = _scan_max(lambda p: lagrangian(h, p), 1e3)
            assert lagrangian(h, pol.power(h)) >= best - 1e-9
            assert pol.power(h) == pytest.approx(brute, rel=1e-4)
        assert pol.power(pol.cutoff * 0.95) == 0.0

    def test_marginal_sign_change_at_policy(self, cfg):
        pol = solve_constant_rate(ASYM, PowerConstraint(10.0), cfg)
        h = 4.0
        p = pol.power(h)
        assert abs(float(constant_rate_marginal(p, h, pol.lam, ASYM))) < 1e-8


def test_constant_policy_is_flat():
    pol = ConstantPolicy(2.5)
    np.testing.assert_array_equal(pol.power(np.array([0.0, 1.0, 9.0])), 2.5)
    assert pol.power(3.0) == 2.5
