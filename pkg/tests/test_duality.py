"""Dual volatility transforms, analytic pairs, and pair verification."""

import warnings

import numpy as np
import pytest

from perpdual import (
    AdmissibilityError,
    AnalyticExampleParams,
    CallPut,
    ClampWarning,
    ClosedFormVol,
    ConfigError,
    ConstantVol,
    ExpMap,
    FDGrid,
    MarketParams,
    Payoff,
    PowerGamma,
    PowerMap,
    PowerPair,
    PsiDifference,
    analytic_pair_gamma,
    analytic_pair_psi,
    build_dual_pair,
    dual_vol_callput,
    dual_vol_for,
    exponent_a,
    exponent_b,
    inverse_dual_vol_callput,
    inverse_dual_vol_gamma,
    inverse_dual_vol_psi,
    solve_dual_constant_vol,
    verify_duality,
)

M = MarketParams(r=0.2, delta=0.1)
FIG_GAMMA = AnalyticExampleParams(a=1.5, b=5.0 / 9.0, c=1.0,
                                  family="gamma-power", gamma=0.75)
FIG_PSI = AnalyticExampleParams(a=1.5, b=5.0 / 9.0, c=1.0,
                                family="psi-power", gamma=4.0, alpha=0.97)


def interior_mask(knots, frac=0.2):
    lo, hi = float(knots[0]), float(knots[-1])
    width = np.log(hi / lo)
    return (knots >= lo * np.exp(frac * width)) \
        & (knots <= lo * np.exp((1.0 - frac) * width))


class TestCallPutDual:
    def test_constant_vol_is_self_dual(self):
        # the exponent relation a(sigma) + b(eta) = 1 pins a(eta) =
        # a(sigma), and a is strictly monotone, so eta must equal sigma
        for r, dl, s in [(0.2, 0.1, 0.3), (0.05, 0.02, 0.25), (0.3, 0.0, 0.4)]:
            m = MarketParams(r=r, delta=dl)
            eta = dual_vol_callput(ConstantVol(s), m, (0.2, 5.0), num=129)
            np.testing.assert_allclose(eta.values, s, rtol=1e-9)
            assert float(exponent_b(s, m)) == pytest.approx(
                1.0 - float(exponent_a(s, m)), rel=1e-14)

    def test_round_trip_with_varying_vol(self):
        fn = lambda x: 0.3 + 0.05 * np.tanh(np.log(np.asarray(x, float)) / 2.0)
        sig = ClosedFormVol(fn, bound_hint=0.36)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            pair = build_dual_pair(sig, CallPut(), M, (0.2, 5.0), num=257)
            back = inverse_dual_vol_callput(
                pair.eta, pair.y_star, M,
                (float(pair.y_star.knots[0]), float(pair.y_star.knots[-1])),
                num=257)
        mask = interior_mask(back.x)
        np.testing.assert_allclose(np.asarray(back.value(back.x[mask])),
                                   fn(back.x[mask]), rtol=1e-6)

    def test_pair_reciprocity(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            pair = build_dual_pair(ConstantVol(0.3), CallPut(), M,
                                   (0.2, 5.0), num=257)
        assert pair.reciprocity_residual() <= 1e-6


class TestConstantDualLevels:
    """The fixed-point route and the transform route must agree."""

    def test_gamma_family_level(self):
        pay = PowerGamma(gamma=0.75)
        nu, reason, resid = solve_dual_constant_vol(0.3, pay, M, given="sigma")
        assert reason == ""
        assert resid <= 1e-12
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            pair = build_dual_pair(ConstantVol(0.3), pay, M, (0.3, 4.0), num=129)
        np.testing.assert_allclose(np.asarray(pair.eta.values),
                                   nu.value(1.0), rtol=1e-8)

    def test_pair_family_level(self):
        pay = PowerPair(alpha=0.97, gamma=4.0, gamma_p=1.0)
        nu, reason, resid = solve_dual_constant_vol(0.3, pay, M, given="sigma")
        assert reason == ""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            pair = build_dual_pair(ConstantVol(0.3), pay, M, (0.3, 4.0), num=129)
        np.testing.assert_allclose(np.asarray(pair.eta.values),
                                   nu.value(1.0), rtol=1e-8)

    def test_eta_direction_inverts_sigma_direction(self):
        pay = PowerGamma(gamma=0.75)
        nu, _, _ = solve_dual_constant_vol(0.3, pay, M, given="sigma")
        back, _, _ = solve_dual_constant_vol(nu.value(1.0), pay, M, given="eta")
        assert back.value(1.0) == pytest.approx(0.3, rel=1e-12)

    def test_unattainable_regime_returns_none_with_reason(self):
        m = MarketParams(r=0.05, delta=0.25)
        nu, reason, resid = solve_dual_constant_vol(
            1.0, PowerGamma(gamma=0.5), m, given="sigma")
        assert nu is None
        assert "exponent" in reason
        assert np.isnan(resid)

    def test_rejects_unknown_direction(self):
        with pytest.raises(ConfigError):
            solve_dual_constant_vol(0.3, CallPut(), M, given="both")

    def test_callput_returns_input_level(self):
        nu, reason, resid = solve_dual_constant_vol(0.27, CallPut(), M)
        assert nu.value(1.0) == 0.27
        assert resid == 0.0


class TestGammaDual:
    def test_constant_vol_round_trip(self):
        pay = PowerGamma(gamma=0.75)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            pair = build_dual_pair(ConstantVol(0.3), pay, M, (0.2, 5.0), num=257)
            rt = inverse_dual_vol_gamma(
                pair.eta, pair.y_star, 0.75, M,
                (float(pair.y_star.knots[0]), float(pair.y_star.knots[-1])),
                num=257)
        mask = interior_mask(rt.vol.x)
        np.testing.assert_allclose(np.asarray(rt.vol.value(rt.vol.x[mask])),
                                   0.3, rtol=1e-7)
        names = [c.condition for c in rt.conditions]
        assert "uniqueness_applicability" in names
        assert all(c.min_margin > 0.0 for c in rt.conditions)

    def test_partial_violation_reported_not_raised(self):
        """A vol that drifts upward can push the transform's denominator
        through zero partway along the span.  The reporting entry point
        returns the valid run and lists the rest; the strict constructor
        refuses the whole span.
        """
        m = MarketParams(r=0.06, delta=0.15)
        ramp = ClosedFormVol(
            lambda x: 0.2 + 0.04 * np.tanh(np.log(np.asarray(x, float)) / 5.0),
            bound_hint=0.24)
        pay = PowerGamma(gamma=0.5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            res = dual_vol_for(ramp, pay, m, (0.1, 10.0), num=129)
        assert res.vol is not None
        assert res.violations.size == 76
        assert float(res.vol.x[-1]) < 0.66
        assert float(res.violations.min()) > 0.66
        worst = min(res.conditions, key=lambda c: c.min_margin)
        assert worst.condition == "sigma_tilde_denominator"
        assert worst.min_margin < 0.0
        with pytest.raises(AdmissibilityError):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ClampWarning)
                build_dual_pair(ramp, pay, m, (0.1, 10.0), num=129)

    def test_conditions_all_positive_when_admissible(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            res = dual_vol_for(ConstantVol(0.3), PowerGamma(gamma=0.75), M,
                               (0.2, 5.0), num=129)
        assert res.violations.size == 0
        assert all(c.min_margin > 0.0 for c in res.conditions)


class TestPsiDual:
    def test_constant_vol_round_trip(self):
        pay = PowerPair(alpha=0.97, gamma=4.0, gamma_p=1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            pair = build_dual_pair(ConstantVol(0.3), pay, M, (0.2, 5.0), num=257)
            rt = inverse_dual_vol_psi(
                pair.eta, pair.y_star, pay.psi_x, pay.psi_y, M,
                (float(pair.y_star.knots[0]), float(pair.y_star.knots[-1])),
                num=257)
        mask = interior_mask(rt.vol.x)
        np.testing.assert_allclose(np.asarray(rt.vol.value(rt.vol.x[mask])),
                                   0.3, rtol=1e-7)

    def test_inverse_refuses_exponential_x_map(self):
        p = PsiDifference(psi_x=ExpMap(rate=1.0), psi_y=PowerMap(1.0, 1.0))
        eta = ConstantVol(0.3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            pair = build_dual_pair(ConstantVol(0.3), CallPut(), M,
                                   (0.5, 2.0), num=65)
        with pytest.raises(AdmissibilityError):
            inverse_dual_vol_psi(eta, pair.y_star, p.psi_x, p.psi_y,
                                 M, (0.5, 2.0), num=65)


class PlainDifference(Payoff):
    """(y - x)^+ reimplemented outside the named families."""

    family = "plain_difference"

    def value(self, x, y):
        return CallPut().value(x, y)

    def dx(self, x, y):
        return CallPut().dx(x, y)

    def dy(self, x, y):
        return CallPut().dy(x, y)

    def dxx(self, x, y):
        return CallPut().dxx(x, y)

    dyy = dxx

    def dxy(self, x, y):
        return CallPut().dxy(x, y)

    def edge_x(self, y):
        return np.asarray(y, dtype=float) + 0.0

    def edge_y(self, x):
        return np.asarray(x, dtype=float) + 0.0

    def fit_ratio_x(self, x, y):
        return CallPut().fit_ratio_x(x, y)

    def fit_ratio_y(self, x, y):
        return CallPut().fit_ratio_y(x, y)

    def supermodular_margin(self, x, y):
        return CallPut().supermodular_margin(x, y)


def test_dual_vol_for_rejects_unknown_family():
    with pytest.raises(ConfigError, match="no dual transform"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            dual_vol_for(ConstantVol(0.3), PlainDifference(), M,
                         (0.5, 2.0), num=33)


class TestAnalyticPairs:
    def test_gamma_family_reciprocity_and_exact_match(self):
        pair = analytic_pair_gamma(FIG_GAMMA, M, (0.2, 5.0), num=513)
        assert pair.reciprocity_residual() <= 1e-9
        ys = np.geomspace(0.3, 4.0, 21)
        np.testing.assert_allclose(
            pair.x_star(ys), pair.exact["x_star"](ys), rtol=1e-9)
        assert np.all(np.asarray(pair.sigma.value(ys)) > 0.0)
        assert np.all(np.asarray(pair.eta.value(ys)) > 0.0)

    def test_psi_family_reciprocity(self):
        pair = analytic_pair_psi(FIG_PSI, M, (0.2, 5.0), num=513)
        assert pair.reciprocity_residual() <= 1e-9
        # y* is indexed by x, and its span is the image of x* under the
        # quartic root, much narrower than the y span
        lo, hi = pair.y_star.span
        xs = np.geomspace(lo * 1.05, hi * 0.95, 11)
        np.testing.assert_allclose(
            pair.y_star(xs), pair.exact["y_star"](xs), rtol=1e-9)

    def test_params_validation(self):
        with pytest.raises(ConfigError):
            AnalyticExampleParams(a=1.5, b=5 / 9, c=1.0, family="cubic",
                                  gamma=0.75)
        with pytest.raises(ConfigError):
            AnalyticExampleParams(a=1.5, b=5 / 9, c=1.0, family="psi-power",
                                  gamma=4.0)
        with pytest.raises(ConfigError):
            AnalyticExampleParams(a=1.5, b=5 / 9, c=1.0, family="gamma-power",
                                  gamma=1.5)

    def test_gamma_family_impossible_dividend_regime(self):
        # delta / r >= (2 - gamma) / (1 - gamma) leaves no admissible pair
        m = MarketParams(r=0.05, delta=0.3)
        with pytest.raises(AdmissibilityError):
            analytic_pair_gamma(FIG_GAMMA, m, (0.2, 5.0), num=65)


class TestVerifyDuality:
    def test_analytic_pair_passes_independent_pricing(self):
        pair = analytic_pair_gamma(FIG_GAMMA, M, (0.2, 5.0), num=513)
        p = PowerGamma(gamma=0.75)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            report = verify_duality(pair, p, M)
        assert report.grid_shape == (20, 20)
        assert report.reciprocity_max <= 1e-6
        assert report.perpetual_gap_max <= 1e-6
        assert report.fd_rows == ()
        assert "reciprocity" in report.summary()

    def test_finite_maturity_rows(self):
        pair = analytic_pair_gamma(FIG_GAMMA, M, (0.2, 5.0), num=257)
        p = PowerGamma(gamma=0.75)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            report = verify_duality(
                pair, p, M, maturities=[0.5, 2.0], fd_point=(1.0, 0.99),
                fd_grid=FDGrid(num_nodes=301, num_steps=100))
        assert len(report.fd_rows) == 2
        for T, P, c, gap in report.fd_rows:
            assert P > 0.0 and c > 0.0
            assert gap == pytest.approx(abs(P - c))
        # longer maturity sits closer to the common perpetual value
        assert report.fd_rows[1][3] <= report.fd_rows[0][3] * 5.0
