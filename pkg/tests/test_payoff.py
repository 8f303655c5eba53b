"""Payoff families: derivatives, edges, fit ratios, validation."""

import numpy as np
import pytest

from perpdual import (
    AdmissibilityError,
    AffinePowerMap,
    CallPut,
    ExpMap,
    PowerGamma,
    PowerMap,
    PowerPair,
    PsiDifference,
    admissibility_report,
)


def fd_grad(p, x, y, h=1e-6):
    """Central differences of phi in both variables, relative step."""
    hx, hy = h * x, h * y
    dx = (p.value(x + hx, y) - p.value(x - hx, y)) / (2 * hx)
    dy = (p.value(x, y + hy) - p.value(x, y - hy)) / (2 * hy)
    return dx, dy


def fd_second(p, x, y, h=1e-4):
    hx, hy = h * x, h * y
    dxx = (p.value(x + hx, y) - 2 * p.value(x, y) + p.value(x - hx, y)) / hx**2
    dyy = (p.value(x, y + hy) - 2 * p.value(x, y) + p.value(x, y - hy)) / hy**2
    dxy = (p.value(x + hx, y + hy) - p.value(x + hx, y - hy)
           - p.value(x - hx, y + hy) + p.value(x - hx, y - hy)) / (4 * hx * hy)
    return dxx, dyy, dxy


ALL_PAYOFFS = [
    CallPut(),
    PowerGamma(gamma=0.75),
    PowerGamma(gamma=0.4),
    PowerPair(alpha=0.97, gamma=4.0, gamma_p=1.0),
    PowerPair(alpha=1.0, gamma=2.0, gamma_p=0.5),
    PsiDifference(psi_x=PowerMap(1.0, 3.0), psi_y=AffinePowerMap(2.0, 0.5, 0.8)),
]


@pytest.mark.parametrize("p", ALL_PAYOFFS, ids=lambda p: p.family + str(id(p))[-3:])
class TestDerivativeConsistency:
    def test_gradient_matches_finite_differences(self, p):
        rng = np.random.default_rng(7)
        for _ in range(40):
            y = float(rng.uniform(0.5, 3.0))
            edge = float(p.edge_x(y))
            x = edge * float(rng.uniform(0.3, 0.9))
            dx_fd, dy_fd = fd_grad(p, x, y)
            scale = abs(p.dx(x, y)) + abs(p.dy(x, y)) + 1.0
            assert abs(p.dx(x, y) - dx_fd) <= 2e-5 * scale
            assert abs(p.dy(x, y) - dy_fd) <= 2e-5 * scale

    def test_second_derivatives_match_finite_differences(self, p):
        rng = np.random.default_rng(11)
        for _ in range(25):
            y = float(rng.uniform(0.8, 2.0))
            x = float(p.edge_x(y)) * float(rng.uniform(0.4, 0.8))
            dxx_fd, dyy_fd, dxy_fd = fd_second(p, x, y)
            scale = abs(dxx_fd) + abs(dyy_fd) + abs(dxy_fd) + 1.0
            assert abs(p.dxx(x, y) - dxx_fd) <= 5e-5 * scale
            assert abs(p.dyy(x, y) - dyy_fd) <= 5e-5 * scale
            assert abs(p.dxy(x, y) - dxy_fd) <= 5e-5 * scale

    def test_value_vanishes_outside_support(self, p):
        ys = np.geomspace(0.3, 4.0, 13)
        edges = np.asarray(p.edge_x(ys), dtype=float)
        vals = p.value(edges * 1.05, ys)
        assert np.all(np.asarray(vals) == 0.0)

    def test_edge_functions_invert_each_other(self, p):
        ys = np.geomspace(0.5, 2.5, 9)
        xs = np.asarray(p.edge_x(ys), dtype=float)
        back = np.asarray(p.edge_y(xs), dtype=float)
        np.testing.assert_allclose(back, ys, rtol=1e-10)

    def test_fit_ratios_are_value_over_derivative(self, p):
        # fit_ratio_x must equal phi / phi_x even where the quotient is
        # delicate; it exists as a separate method precisely because the
        # smooth-fit root finder needs the cancellation-free form
        rng = np.random.default_rng(3)
        for _ in range(20):
            y = float(rng.uniform(0.6, 2.0))
            x = float(p.edge_x(y)) * float(rng.uniform(0.3, 0.95))
            v = float(p.value(x, y))
            rx = v / float(p.dx(x, y))
            ry = v / float(p.dy(x, y))
            assert abs(float(p.fit_ratio_x(x, y)) - rx) <= 1e-10 * (1 + abs(rx))
            assert abs(float(p.fit_ratio_y(x, y)) - ry) <= 1e-10 * (1 + abs(ry))

    def test_supermodular_margin_positive_on_support(self, p):
        rep = admissibility_report(p, window=(0.2, 5.0), n=31)
        assert rep["min_supermodular_margin"] > 0.0
        assert rep["max_dx"] <= 0.0
        assert rep["min_dy"] >= 0.0


class TestCallPut:
    def test_value_is_positive_part(self):
        p = CallPut()
        assert p.value(1.0, 3.0) == 2.0
        assert p.value(3.0, 1.0) == 0.0
        assert p.dx(1.0, 3.0) == -1.0
        assert p.dy(1.0, 3.0) == 1.0

    def test_curvatures_vanish(self):
        p = CallPut()
        assert float(p.dxx(1.0, 2.0)) == 0.0
        assert float(p.dyy(1.0, 2.0)) == 0.0


class TestPowerGamma:
    def test_rejects_gamma_outside_unit_interval(self):
        with pytest.raises(AdmissibilityError):
            PowerGamma(gamma=1.5)
        with pytest.raises(AdmissibilityError):
            PowerGamma(gamma=0.0)

    def test_gamma_one_reduces_to_callput(self):
        p1, p0 = PowerGamma(gamma=1.0), CallPut()
        xs = np.linspace(0.2, 0.9, 7)
        np.testing.assert_allclose(p1.value(xs, 1.0), p0.value(xs, 1.0))

    def test_concavity_in_each_variable(self):
        p = PowerGamma(gamma=0.75)
        assert float(p.dxx(0.5, 1.5)) < 0.0
        assert float(p.dyy(0.5, 1.5)) < 0.0
        assert float(p.dxy(0.5, 1.5)) > 0.0


class TestPowerPair:
    def test_rejects_bad_exponents(self):
        with pytest.raises(AdmissibilityError):
            PowerPair(alpha=1.0, gamma=0.5, gamma_p=1.0)
        with pytest.raises(AdmissibilityError):
            PowerPair(alpha=1.0, gamma=2.0, gamma_p=1.5)
        with pytest.raises(AdmissibilityError):
            PowerPair(alpha=-1.0, gamma=2.0, gamma_p=1.0)

    def test_edge_scales_with_alpha(self):
        p = PowerPair(alpha=0.97, gamma=4.0, gamma_p=1.0)
        y = 2.0
        assert float(p.edge_x(y)) == pytest.approx((0.97 * y) ** 0.25, rel=1e-14)

    def test_psi_descriptors_reproduce_value(self):
        p = PowerPair(alpha=0.97, gamma=4.0, gamma_p=1.0)
        x, y = 0.8, 1.7
        v = p.psi_y.value(y) - p.psi_x.value(x)
        assert float(p.value(x, y)) == pytest.approx(v, rel=1e-14)


class TestPsiDifference:
    def test_requires_convex_x_side(self):
        with pytest.raises(AdmissibilityError):
            PsiDifference(psi_x=PowerMap(1.0, 0.5), psi_y=PowerMap(1.0, 0.5))

    def test_requires_concave_y_side(self):
        with pytest.raises(AdmissibilityError):
            PsiDifference(psi_x=PowerMap(1.0, 2.0), psi_y=PowerMap(1.0, 2.0))

    def test_exp_map_allowed_on_x_side(self):
        p = PsiDifference(psi_x=ExpMap(rate=1.0), psi_y=PowerMap(1.0, 1.0))
        assert float(p.value(np.log(2.0), 3.0)) == pytest.approx(2.0, rel=1e-12)


class TestMaps:
    @pytest.mark.parametrize("m", [
        PowerMap(1.0, 3.0),
        PowerMap(0.97, 1.0),
        AffinePowerMap(2.0, 0.5, 0.8),
        AffinePowerMap(1.0, 1.0, 2.0),
        ExpMap(rate=0.7),
    ])
    def test_inverse_round_trip(self, m):
        us = np.geomspace(0.05, 20.0, 17)
        np.testing.assert_allclose(m.inverse(m.value(us)), us, rtol=1e-12)

    @pytest.mark.parametrize("m", [
        PowerMap(1.0, 3.0),
        AffinePowerMap(2.0, 0.5, 0.8),
        ExpMap(rate=0.7),
    ])
    def test_derivatives_match_finite_differences(self, m):
        us = np.geomspace(0.1, 5.0, 11)
        h = 1e-6
        d_fd = (m.value(us + h) - m.value(us - h)) / (2 * h)
        np.testing.assert_allclose(m.deriv(us), d_fd, rtol=1e-7, atol=1e-9)
        d2_fd = (m.deriv(us + h) - m.deriv(us - h)) / (2 * h)
        np.testing.assert_allclose(m.deriv2(us), d2_fd, rtol=1e-6, atol=1e-8)

    def test_convexity_flags(self):
        assert PowerMap(1.0, 2.0).is_convex
        assert not PowerMap(1.0, 2.0).is_concave
        assert PowerMap(1.0, 0.5).is_concave
        assert PowerMap(1.0, 1.0).is_convex and PowerMap(1.0, 1.0).is_concave
        assert ExpMap(1.0).is_convex and not ExpMap(1.0).is_concave

    def test_scaling_lower_bound_classification(self):
        # exp grows too fast for psi(alpha u) >= C psi(u); powers do not
        assert PowerMap(1.0, 4.0).scaling_lower_bound
        assert AffinePowerMap(1.0, 0.3, 2.0).scaling_lower_bound
        assert not ExpMap(1.0).scaling_lower_bound

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(AdmissibilityError):
            PowerMap(0.0, 1.0)
        with pytest.raises(AdmissibilityError):
            ExpMap(rate=-1.0)


def test_admissibility_report_requires_support_overlap():
    # 0.5 y < x^4 throughout [1, 1.2]^2, so the support misses the window
    p = PowerPair(alpha=0.5, gamma=4.0, gamma_p=1.0)
    with pytest.raises(AdmissibilityError):
        admissibility_report(p, window=(1.0, 1.2), n=5)
