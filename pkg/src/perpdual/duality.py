"""Dual volatility transforms and reciprocal boundary pairs.

For a payoff nondecreasing in the strike-like variable y, the put-style
price under sigma and the call-style price under a second volatility
eta agree for all (x, y) exactly when the two exercise boundaries are
increasing reciprocal bijections.  The transforms below produce the
eta that pairs with a given sigma (and back) for the three payoff
families with explicit formulas, check the side conditions pointwise,
and never extrapolate across a violated condition: where a condition
fails there is no dual, and the violation set is returned instead.

Closed-form pair factories for the two analytic families are included,
along with the constant-vol exponent relations and a verification
driver that compares perpetual and finite-maturity prices from the two
independent pricing routes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .boundary import BoundaryCurve, call_boundary_curve, put_boundary_curve
from .errors import AdmissibilityError, ConfigError, NumericalError
from .fundamental import (exponent_a, exponent_b, solve_log_derivative_f,
                          solve_log_derivative_g)
from .market import MarketParams
from .payoff import CallPut, Payoff, PowerGamma, PowerPair, PsiDifference
from .pricing import (FDGrid, finite_maturity_curve, perpetual_call_price,
                      perpetual_put_price)
from .validation import check_positive
from .volatility import (ClampWarning, ClosedFormVol, ConstantVol,
                         TabulatedVol, VolCurve)

NUM_KNOTS = 1025
WINDOW_MARGIN = 100.0
RECIPROCITY_TOL = 1e-6


@dataclass(frozen=True)
class ConditionMargin:
    """Minimum margin of one positivity condition over a span."""

    condition: str
    min_margin: float
    location: float


@dataclass(frozen=True)
class DualVolResult:
    """A dual volatility curve plus its condition report.

    ``vol`` covers the longest contiguous run of knots on which every
    condition holds (None when that run is shorter than four knots);
    ``violations`` lists the knots excluded by a failed condition.
    """

    vol: TabulatedVol | None
    conditions: tuple[ConditionMargin, ...]
    violations: np.ndarray


@dataclass(frozen=True)
class DualPair:
    sigma: VolCurve
    eta: VolCurve
    x_star: BoundaryCurve
    y_star: BoundaryCurve
    condition_report: tuple[ConditionMargin, ...]
    exact: dict | None = None

    def reciprocity_residual(self, num: int = 129) -> float:
        ys = np.geomspace(*self.x_star.span, num)
        back = np.array([self.y_star(self.x_star(float(t))) for t in ys])
        return float(np.max(np.abs(back - ys) / ys))


@dataclass(frozen=True)
class AnalyticExampleParams:
    """Coefficients of the rational reciprocal-boundary examples."""

    a: float
    b: float
    c: float
    family: str
    gamma: float
    alpha: float | None = None

    def __post_init__(self) -> None:
        for name in ("a", "b", "c"):
            check_positive(name, getattr(self, name))
        if self.family not in ("psi-power", "gamma-power"):
            raise ConfigError(
                f"family must be 'psi-power' or 'gamma-power', got {self.family!r}"
            )
        if self.family == "psi-power":
            if self.alpha is None or self.alpha <= 0.0:
                raise ConfigError("psi-power family needs alpha > 0")
            if self.gamma < 1.0:
                raise ConfigError("psi-power family needs gamma >= 1")
        else:
            if not (0.0 < self.gamma <= 1.0):
                raise ConfigError("gamma-power family needs gamma in (0, 1]")


def _knots(span, num) -> np.ndarray:
    lo, hi = float(span[0]), float(span[1])
    check_positive("span lower end", lo)
    if hi <= lo:
        raise ConfigError(f"span must be increasing, got ({lo}, {hi})")
    return np.geomspace(lo, hi, int(num))


def _boundary_values(boundary, knots) -> np.ndarray:
    if callable(boundary):
        return np.array([float(boundary(float(t))) for t in knots])
    raise ConfigError("boundary must be a BoundaryCurve or callable")


def _longest_true_run(mask: np.ndarray) -> slice:
    best, best_len, start = slice(0, 0), 0, None
    for i, ok in enumerate(list(mask) + [False]):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best_len:
                best, best_len = slice(start, i), i - start
            start = None
    return best


def _package(knots, values, checks) -> DualVolResult:
    """Assemble the partial curve and margin report from per-knot checks.

    ``checks`` maps condition ids to margin arrays; a dual value exists
    only where every margin is positive.
    """
    conditions = []
    valid = np.ones(len(knots), dtype=bool)
    for name, margin in checks.items():
        margin = np.asarray(margin, dtype=float)
        i = int(np.argmin(margin))
        conditions.append(ConditionMargin(name, float(margin[i]), float(knots[i])))
        valid &= margin > 0.0
    run = _longest_true_run(valid)
    vol = None
    if run.stop - run.start >= 4:
        vol = TabulatedVol(knots[run], values[run])
    return DualVolResult(vol=vol, conditions=tuple(conditions),
                         violations=knots[~valid])


def dual_vol_callput(sigma: VolCurve, m: MarketParams, span,
                     num: int = NUM_KNOTS) -> TabulatedVol:
    """Dual volatility for phi = (y - x)^+.

    eta(y) = 2 (y - x*(y)) (r y - delta x*(y)) / [y x*(y) sigma(x*(y))],
    with x* computed here from sigma.  Positivity of every factor is
    automatic on the put side, so no condition report is needed.
    """
    ys = _knots(span, num)
    alpha = _put_bracket_ratio(sigma, m)
    window = (alpha * ys[0] / WINDOW_MARGIN, ys[-1] * WINDOW_MARGIN)
    u = solve_log_derivative_f(sigma, m, window)
    xs = put_boundary_curve(ys, CallPut(), u).values
    vals = 2.0 * (ys - xs) * (m.r * ys - m.delta * xs) \
        / (ys * xs * np.asarray(sigma.value(xs), dtype=float))
    return TabulatedVol(ys, vals)


def inverse_dual_vol_callput(eta: VolCurve, y_star, m: MarketParams,
                             span, num: int = NUM_KNOTS) -> TabulatedVol:
    """Recover sigma from eta for phi = (y - x)^+, given the boundary.

    sigma(x) = 2 (y*(x) - x) (r y*(x) - delta x) / [y*(x) x eta(y*(x))].
    Unlike dual_vol_callput this takes y* as an input so it can run on
    boundaries that did not come from a volatility curve at all.
    """
    xs = _knots(span, num)
    ysv = _boundary_values(y_star, xs)
    vals = 2.0 * (ysv - xs) * (m.r * ysv - m.delta * xs) \
        / (ysv * xs * np.asarray(eta.value(ysv), dtype=float))
    return TabulatedVol(xs, vals)


def _put_bracket_ratio(sigma: VolCurve, m: MarketParams) -> float:
    a = float(exponent_a(sigma.upper_bound, m))
    return a / (a - 1.0)


def _psi_dual_core(sigma, xs, ys, psi_x, psi_y, m):
    sig2 = np.asarray(sigma.value(xs), dtype=float) ** 2
    gap = psi_y.value(ys) - psi_x.value(xs)
    dpx, ddpx = psi_x.deriv(xs), psi_x.deriv2(xs)
    dpy, ddpy = psi_y.deriv(ys), psi_y.deriv2(ys)
    fit_den = 2.0 * (m.r * gap + (m.r - m.delta) * xs * dpx) \
        + xs**2 * sig2 * ddpx
    A = (gap / (dpx * dpy)) ** 2 * fit_den / (xs**2 * sig2)
    one_plus = 1.0 + ddpy * A
    bracket = m.delta * gap + (m.r - m.delta) * ys * dpy
    with np.errstate(invalid="ignore"):
        vals = np.sqrt(np.maximum(2.0 * bracket * A / one_plus, 0.0)) / ys
    return vals, {
        "put_ode_denominator": fit_den,
        "one_plus_psi_y2_A": one_plus,
        "discount_drift_bracket": bracket,
    }


def dual_vol_psi(sigma: VolCurve, x_star, psi_x, psi_y, m: MarketParams,
                 span, num: int = NUM_KNOTS) -> DualVolResult:
    """Dual volatility for phi = (psi_y(y) - psi_x(x))^+.

    Evaluates eta(y) = (1/y) sqrt(2 [delta(psi_y - psi_x(x*)) +
    (r-delta) y psi_y'] A / (1 + psi_y'' A)) with

        A(y) = [(psi_y - psi_x(x*)) / (psi_x'(x*) psi_y'(y))]^2
               * (2[r(psi_y - psi_x(x*)) + (r-delta) x* psi_x'(x*)]
                  + x*^2 sigma^2(x*) psi_x''(x*)) / (x*^2 sigma^2(x*)).

    The dual exists only where 1 + psi_y'' A and the bracket under the
    square root are positive; both margins are reported.
    """
    ys = _knots(span, num)
    xs = _boundary_values(x_star, ys)
    vals, checks = _psi_dual_core(sigma, xs, ys, psi_x, psi_y, m)
    return _package(ys, vals, checks)


def inverse_dual_vol_psi(eta: VolCurve, y_star, psi_x, psi_y,
                         m: MarketParams, span,
                         num: int = NUM_KNOTS) -> DualVolResult:
    """Recover sigma from eta for phi = (psi_y(y) - psi_x(x))^+.

    Refused when psi_x lacks the scaling lower bound psi_x(alpha x) >=
    C_alpha psi_x(x): without it the put boundary is not pinned down as
    the unique increasing solution of its ODE, so the recovered curve
    would not be trustworthy.  Power maps qualify; exponential ones do
    not.
    """
    if not psi_x.scaling_lower_bound:
        raise AdmissibilityError(
            "inverse dualization refused: psi_x does not satisfy the scaling "
            "lower bound, so boundary uniqueness is unavailable"
        )
    xs = _knots(span, num)
    ysv = _boundary_values(y_star, xs)
    eta2 = np.asarray(eta.value(ysv), dtype=float) ** 2
    gap = psi_y.value(ysv) - psi_x.value(xs)
    dpx, ddpx = psi_x.deriv(xs), psi_x.deriv2(xs)
    dpy, ddpy = psi_y.deriv(ysv), psi_y.deriv2(ysv)
    fit_den = 2.0 * (m.delta * gap + (m.r - m.delta) * ysv * dpy) \
        - ysv**2 * eta2 * ddpy
    B = (gap / (dpx * dpy)) ** 2 * fit_den / (ysv**2 * eta2)
    one_minus = 1.0 - ddpx * B
    bracket = m.r * gap + (m.r - m.delta) * xs * dpx
    with np.errstate(invalid="ignore"):
        vals = np.sqrt(np.maximum(2.0 * bracket * B / one_minus, 0.0)) / xs
    return _package(xs, vals, {
        "call_ode_denominator": fit_den,
        "one_minus_psi_x2_B": one_minus,
        "growth_drift_bracket": bracket,
    })


def _gamma_dual_core(sigma, xs, ys, gamma, m):
    g = float(gamma)
    sig2 = np.asarray(sigma.value(xs), dtype=float) ** 2
    w = ys - xs
    Qr = m.r * w**2 + g * (m.r - m.delta) * xs * w
    den = g**2 * (2.0 - g) * xs**2 * sig2 - 2.0 * (1.0 - g) * Qr
    num1 = m.delta * w + g * (m.r - m.delta) * ys
    with np.errstate(invalid="ignore", divide="ignore"):
        s2 = (2.0 * w * num1 / (g * ys**2)) \
            * (2.0 * Qr + g * (1.0 - g) * xs**2 * sig2) / den
        vals = np.sqrt(np.maximum(s2, 0.0))
    return vals, {
        "sigma_tilde_denominator": den,
        "discount_drift_bracket": num1,
    }


def dual_vol_gamma(sigma: VolCurve, x_star, gamma: float, m: MarketParams,
                   span, num: int = NUM_KNOTS) -> DualVolResult:
    """Dual volatility for phi = ((y - x)^+)^gamma, gamma in (0, 1]."""
    ys = _knots(span, num)
    xs = _boundary_values(x_star, ys)
    vals, checks = _gamma_dual_core(sigma, xs, ys, gamma, m)
    return _package(ys, vals, checks)


def inverse_dual_vol_gamma(eta: VolCurve, y_star, gamma: float,
                           m: MarketParams, span,
                           num: int = NUM_KNOTS) -> DualVolResult:
    """Recover sigma from eta for phi = ((y - x)^+)^gamma.

    Besides the pointwise denominator condition this needs y*(x) to
    exceed ((gamma delta + (1-gamma) r)/r) x, and the uniqueness theory
    behind the recovery requires max(r - delta, (delta-r)(gamma delta +
    (1-gamma) r)/((1-gamma) delta + gamma r)) > (1-gamma) sigma_bar^2/2
    evaluated on the produced curve; that check is necessarily a
    posteriori and raises when it fails.
    """
    g = float(gamma)
    xs = _knots(span, num)
    ysv = _boundary_values(y_star, xs)
    eta2 = np.asarray(eta.value(ysv), dtype=float) ** 2
    w = ysv - xs
    Qd = m.delta * w**2 + g * (m.r - m.delta) * ysv * w
    den = g**2 * (2.0 - g) * ysv**2 * eta2 - 2.0 * (1.0 - g) * Qd
    drift_gap = ysv - (g * m.delta + (1.0 - g) * m.r) / m.r * xs
    with np.errstate(invalid="ignore", divide="ignore"):
        s2 = (2.0 * (m.r * w**2 + g * (m.r - m.delta) * xs * w) / (g * xs**2)) \
            * (2.0 * Qd + g * (1.0 - g) * ysv**2 * eta2) / den
        vals = np.sqrt(np.maximum(s2, 0.0))
    result = _package(xs, vals, {
        "eta_tilde_denominator": den,
        "ystar_exceeds_drift_bound": drift_gap,
    })
    if result.vol is not None:
        sig_bar = result.vol.upper_bound
        lhs = max(m.r - m.delta,
                  (m.delta - m.r) * (g * m.delta + (1.0 - g) * m.r)
                  / ((1.0 - g) * m.delta + g * m.r))
        margin = lhs - (1.0 - g) * sig_bar**2 / 2.0
        if margin <= 0.0:
            raise AdmissibilityError(
                "recovered curve violates the uniqueness applicability bound: "
                f"max(r-delta, ...) - (1-gamma) sigma_bar^2/2 = {margin:.3e} <= 0"
            )
        conditions = result.conditions + (
            ConditionMargin("uniqueness_applicability", margin, float(xs[0])),)
        result = DualVolResult(vol=result.vol, conditions=conditions,
                               violations=result.violations)
    return result


def dual_vol_for(sigma: VolCurve, p: Payoff, m: MarketParams, span,
                 num: int = NUM_KNOTS) -> DualVolResult:
    """Dual curve for any supported payoff, reported rather than raised.

    Unlike build_dual_pair this runs on the requested span exactly and
    never raises on a condition violation: the result carries the
    longest valid run plus the full margin report, so a caller can show
    what failed and where.  Production curves should still come from
    build_dual_pair, whose span padding keeps the clamp tails away from
    the answer.
    """
    ys = _knots(span, num)
    alpha = _put_bracket_ratio(sigma, m)
    edges = np.asarray(p.edge_x(ys), dtype=float)
    if not (np.all(np.isfinite(edges)) and np.all(edges > 0.0)):
        raise ConfigError("payoff support edge vanishes on the span")
    window = (alpha * float(np.min(edges)) / WINDOW_MARGIN,
              float(np.max(edges)) * WINDOW_MARGIN)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        u = solve_log_derivative_f(sigma, m, window)
        xs = put_boundary_curve(ys, p, u).values
        if isinstance(p, CallPut):
            sig = np.asarray(sigma.value(xs), dtype=float)
            with np.errstate(invalid="ignore"):
                vals = 2.0 * (ys - xs) * (m.r * ys - m.delta * xs) \
                    / (ys * xs * sig)
            checks = {"put_drift_bracket": m.r * ys - m.delta * xs}
        elif isinstance(p, PowerGamma):
            vals, checks = _gamma_dual_core(sigma, xs, ys, p.gamma, m)
        elif isinstance(p, (PowerPair, PsiDifference)):
            vals, checks = _psi_dual_core(sigma, xs, ys, p.psi_x, p.psi_y, m)
        else:
            raise ConfigError(
                f"no dual transform for payoff {type(p).__name__}")
    return _package(ys, vals, checks)


def solve_dual_constant_vol(level: float, p: Payoff, m: MarketParams,
                            given: str = "sigma"):
    """Constant-vol dual via the exponent relations.

    Solves gamma' a(s) + gamma b(n) = gamma gamma' (difference-of-powers
    payoff), a(s) + b(n) = gamma (concave-power payoff), or a + b = 1
    (call-put) for the missing constant.  Returns (ConstantVol | None,
    reason, residual); None is a valid answer in the regimes where the
    target exponent leaves the attainable range, e.g. gamma - 1 <=
    -r/(delta - r) when delta > r.
    """
    level = float(level)
    check_positive("level", level)
    if given not in ("sigma", "eta"):
        raise ConfigError(f"given must be 'sigma' or 'eta', got {given!r}")
    if isinstance(p, CallPut):
        gam, gam_p = 1.0, 1.0
    elif isinstance(p, PowerGamma):
        gam, gam_p = float(p.gamma), 1.0
    elif isinstance(p, PowerPair):
        gam, gam_p = float(p.gamma), float(p.gamma_p)
    else:
        raise ConfigError(
            "constant-vol dual relations exist only for the call-put, "
            "concave-power, and difference-of-powers families"
        )
    # express the relation as a target for the exponent a of the unknown
    if given == "sigma":
        a_known = float(exponent_a(level, m))
        a_target = 1.0 - gam_p + gam_p / gam * a_known if isinstance(p, PowerPair) \
            else 1.0 - gam + a_known
    else:
        b_known = float(exponent_b(level, m))
        a_target = gam - gam / gam_p * b_known if isinstance(p, PowerPair) \
            else gam - b_known
    if isinstance(p, CallPut):
        # a(s) + b(n) = 1 forces a(n) = a(s), hence n = s by strict
        # monotonicity; the dual constant vol is the input itself
        return ConstantVol(level), "", 0.0
    a_floor = -m.r / (m.delta - m.r) if m.delta > m.r else -np.inf
    if a_target >= 0.0:
        reason = "target exponent is nonnegative; no positive vol attains it"
        structural = gam * (1.0 - 1.0 / gam_p) if isinstance(p, PowerPair) \
            else gam - 1.0
        if structural <= a_floor:
            reason += (f" (no solution for any level: the family exponent "
                       f"{structural:.6g} <= -r/(delta-r) = {a_floor:.6g})")
        return None, reason, np.nan
    if a_target <= a_floor:
        return None, (f"target exponent {a_target:.6g} <= attainable floor "
                      f"-r/(delta-r) = {a_floor:.6g}"), np.nan
    lo, hi = level, level
    while float(exponent_a(lo, m)) >= a_target:
        lo /= 2.0
        if lo < 1e-12:
            return None, "bracketing failed toward zero vol", np.nan
    while float(exponent_a(hi, m)) <= a_target:
        hi *= 2.0
        if hi > 1e12:
            return None, "bracketing failed toward infinite vol", np.nan
    nu = float(brentq(lambda s: float(exponent_a(s, m)) - a_target,
                      lo, hi, xtol=1e-15, rtol=1e-15))
    if isinstance(p, PowerPair):
        residual = abs(gam_p * float(exponent_a(level if given == "sigma" else nu, m))
                       + gam * float(exponent_b(nu if given == "sigma" else level, m))
                       - gam * gam_p)
    else:
        s_lvl = level if given == "sigma" else nu
        n_lvl = nu if given == "sigma" else level
        residual = abs(float(exponent_a(s_lvl, m))
                       + float(exponent_b(n_lvl, m)) - gam)
    return ConstantVol(nu), "", float(residual)


def _gamma_family_forms(q: AnalyticExampleParams, m: MarketParams):
    a, b, c, g = q.a, q.b, q.c, q.gamma
    r, d = m.r, m.delta
    kbar = (1.0 - g) * r + g * d

    def x_star(y):
        y = np.asarray(y, dtype=float)
        return 0.5 * (b * y - a + np.sqrt((b * y - a) ** 2 + 4.0 * c * y))

    def y_star(x):
        x = np.asarray(x, dtype=float)
        return x * (x + a) / (b * x + c)

    def sigma(x):
        x = np.asarray(x, dtype=float)
        num = (x * (1.0 - b) + a - c) * (x * (r - b * kbar) + a * r - c * kbar)
        den = b * x**2 + 2.0 * c * x + a * c + (g - 1.0) * (b * x + c) ** 2
        return np.sqrt(2.0 / g * num / den)

    def eta(y):
        y = np.asarray(y, dtype=float)
        xs = x_star(y)
        num = (y - xs) * (d * (y - xs) + g * (r - d) * y) \
            * (b * xs**2 + 2.0 * c * xs + a * c)
        den = y**2 * (b * (b + g - 1.0) * xs**2 + 2.0 * c * (b + g - 1.0) * xs
                      + c * a * (c / a + g - 1.0))
        return np.sqrt(2.0 / g * num / den)

    return sigma, eta, x_star, y_star


def _psi_family_forms(q: AnalyticExampleParams, m: MarketParams):
    a, b, c, g, al = q.a, q.b, q.c, q.gamma, q.alpha
    r, d = m.r, m.delta

    def x_star(y):
        y = np.asarray(y, dtype=float)
        return (0.5 * (b * al * y - a
                       + np.sqrt((b * al * y - a) ** 2 + 4.0 * c * al * y))) ** (1.0 / g)

    def y_star(x):
        x = np.asarray(x, dtype=float)
        xg = x**g
        return xg * (xg + a) / (al * (b * xg + c))

    def sigma(x):
        x = np.asarray(x, dtype=float)
        xg = x**g
        num = (r * ((xg + a) / (b * xg + c) - 1.0) + (r - d) * g) \
            * (b * xg + c) * ((1.0 - b) * xg + a - c)
        den = b * (1.0 + (g - 1.0) * b) * xg**2 \
            + ((g - 1.0) * b * (2.0 * c - a) + c * (g + 1.0)) * xg \
            + c * (g * c + a - c)
        return np.sqrt(2.0 / g * num / den)

    def eta(y):
        y = np.asarray(y, dtype=float)
        xg = x_star(y) ** g
        return np.sqrt(2.0 * (r * al * y - d * xg) / y * (al * y - xg) / (al**2 * y)
                       * (b * xg**2 + 2.0 * c * xg + a * c) / (b * xg + c) ** 2)

    return sigma, eta, x_star, y_star


def _admissibility_gamma(q: AnalyticExampleParams, m: MarketParams):
    a, b, c, g = q.a, q.b, q.c, q.gamma
    r, d = m.r, m.delta
    kbar = (1.0 - g) * r + g * d
    ratio_hi = max(c / a, b)
    ratio_lo = min(c / a, b)
    cap = min(1.0, r / kbar)
    M = max(1.0 / b, a / c)
    rhs = max(r - d, (d - r) * (g * d + (1.0 - g) * r)
              / ((1.0 - g) * d + g * r))
    margins = [
        ConditionMargin("max(c/a,b) < min(1, r/((1-g)r+g d))",
                        cap - ratio_hi, ratio_hi),
        ConditionMargin("min(c/a,b) > 1-gamma", ratio_lo - (1.0 - g), ratio_lo),
        ConditionMargin("third coefficient inequality",
                        rhs - (1.0 - g) / g**2 * (M - 1.0) * (r * M - kbar), M),
    ]
    for cm in margins:
        if cm.min_margin <= 0.0:
            msg = f"inadmissible coefficients: {cm.condition} fails by {-cm.min_margin:.3e}"
            if g < 1.0 and d > r and d / r >= (2.0 - g) / (1.0 - g):
                msg += ("; no coefficients exist in this regime since "
                        "delta/r >= (2-gamma)/(1-gamma)")
            raise AdmissibilityError(msg)
    return margins


def _admissibility_psi(q: AnalyticExampleParams, m: MarketParams):
    a, b, c, g = q.a, q.b, q.c, q.gamma
    r, d = m.r, m.delta
    ratio_hi = max(c / a, b)
    ratio_lo = min(c / a, b)
    cap = 1.0 if r >= d else 1.0 / (1.0 + (d / r - 1.0) * g)
    margins = [
        ConditionMargin("max(c/a,b) <= cap", cap - ratio_hi, ratio_hi),
        ConditionMargin("min(c/a,b) < cap (strict)", cap - ratio_lo, ratio_lo),
        ConditionMargin("(g-1) b (2c-a) + c (g+1) >= 0",
                        (g - 1.0) * b * (2.0 * c - a) + c * (g + 1.0), b),
    ]
    # the middle inequality is strict; the outer two tolerate equality
    strict = (False, True, False)
    for cm, must_be_strict in zip(margins, strict):
        failed = cm.min_margin <= 0.0 if must_be_strict else cm.min_margin < 0.0
        if failed:
            raise AdmissibilityError(
                f"inadmissible coefficients: {cm.condition} fails by "
                f"{-cm.min_margin:.3e}"
            )
    return margins


def _assemble_pair(forms, margins, span, num) -> DualPair:
    sigma_fn, eta_fn, xs_fn, ys_fn = forms
    ys = _knots(span, num)
    xvals = np.asarray(xs_fn(ys), dtype=float)
    xspan_knots = np.geomspace(xvals[0], xvals[-1], int(num))
    x_star = BoundaryCurve(knots=ys, values=xvals, label="x_star")
    y_star = BoundaryCurve(knots=xspan_knots,
                           values=np.asarray(ys_fn(xspan_knots), dtype=float),
                           label="y_star")
    # default window: the bound must cover everything downstream
    # solvers may sample, not just the boundary image
    sigma = ClosedFormVol(sigma_fn, name="analytic-sigma")
    eta = ClosedFormVol(eta_fn, name="analytic-eta")
    pair = DualPair(sigma=sigma, eta=eta, x_star=x_star, y_star=y_star,
                    condition_report=tuple(margins),
                    exact={"sigma": sigma_fn, "eta": eta_fn,
                           "x_star": xs_fn, "y_star": ys_fn})
    resid = pair.reciprocity_residual()
    if resid > RECIPROCITY_TOL:
        raise NumericalError(
            f"analytic pair failed reciprocity: residual {resid:.3e}"
        )
    return pair


def analytic_pair_gamma(q: AnalyticExampleParams, m: MarketParams,
                        span=(0.05, 50.0), num: int = NUM_KNOTS) -> DualPair:
    """Closed-form dual pair for phi = ((y - x)^+)^gamma."""
    if q.family != "gamma-power":
        raise ConfigError("analytic_pair_gamma needs gamma-power params")
    margins = _admissibility_gamma(q, m)
    return _assemble_pair(_gamma_family_forms(q, m), margins, span, num)


def analytic_pair_psi(q: AnalyticExampleParams, m: MarketParams,
                      span=(0.05, 50.0), num: int = NUM_KNOTS) -> DualPair:
    """Closed-form dual pair for phi = (alpha y - x^gamma)^+."""
    if q.family != "psi-power":
        raise ConfigError("analytic_pair_psi needs psi-power params")
    margins = _admissibility_psi(q, m)
    return _assemble_pair(_psi_family_forms(q, m), margins, span, num)


def build_dual_pair(sigma: VolCurve, p: Payoff, m: MarketParams, span,
                    num: int = NUM_KNOTS, span_margin: float = 30.0) -> DualPair:
    """Construct the dual pair generated by sigma over a strike span.

    The transform actually runs on a span widened by ``span_margin`` on
    both sides; the returned boundary curves are cut back to the
    request.  The widening is what makes the result trustworthy at the
    ends: eta is only ever produced on a finite span, the g-equation
    must run on its clamped extension, and the boundary error that the
    extension causes decays at the Riccati contraction rate away from
    the span ends.  A thirtyfold margin is about 1.5 decades, enough to
    shrink an O(1e-3) tail mismatch below the reciprocity tolerance.
    eta itself is returned on the full widened span where it is valid.

    The call-side boundary is recomputed from eta through the
    g-equation rather than by inverting x*, so the reciprocity check
    exercises two independent routes.
    """
    lo, hi = float(span[0]), float(span[1])
    _knots(span, num)
    if span_margin < 1.0:
        raise ConfigError("span_margin must be at least 1")
    h = np.log(hi / lo) / (num - 1)
    n_pad = int(np.ceil(np.log(span_margin) / h))
    ys = lo * np.exp(h * np.arange(-n_pad, num + n_pad))
    i0, i1 = n_pad, n_pad + num - 1

    alpha = _put_bracket_ratio(sigma, m)
    x_lo = alpha * float(p.edge_x(ys[0]))
    x_hi = float(p.edge_x(ys[-1]))
    if x_lo <= 0.0:
        raise ConfigError("payoff support edge vanishes on the span")
    with warnings.catch_warnings():
        # a tabulated sigma clamps beyond its knots; that extension is
        # the curve the caller handed us, not an accident
        warnings.simplefilter("ignore", ClampWarning)
        u = solve_log_derivative_f(
            sigma, m, (x_lo / WINDOW_MARGIN, x_hi * WINDOW_MARGIN))
        xs_all = put_boundary_curve(ys, p, u).values

    if isinstance(p, CallPut):
        sig = np.asarray(sigma.value(xs_all), dtype=float)
        vals = 2.0 * (ys - xs_all) * (m.r * ys - m.delta * xs_all) \
            / (ys * xs_all * sig)
        checks: dict = {}
    elif isinstance(p, PowerGamma):
        vals, checks = _gamma_dual_core(sigma, xs_all, ys, p.gamma, m)
    elif isinstance(p, (PowerPair, PsiDifference)):
        vals, checks = _psi_dual_core(sigma, xs_all, ys, p.psi_x, p.psi_y, m)
    else:
        raise ConfigError(f"no dual transform for payoff {type(p).__name__}")

    valid = np.isfinite(vals) & (vals > 0.0)
    for margin in checks.values():
        valid &= margin > 0.0
    bad = int(np.count_nonzero(~valid[i0:i1 + 1]))
    if bad:
        raise AdmissibilityError(
            f"no dual exists on the requested span; violated at "
            f"{bad} of {num} knots")
    # margins are reported for the requested span, but eta keeps every
    # contiguous valid knot around it
    conditions = tuple(
        ConditionMargin(name, float(np.min(margin[i0:i1 + 1])),
                        float(ys[i0 + int(np.argmin(margin[i0:i1 + 1]))]))
        for name, margin in checks.items())
    a, b = i0, i1
    while a > 0 and valid[a - 1]:
        a -= 1
    while b < len(valid) - 1 and valid[b + 1]:
        b += 1
    eta = TabulatedVol(ys[a:b + 1], vals[a:b + 1])
    x_star = BoundaryCurve(knots=ys[i0:i1 + 1], values=xs_all[i0:i1 + 1],
                           label="x_star")

    with warnings.catch_warnings():
        # clamped tails beyond the dual's knot span are intended here
        warnings.simplefilter("ignore", ClampWarning)
        v = solve_log_derivative_g(
            eta, m, (float(eta.x[0]) / WINDOW_MARGIN,
                     float(eta.x[-1]) * WINDOW_MARGIN))
        y_star = call_boundary_curve(
            np.geomspace(float(x_star.values[0]), float(x_star.values[-1]),
                         num), p, v)
    return DualPair(sigma=sigma, eta=eta, x_star=x_star, y_star=y_star,
                    condition_report=conditions)


@dataclass(frozen=True)
class DualityReport:
    reciprocity_max: float
    perpetual_gap_max: float
    grid_shape: tuple[int, int]
    fd_rows: tuple[tuple[float, float, float, float], ...] = ()

    def summary(self) -> str:
        lines = [
            f"reciprocity max rel residual : {self.reciprocity_max:.3e}",
            f"perpetual gap max (relative) : {self.perpetual_gap_max:.3e} "
            f"on {self.grid_shape[0]}x{self.grid_shape[1]} grid",
        ]
        for T, P, c, gap in self.fd_rows:
            lines.append(f"T={T:<6g} put-route {P:.8f}  call-route {c:.8f}  "
                         f"|gap| {gap:.3e}")
        return "\n".join(lines)


def verify_duality(pair: DualPair, p: Payoff, m: MarketParams,
                   x_grid=None, y_grid=None, maturities=None,
                   fd_point=None, fd_grid: FDGrid | None = None) -> DualityReport:
    """Check a dual pair by reciprocity and by independent pricing.

    Perpetual prices are computed from scratch on both sides (f route
    under sigma, g route under eta) on the grid; if maturities are
    given, the finite-difference pricer supplies a maturity-indexed
    comparison at ``fd_point`` that shares no code with either.
    """
    y_lo, y_hi = pair.x_star.span
    x_lo, x_hi = pair.y_star.span
    if y_grid is None:
        y_grid = np.geomspace(y_lo * (y_hi / y_lo) ** 0.1,
                              y_lo * (y_hi / y_lo) ** 0.9, 20)
    if x_grid is None:
        x_grid = np.geomspace(x_lo * (x_hi / x_lo) ** 0.1,
                              x_lo * (x_hi / x_lo) ** 0.9, 20)
    x_grid = np.asarray(x_grid, dtype=float)
    y_grid = np.asarray(y_grid, dtype=float)

    resid = pair.reciprocity_residual()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        u = solve_log_derivative_f(
            pair.sigma, m,
            (min(x_grid[0], float(pair.x_star.values[0])) / WINDOW_MARGIN,
             max(x_grid[-1], float(pair.x_star.values[-1])) * WINDOW_MARGIN))
        v = solve_log_derivative_g(
            pair.eta, m, (y_grid[0] / WINDOW_MARGIN, y_grid[-1] * WINDOW_MARGIN))
    gap_max = 0.0
    for yq in y_grid:
        for xq in x_grid:
            P = perpetual_put_price(float(xq), float(yq), p, u).price
            cc = perpetual_call_price(float(yq), float(xq), p, v).price
            if P > 0.0:
                gap_max = max(gap_max, abs(P - cc) / P)
            elif cc != 0.0:
                gap_max = max(gap_max, abs(P - cc) / abs(cc))

    rows = []
    if maturities is not None:
        if fd_point is None:
            fd_point = (float(np.sqrt(x_grid[0] * x_grid[-1])),
                        float(np.sqrt(y_grid[0] * y_grid[-1])))
        xq, yq = float(fd_point[0]), float(fd_point[1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            P_T = finite_maturity_curve(maturities, xq, yq, p, pair.sigma, m,
                                        "put", fd_grid)
            c_T = finite_maturity_curve(maturities, yq, xq, p, pair.eta, m,
                                        "call", fd_grid)
        rows = [(float(T), float(Pv), float(cv), float(abs(Pv - cv)))
                for T, Pv, cv in zip(np.atleast_1d(maturities), P_T, c_T)]
    return DualityReport(reciprocity_max=resid, perpetual_gap_max=gap_max,
                         grid_shape=(len(x_grid), len(y_grid)),
                         fd_rows=tuple(rows))
