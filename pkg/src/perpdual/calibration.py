"""Local volatility recovery from perpetual option prices.

A perpetual price curve K -> p(K) observed at a single spot x0
determines the volatility below the spot, and nothing else.  The
pipeline makes that constructive: locate the first exercised strike Y,
read the strike-side volatility off the second-order ODE that p itself
satisfies below Y, integrate the call-side boundary ODE backward from
(x0, Y), and map the strike-side curve through the inverse dual
transform of the payoff family.  The uniqueness check turns the
converse into a numerical assertion: two volatilities price every
strike identically exactly when they agree on (0, x0] and share Y.

Differentiation of the observed prices is the accuracy bottleneck;
it uses plain central differences on the given (possibly nonuniform)
strike grid, with an optional monotone-spline pre-fit for noisy data.
No smoothing happens by default.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .boundary import BoundaryCurve, call_boundary_ode, put_boundary_at
from .duality import (inverse_dual_vol_callput, inverse_dual_vol_gamma,
                      inverse_dual_vol_psi)
from .errors import AdmissibilityError, BracketError, ConfigError, NumericalError
from .fundamental import exponent_a, solve_log_derivative_f
from .market import MarketParams
from .payoff import CallPut, Payoff, PowerGamma, PowerPair, PsiDifference
from .pricing import perpetual_put_price
from .validation import check_positive
from .volatility import ClampWarning, TabulatedVol, VolCurve

EXERCISE_TOL_REL = 1e-9
WINDOW_MARGIN = 100.0


@dataclass
class PriceCurve:
    """Observed perpetual prices on a strike grid, at one spot.

    ``strikes`` must be strictly increasing and positive, ``prices``
    positive; consistency with a payoff (no price below immediate
    exercise value) is checked where the payoff enters the pipeline.
    """

    strikes: np.ndarray
    prices: np.ndarray
    x0: float

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, dtype=float)
        self.prices = np.asarray(self.prices, dtype=float)
        self.x0 = float(self.x0)
        check_positive("x0", self.x0)
        if self.strikes.ndim != 1 or self.strikes.shape != self.prices.shape:
            raise ConfigError("strikes and prices must be 1-d and equal length")
        if self.strikes.size < 5:
            raise ConfigError("at least 5 strikes are needed")
        if self.strikes[0] <= 0.0 or np.any(np.diff(self.strikes) <= 0.0):
            raise ConfigError("strikes must be positive and strictly increasing")
        if np.any(self.prices <= 0.0):
            raise ConfigError("prices must be positive")


@dataclass(frozen=True)
class CalibrationResult:
    """Everything the price curve determines, plus how well it did."""

    Y: float
    sigma_tilde: VolCurve
    y_star: BoundaryCurve
    sigma: VolCurve
    diagnostics: dict = field(default_factory=dict)


def detect_exercise_strike(pc: PriceCurve, p: Payoff,
                           tol_rel: float = EXERCISE_TOL_REL) -> float:
    """First strike at which the price has collapsed onto the payoff.

    Returns the smallest K with p(K) - phi(x0, K) <= tol_rel * p(K),
    refined by bisection between the bracketing knots on a monotone
    interpolant of the price curve.
    """
    K, P, x0 = pc.strikes, pc.prices, pc.x0
    payoff_vals = np.asarray(p.value(x0, K), dtype=float)
    slack = 1e-12 * (1.0 + np.abs(payoff_vals))
    if np.any(P < payoff_vals - slack):
        k_bad = float(K[int(np.argmin(P - payoff_vals))])
        raise ConfigError(
            f"price below immediate exercise value at strike {k_bad:g}")
    at_payoff = (P - payoff_vals) <= tol_rel * np.maximum(P, 1e-12)
    if not np.any(at_payoff):
        raise BracketError(
            "Y not bracketed: no strike in the span has price equal to "
            "the exercise value")
    i = int(np.argmax(at_payoff))
    if i == 0:
        warnings.warn(
            "price equals payoff already at the lowest strike; the "
            "exercise strike is degenerate at the grid edge",
            RuntimeWarning, stacklevel=2)
        return float(K[0])
    interp = PchipInterpolator(np.log(K), P)

    def collapsed(k):
        pk = float(interp(np.log(k)))
        return pk - float(p.value(x0, k)) <= tol_rel * max(pk, 1e-12)

    lo, hi = float(K[i - 1]), float(K[i])
    while hi - lo > 1e-14 * hi:
        mid = np.sqrt(lo * hi)
        if collapsed(mid):
            hi = mid
        else:
            lo = mid
    # smooth fit makes the contact quadratic, so sqrt(gap) is linear in
    # K as it approaches the contact point; the nearby root of its
    # quadratic knot fit lands far closer to inf{K : p = phi} than the
    # threshold crossing does, which matters because the backward
    # boundary solve amplifies any error in Y
    if i >= 3:
        kk = K[i - 3:i]
        gg = (P - payoff_vals)[i - 3:i]
        if np.all(gg > 0.0) and np.all(np.diff(gg) < 0.0):
            coef = np.polyfit(kk, np.sqrt(gg), 2)
            roots = np.roots(coef)
            real = roots[np.abs(roots.imag) <= 1e-12 * np.abs(roots.real)].real
            window = (real > kk[-1]) & (real < 2.0 * float(K[i]) - kk[-1])
            near = real[window]
            if near.size:
                return float(near[np.argmin(np.abs(near - hi))])
    return hi


def recover_dual_vol_from_prices(pc: PriceCurve, Y: float, m: MarketParams,
                                 *, smooth: bool = False,
                                 diagnostics: dict | None = None) -> TabulatedVol:
    """Strike-side volatility read off the pricing ODE below Y.

    Below the first exercised strike the price satisfies
    (1/2) K^2 s~^2 p'' + K(delta - r) p' - delta p = 0, so

        s~(K) = (1/K) sqrt(2 (delta p + K (r - delta) p') / p'')

    at every interior strike whose full stencil lies below Y.  Strikes
    where p'' <= 0 or the bracket is nonpositive (noisy data; the
    theory forbids both) are dropped and counted.  With ``smooth`` the
    derivatives come from a monotone spline fit in log-strike instead
    of raw divided differences.
    """
    K, P = pc.strikes, pc.prices
    if smooth:
        interp = PchipInterpolator(np.log(K), P)
        Km = K[1:-1]
        d1 = interp.derivative(1)(np.log(Km))
        d2 = interp.derivative(2)(np.log(Km))
        p_mid = interp(np.log(Km))
        p_prime = d1 / Km
        p_second = (d2 - d1) / Km**2
    else:
        hm = K[1:-1] - K[:-2]
        hp = K[2:] - K[1:-1]
        den = hm * hp * (hm + hp)
        p_prime = (hm**2 * P[2:] - hp**2 * P[:-2]
                   + (hp**2 - hm**2) * P[1:-1]) / den
        p_second = 2.0 * (hm * P[2:] + hp * P[:-2] - (hm + hp) * P[1:-1]) / den
        Km = K[1:-1]
        p_mid = P[1:-1]

    below = K[2:] < Y * (1.0 - 1e-12)
    bracket = m.delta * p_mid + Km * (m.r - m.delta) * p_prime
    ok_convex = p_second > 0.0
    ok_bracket = bracket > 0.0
    keep = below & ok_convex & ok_bracket
    n_convex = int(np.count_nonzero(below & ~ok_convex))
    n_bracket = int(np.count_nonzero(below & ok_convex & ~ok_bracket))
    if n_convex or n_bracket:
        warnings.warn(
            f"dropped {n_convex} non-convex and {n_bracket} negative-drift "
            "strikes while differentiating the price curve",
            RuntimeWarning, stacklevel=2)
    if int(np.count_nonzero(keep)) < 4:
        raise NumericalError(
            "fewer than 4 usable strikes below the exercise strike")
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.sqrt(2.0 * bracket[keep] / (Km[keep] ** 2 * p_second[keep]))
    kk, vv = Km[keep], vals
    # the one or two stencils nearest Y straddle the contact kink and
    # are lost, yet the boundary sweep starts exactly at (x0, Y) and is
    # most sensitive there; complete the curve up to Y by local
    # quadratic extrapolation instead of letting it clamp early
    if kk.size >= 6 and kk[-1] < Y * (1.0 - 1e-12):
        coef = np.polyfit(np.log(kk[-6:]), vv[-6:], 2)
        v_end = float(np.polyval(coef, np.log(Y)))
        if v_end > 0.0:
            kk = np.append(kk, Y)
            vv = np.append(vv, v_end)
    vol = TabulatedVol(kk, vv)
    if diagnostics is not None:
        resid = 0.5 * Km[keep]**2 * vals**2 * p_second[keep] \
            + Km[keep] * (m.delta - m.r) * p_prime[keep] \
            - m.delta * p_mid[keep]
        diagnostics["dropped_nonconvex"] = n_convex
        diagnostics["dropped_negative_drift"] = n_bracket
        diagnostics["pricing_ode_residual_max"] = float(
            np.max(np.abs(resid) / np.maximum(p_mid[keep], 1e-300)))
    return vol


def backward_boundary_solve(sigma_tilde: VolCurve, Y: float, x0: float,
                            p: Payoff, m: MarketParams, *,
                            x_end: float | None = None,
                            num_out: int = 257) -> BoundaryCurve:
    """Call-side boundary integrated backward from (x0, Y).

    The smooth-fit point at the spot is known exactly, so the boundary
    ODE is run from there down to ``x_end`` (default x0/10).  Backward
    is the unstable direction: a relative error eps in Y grows like
    eps * (x0/x)^2 along the sweep, which is why Y detection works so
    hard and why the default stops a decade below the spot.
    """
    check_positive("Y", Y)
    check_positive("x0", x0)
    if x_end is None:
        x_end = x0 / 10.0
    if not 0.0 < x_end < x0:
        raise ConfigError("x_end must lie in (0, x0)")
    with warnings.catch_warnings():
        # the recovered curve is clamped outside the data range; the
        # backward sweep touching that zone is expected, not an error
        warnings.simplefilter("ignore", ClampWarning)
        return call_boundary_ode(x0, Y, x_end, sigma_tilde, p, m,
                                 num_out=num_out)


def recover_primal_vol(y_star: BoundaryCurve, sigma_tilde: VolCurve,
                       p: Payoff, m: MarketParams, *, num: int = 513,
                       diagnostics: dict | None = None) -> VolCurve:
    """Spot-side volatility via the payoff family's inverse dual.

    Evaluated on the span of ``y_star``; condition margins from the
    inverse transform are recorded in ``diagnostics`` when given, and
    a violation everywhere raises.
    """
    span = (float(y_star.knots[0]), float(y_star.knots[-1]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        if isinstance(p, CallPut):
            vol = inverse_dual_vol_callput(sigma_tilde, y_star, m, span, num)
            conditions, violations = (), np.empty(0)
        elif isinstance(p, PowerGamma):
            res = inverse_dual_vol_gamma(sigma_tilde, y_star, p.gamma, m,
                                         span, num)
            vol, conditions, violations = res.vol, res.conditions, res.violations
        elif isinstance(p, (PowerPair, PsiDifference)):
            res = inverse_dual_vol_psi(sigma_tilde, y_star, p.psi_x, p.psi_y,
                                       m, span, num)
            vol, conditions, violations = res.vol, res.conditions, res.violations
        else:
            raise ConfigError(
                f"no inverse dual transform for payoff {type(p).__name__}")
    if vol is None:
        worst = "; ".join(f"{c.condition} margin {c.min_margin:.3e} at "
                          f"{c.location:g}" for c in conditions)
        raise AdmissibilityError(
            f"inverse dual conditions fail on the whole span ({worst})")
    if diagnostics is not None:
        diagnostics["inverse_condition_margins"] = {
            c.condition: (c.min_margin, c.location) for c in conditions}
        diagnostics["inverse_condition_violations"] = int(violations.size)
    return vol


def calibrate(pc: PriceCurve, p: Payoff, m: MarketParams, *,
              smooth: bool = False, x_end: float | None = None,
              num_boundary: int = 257, num_vol: int = 513) -> CalibrationResult:
    """Full pipeline from a price curve to the spot-side volatility."""
    diagnostics: dict = {}
    Y = detect_exercise_strike(pc, p)
    if not pc.strikes[0] < Y:
        raise NumericalError(
            "exercise strike is degenerate at the grid edge; no strikes "
            "below it to differentiate")
    sigma_tilde = recover_dual_vol_from_prices(pc, Y, m, smooth=smooth,
                                               diagnostics=diagnostics)
    y_star = backward_boundary_solve(sigma_tilde, Y, pc.x0, p, m,
                                     x_end=x_end, num_out=num_boundary)
    if y_star.clip_note:
        diagnostics["boundary_clip"] = y_star.clip_note
    sigma = recover_primal_vol(y_star, sigma_tilde, p, m, num=num_vol,
                               diagnostics=diagnostics)
    exercised = pc.strikes >= Y
    if np.any(exercised):
        gap = np.abs(pc.prices[exercised]
                     - np.asarray(p.value(pc.x0, pc.strikes[exercised]),
                                  dtype=float))
        diagnostics["exercised_region_max_gap"] = float(
            np.max(gap / np.maximum(pc.prices[exercised], 1e-300)))
    diagnostics["exercise_strike"] = float(Y)
    diagnostics["sigma_span"] = (float(sigma.x[0]), float(sigma.x[-1])) \
        if isinstance(sigma, TabulatedVol) else None
    return CalibrationResult(Y=float(Y), sigma_tilde=sigma_tilde,
                             y_star=y_star, sigma=sigma,
                             diagnostics=diagnostics)


@dataclass(frozen=True)
class UniquenessReport:
    """Numerical form of the equivalence behind calibration uniqueness.

    Truthy exactly when the two sides of the equivalence agree: the
    volatilities match below the spot and share the first exercised
    strike if and only if the perpetual price curves at the spot match.
    """

    max_vol_gap: float
    vols_agree: bool
    exercise_strike_1: float
    exercise_strike_2: float
    exercise_strikes_agree: bool
    max_price_gap: float
    prices_agree: bool

    @property
    def equivalence_holds(self) -> bool:
        lhs = self.vols_agree and self.exercise_strikes_agree
        return lhs == self.prices_agree

    def __bool__(self) -> bool:
        return self.equivalence_holds


def _exercise_strike_of(sigma: VolCurve, x0: float, p: Payoff,
                        m: MarketParams, k_span):
    """Y for a given sigma, as the strike whose put boundary is x0."""
    a_bar = float(exponent_a(sigma.upper_bound, m))
    alpha = a_bar / (a_bar - 1.0)
    x_lo = alpha * float(p.edge_x(k_span[0]))
    u = solve_log_derivative_f(
        sigma, m, (x_lo / WINDOW_MARGIN,
                   float(p.edge_x(k_span[1])) * WINDOW_MARGIN))

    def excess(k):
        return put_boundary_at(float(k), p, u) - x0

    lo, hi = float(k_span[0]), float(k_span[1])
    if excess(lo) >= 0.0 or excess(hi) <= 0.0:
        raise BracketError("Y not bracketed by the uniqueness strike span")
    return float(brentq(excess, lo, hi, xtol=1e-14 * x0, rtol=1e-15)), u


def uniqueness_check(sigma1: VolCurve, sigma2: VolCurve, x0: float,
                     p: Payoff, m: MarketParams, *, strikes=None,
                     vol_tol: float = 1e-6,
                     price_tol: float = 1e-6) -> UniquenessReport:
    """Test the equivalence: same vol below spot and same Y, same prices.

    Both directions are informative: report truthiness means the
    equivalence held for this pair, whichever side of it the inputs
    fall on.
    """
    check_positive("x0", x0)
    if strikes is None:
        strikes = np.geomspace(x0 / 5.0, x0 * 5.0, 81)
    strikes = np.asarray(strikes, dtype=float)
    xs = np.geomspace(x0 / 100.0, x0, 257)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        v1 = np.asarray(sigma1.value(xs), dtype=float)
        v2 = np.asarray(sigma2.value(xs), dtype=float)
        max_vol_gap = float(np.max(np.abs(v1 / v2 - 1.0)))
        k_span = (float(strikes[0]) / 5.0, float(strikes[-1]) * 5.0)
        y1, u1 = _exercise_strike_of(sigma1, x0, p, m, k_span)
        y2, u2 = _exercise_strike_of(sigma2, x0, p, m, k_span)
        p1 = np.array([perpetual_put_price(x0, k, p, u1).price
                       for k in strikes])
        p2 = np.array([perpetual_put_price(x0, k, p, u2).price
                       for k in strikes])
    scale = np.maximum(np.maximum(p1, p2), 1e-12)
    max_price_gap = float(np.max(np.abs(p1 - p2) / scale))
    return UniquenessReport(
        max_vol_gap=max_vol_gap,
        vols_agree=max_vol_gap <= vol_tol,
        exercise_strike_1=y1,
        exercise_strike_2=y2,
        exercise_strikes_agree=abs(y1 - y2) <= price_tol * max(y1, y2),
        max_price_gap=max_price_gap,
        prices_agree=max_price_gap <= price_tol,
    )
