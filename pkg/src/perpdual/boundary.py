"""Exercise boundaries: smooth-fit root finding and ODE continuation.

The put boundary x*(y) is the unique root in [A X(y), X(y)) of

    F(x) = phi(x, y) / d_x phi(x, y) - f(x) / f'(x),

where A = a(sigma_bar) / (a(sigma_bar) - 1) and X(y) is the payoff
support edge; the call boundary y*(x) mirrors this with g and the
bracket (Y(x), B Y(x)], B = b(eta_bar) / (b(eta_bar) - 1).  Both
brackets come with guaranteed sign changes, so roots are found by a
bracketed solver and accepted only when the smooth-fit residual is
below 1e-10 times the bracket scale.

Alternatively the boundaries solve first-order ODEs in the free
variable; ``put_boundary_ode`` / ``call_boundary_ode`` integrate those
as a continuation, optionally projecting each output knot back onto the
smooth-fit equation, which is the ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import BracketError, NumericalError
from .fundamental import LogDerivCurve, exponent_a, exponent_b
from .market import MarketParams
from .payoff import Payoff
from .volatility import VolCurve

SMOOTH_FIT_TOL = 1e-10
EDGE_NUDGE = 1e-13
ODE_RTOL = 1e-12


def put_bracket(y: float, p: Payoff, vol_bound: float, m: MarketParams):
    """[A X(y), X(y)) with A = a(vol_bound) / (a(vol_bound) - 1)."""
    a = float(exponent_a(vol_bound, m))
    X = float(p.edge_x(y))
    return a / (a - 1.0) * X, X


def call_bracket(x: float, p: Payoff, vol_bound: float, m: MarketParams):
    """(Y(x), B Y(x)] with B = b(vol_bound) / (b(vol_bound) - 1)."""
    b = float(exponent_b(vol_bound, m))
    Y = float(p.edge_y(x))
    return Y, b / (b - 1.0) * Y


def put_boundary_at(y: float, p: Payoff, u: LogDerivCurve,
                    tol: float = SMOOTH_FIT_TOL) -> float:
    """Put exercise boundary x*(y) by bracketed root finding."""
    if u.side != "f":
        raise NumericalError("put boundary needs an f-side log-derivative curve")
    y = float(y)
    lo, X = put_bracket(y, p, u.vol_bound, u.market)
    # widen outward past the log-derivative solve's own noise floor, so a
    # root sitting exactly on the bracket end (constant vol) stays inside
    lo *= 1.0 - 1e-9
    hi = X * (1.0 - EDGE_NUDGE)
    if lo < u.grid[0] or hi > u.grid[-1]:
        raise NumericalError(
            f"put boundary bracket [{lo:g}, {hi:g}] leaves the solved window; "
            "window too narrow"
        )

    def F(x):
        return float(p.fit_ratio_x(x, y)) - 1.0 / float(u.u(x))

    F_lo, F_hi = F(lo), F(hi)
    if F_lo > 0.0 or F_hi < 0.0:
        raise BracketError(
            f"smooth-fit bracket does not straddle a sign change at y={y:g}: "
            f"F({lo:g})={F_lo:.3e}, F({hi:g})={F_hi:.3e}"
        )
    root = brentq(F, lo, hi, xtol=1e-15 * lo, rtol=1e-15)
    root = _polish_put(root, y, p, u, lo, hi)
    resid = abs(F(root))
    if resid > tol * X:
        raise NumericalError(
            f"smooth-fit residual {resid:.3e} exceeds {tol:g} * X(y) at y={y:g}"
        )
    return float(root)


def _polish_put(x, y, p, u, lo, hi, steps: int = 2) -> float:
    for _ in range(steps):
        phi = float(p.value(x, y))
        dx = float(p.dx(x, y))
        F = float(p.fit_ratio_x(x, y)) - 1.0 / float(u.u(x))
        dF = 1.0 - phi * float(p.dxx(x, y)) / dx**2 + float(u.du(x)) / float(u.u(x)) ** 2
        step = F / dF
        xn = x - step
        if not (lo <= xn <= hi):
            break
        x = xn
    return x


def call_boundary_at(x: float, p: Payoff, v: LogDerivCurve,
                     tol: float = SMOOTH_FIT_TOL) -> float:
    """Call exercise boundary y*(x) by bracketed root finding."""
    if v.side != "g":
        raise NumericalError("call boundary needs a g-side log-derivative curve")
    x = float(x)
    Y, hi = call_bracket(x, p, v.vol_bound, v.market)
    hi *= 1.0 + 1e-9
    lo = Y * (1.0 + EDGE_NUDGE)
    if lo < v.grid[0] or hi > v.grid[-1]:
        raise NumericalError(
            f"call boundary bracket [{lo:g}, {hi:g}] leaves the solved window; "
            "window too narrow"
        )

    def G(yq):
        return float(p.fit_ratio_y(x, yq)) - 1.0 / float(v.u(yq))

    G_lo, G_hi = G(lo), G(hi)
    if G_lo > 0.0 or G_hi < 0.0:
        raise BracketError(
            f"smooth-fit bracket does not straddle a sign change at x={x:g}: "
            f"G({lo:g})={G_lo:.3e}, G({hi:g})={G_hi:.3e}"
        )
    root = brentq(G, lo, hi, xtol=1e-15 * lo, rtol=1e-15)
    root = _polish_call(root, x, p, v, lo, hi)
    resid = abs(G(root))
    if resid > tol * hi:
        raise NumericalError(
            f"smooth-fit residual {resid:.3e} exceeds {tol:g} * bracket scale at x={x:g}"
        )
    return float(root)


def _polish_call(yq, x, p, v, lo, hi, steps: int = 2) -> float:
    for _ in range(steps):
        phi = float(p.value(x, yq))
        dy = float(p.dy(x, yq))
        G = float(p.fit_ratio_y(x, yq)) - 1.0 / float(v.u(yq))
        dG = 1.0 - phi * float(p.dyy(x, yq)) / dy**2 + float(v.du(yq)) / float(v.u(yq)) ** 2
        yn = yq - G / dG
        if not (lo <= yn <= hi):
            break
        yq = yn
    return yq


@dataclass
class BoundaryCurve:
    """Strictly increasing boundary samples with a smooth inverse.

    ``knots`` are the free-variable abscissae (y for a put boundary,
    x for a call boundary) and ``values`` the boundary points.  Both are
    strictly increasing; evaluation interpolates monotone-cubically in
    log-log coordinates, which is exact for the power-law boundaries of
    the constant-vol examples.
    """

    knots: np.ndarray
    values: np.ndarray
    label: str = "x_star"
    clip_note: str = ""
    _fwd: PchipInterpolator = field(init=False, repr=False)
    _inv: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.knots = np.asarray(self.knots, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.knots.size < 2:
            raise NumericalError("boundary curve needs at least two knots")
        if np.any(np.diff(self.knots) <= 0.0):
            raise NumericalError("boundary knots must be strictly increasing")
        if np.any(np.diff(self.values) <= 0.0):
            raise NumericalError(
                "boundary values must be strictly increasing (monotonicity of the "
                "exercise boundary failed)"
            )
        lk, lv = np.log(self.knots), np.log(self.values)
        self._lk, self._lv = lk, lv
        self._fwd = PchipInterpolator(lk, lv, extrapolate=False)
        self._inv = PchipInterpolator(lv, lk, extrapolate=False)

    @property
    def span(self):
        return float(self.knots[0]), float(self.knots[-1])

    @staticmethod
    def _clamp(lq, lo, hi, what):
        # queries landing a rounding error past the ends come from
        # composing curves; snap those, reject genuine excursions
        tol = 1e-12 * (1.0 + max(abs(lo), abs(hi)))
        if np.any(lq < lo - tol) or np.any(lq > hi + tol):
            raise NumericalError(what)
        return np.clip(lq, lo, hi)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        lq = self._clamp(np.log(q), self._lk[0], self._lk[-1],
                         f"boundary query outside the computed span {self.span}")
        res = np.exp(self._fwd(lq))
        return res if res.ndim else float(res)

    def inverse(self, b):
        b = np.asarray(b, dtype=float)
        lb = self._clamp(np.log(b), self._lv[0], self._lv[-1],
                         "boundary inverse query outside the computed value range "
                         f"[{self.values[0]:g}, {self.values[-1]:g}]")
        res = np.exp(self._inv(lb))
        return res if res.ndim else float(res)

    def slope(self, q):
        """d(value)/d(knot) from the log-log interpolant."""
        q = np.asarray(q, dtype=float)
        lq = self._clamp(np.log(q), self._lk[0], self._lk[-1],
                         f"boundary query outside the computed span {self.span}")
        val = np.exp(self._fwd(lq))
        return val / q * self._fwd(lq, 1)


def put_boundary_curve(ys, p: Payoff, u: LogDerivCurve) -> BoundaryCurve:
    """x*(y) at each requested y, as a BoundaryCurve."""
    ys = np.sort(np.asarray(ys, dtype=float))
    vals = np.array([put_boundary_at(yq, p, u) for yq in ys])
    return BoundaryCurve(knots=ys, values=vals, label="x_star")


def call_boundary_curve(xs, p: Payoff, v: LogDerivCurve) -> BoundaryCurve:
    """y*(x) at each requested x, as a BoundaryCurve."""
    xs = np.sort(np.asarray(xs, dtype=float))
    vals = np.array([call_boundary_at(xq, p, v) for xq in xs])
    return BoundaryCurve(knots=xs, values=vals, label="y_star")


def _ode_rhs_put(y, x, p: Payoff, sigma: VolCurve, m: MarketParams):
    # trial steps may probe past the payoff edge before the terminal
    # event localizes it; a floored phi keeps the slope finite there
    phi = max(float(p.value(x, y)), 1e-300)
    s2 = float(sigma.value(x)) ** 2
    num = float(p.dxy(x, y)) - float(p.dx(x, y)) * float(p.dy(x, y)) / phi
    den = 2.0 * (m.r * phi + (m.delta - m.r) * x * float(p.dx(x, y))) \
        - x * x * s2 * float(p.dxx(x, y))
    return num * x * x * s2 / den


def _ode_rhs_call(x, y, p: Payoff, eta: VolCurve, m: MarketParams):
    phi = max(float(p.value(x, y)), 1e-300)
    e2 = float(eta.value(y)) ** 2
    num = float(p.dxy(x, y)) - float(p.dx(x, y)) * float(p.dy(x, y)) / phi
    den = 2.0 * (m.delta * phi + (m.r - m.delta) * y * float(p.dy(x, y))) \
        - y * y * e2 * float(p.dyy(x, y))
    return num * y * y * e2 / den


def _den_margin_put(y, x, p, sigma, m):
    phi = float(p.value(x, y))
    s2 = float(sigma.value(x)) ** 2
    den = 2.0 * (m.r * phi + (m.delta - m.r) * x * float(p.dx(x, y))) \
        - x * x * s2 * float(p.dxx(x, y))
    scale = 2.0 * m.r * phi + 2.0 * abs((m.delta - m.r) * x * float(p.dx(x, y))) \
        + abs(x * x * s2 * float(p.dxx(x, y)))
    return den - 1e-12 * scale


def _den_margin_call(x, y, p, eta, m):
    phi = float(p.value(x, y))
    e2 = float(eta.value(y)) ** 2
    den = 2.0 * (m.delta * phi + (m.r - m.delta) * y * float(p.dy(x, y))) \
        - y * y * e2 * float(p.dyy(x, y))
    scale = 2.0 * m.delta * phi + 2.0 * abs((m.r - m.delta) * y * float(p.dy(x, y))) \
        + abs(y * y * e2 * float(p.dyy(x, y)))
    return den - 1e-12 * scale


def _continuation(side, start_free, start_bound, end_free, p, vol, m,
                  logderiv, num_out):
    """Shared continuation driver; side is "put" (free var y) or "call"."""
    rhs = _ode_rhs_put if side == "put" else _ode_rhs_call
    margin = _den_margin_put if side == "put" else _den_margin_call

    knots = np.geomspace(start_free, end_free, num_out)
    out_free = [start_free]
    out_bound = [start_bound]
    state = start_bound
    clip_note = ""

    def rhs_wrapped(s, q):
        return [rhs(s, q[0], p, vol, m)]

    def ev_margin(s, q):
        return margin(s, q[0], p, vol, m)

    phi0 = float(p.value(start_bound, start_free)) if side == "put" \
        else float(p.value(start_free, start_bound))

    def ev_support(s, q):
        # offset below: the healthy payoff value never reaches zero, so
        # a collapsing trajectory must cross this level transversally
        phi = float(p.value(q[0], s)) if side == "put" \
            else float(p.value(s, q[0]))
        return phi - 1e-10 * phi0

    ev_margin.terminal = True
    ev_support.terminal = True

    for s0, s1 in zip(knots[:-1], knots[1:]):
        sol = solve_ivp(rhs_wrapped, (s0, s1), [state], rtol=ODE_RTOL,
                        atol=1e-12 * start_bound, method="RK45",
                        events=[ev_margin, ev_support])
        if sol.status == 1:
            clip_note = (
                f"continuation clipped at {sol.t[-1]:g}: denominator or support "
                "margin reached (consistency condition at the boundary)"
            )
            break
        if not sol.success:
            raise NumericalError(f"boundary continuation failed: {sol.message}")
        state = float(sol.y[0, -1])
        if logderiv is not None:
            state = _project(side, s1, state, p, logderiv)
        out_free.append(s1)
        out_bound.append(state)

    if len(out_free) < 2:
        raise NumericalError("boundary continuation made no progress")
    free = np.asarray(out_free)
    bound = np.asarray(out_bound)
    if free[0] > free[-1]:
        free, bound = free[::-1], bound[::-1]
    label = "x_star" if side == "put" else "y_star"
    return BoundaryCurve(knots=free, values=bound, label=label,
                         clip_note=clip_note)


def _project(side, s, q, p, logderiv):
    if side == "put":
        phi = float(p.value(q, s))
        dxv = float(p.dx(q, s))
        F = float(p.fit_ratio_x(q, s)) - 1.0 / float(logderiv.u(q))
        dF = 1.0 - phi * float(p.dxx(q, s)) / dxv**2 \
            + float(logderiv.du(q)) / float(logderiv.u(q)) ** 2
    else:
        phi = float(p.value(s, q))
        dyv = float(p.dy(s, q))
        F = float(p.fit_ratio_y(s, q)) - 1.0 / float(logderiv.u(q))
        dF = 1.0 - phi * float(p.dyy(s, q)) / dyv**2 \
            + float(logderiv.du(q)) / float(logderiv.u(q)) ** 2
    return q - F / dF


def put_boundary_ode(y_start: float, x_start: float, y_end: float,
                     sigma: VolCurve, p: Payoff, m: MarketParams, *,
                     logderiv: LogDerivCurve | None = None,
                     num_out: int = 257) -> BoundaryCurve:
    """Continue x*(y) from a known point by integrating its ODE.

    When ``logderiv`` is supplied, each output knot is projected back
    onto the smooth-fit equation by one Newton step, suppressing drift
    over long spans.
    """
    return _continuation("put", float(y_start), float(x_start), float(y_end),
                         p, sigma, m, logderiv, num_out)


def call_boundary_ode(x_start: float, y_start: float, x_end: float,
                      eta: VolCurve, p: Payoff, m: MarketParams, *,
                      logderiv: LogDerivCurve | None = None,
                      num_out: int = 257) -> BoundaryCurve:
    """Continue y*(x) from a known point by integrating its ODE."""
    return _continuation("call", float(x_start), float(y_start), float(x_end),
                         p, eta, m, logderiv, num_out)
