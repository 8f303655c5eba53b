"""Fundamental solutions of the two pricing ODEs, in log-derivative form.

The put side needs the positive, nonincreasing, convex solution f of

    (1/2) sigma(x)^2 x^2 f'' + (r - delta) x f' - r f = 0,

the call side the positive, nondecreasing, convex solution g of the same
equation with (r, delta) exchanged.  Prices only ever use ratios
f(x1)/f(x2), so instead of f itself we solve for u = f'/f.  Writing
w(t) = x u(x) with t = ln x turns the Riccati equation for u into

    w' = w - w^2 - (2 / sigma^2(e^t)) ((r - delta) w - r),

whose fixed points for frozen sigma are exactly the roots of the
constant-vol characteristic quadratic: the negative root a(sigma) and a
root > 1.  The a-root repels forward in t and attracts backward, so the
f-curve is integrated backward from the far field with w = a(sigma(x_hi));
deviations then contract toward the local a(sigma(x)) at rate equal to
the root gap.  The g-curve mirrors this: its fixed point b(eta) > 1
attracts forward in t, so it is integrated forward from the near field
with z = b(eta(x_lo)).

f then satisfies f(x1)/f(x2) = exp(int_{x2}^{x1} u ds), evaluated by the
trapezoid rule in log-x on the stored grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import NumericalError
from .market import MarketParams
from .volatility import VolCurve, WINDOW

NUM_NODES = 4096
RTOL = 1e-10
RESIDUAL_TOL = 1e-8


def exponent_a(vol, m: MarketParams):
    """Negative root a(vol) of (1/2) v^2 a (a - 1) + (r - delta) a - r = 0.

    Computed as -2r / (q + sqrt(q^2 + 2 r v^2)) with q = delta - r + v^2/2,
    which avoids the cancellation the textbook quadratic formula hits when
    q is large and positive.  Increasing in vol, with limit 0 at vol -> inf.
    """
    v2 = np.asarray(vol, dtype=float) ** 2
    q = m.delta - m.r + 0.5 * v2
    return -2.0 * m.r / (q + np.sqrt(q * q + 2.0 * m.r * v2))


def exponent_b(vol, m: MarketParams):
    """Root > 1 of (1/2) v^2 b (b - 1) + (delta - r) b - delta = 0.

    Equals 1 - a(vol) for the same (r, delta); decreasing in vol.
    """
    return 1.0 - exponent_a(vol, m)


def quadratic_residual_a(a, vol, m: MarketParams):
    v2 = np.asarray(vol, dtype=float) ** 2
    a = np.asarray(a, dtype=float)
    return 0.5 * v2 * a * (a - 1.0) + (m.r - m.delta) * a - m.r


def quadratic_residual_b(b, vol, m: MarketParams):
    v2 = np.asarray(vol, dtype=float) ** 2
    b = np.asarray(b, dtype=float)
    return 0.5 * v2 * b * (b - 1.0) + (m.delta - m.r) * b - m.delta


@dataclass
class LogDerivCurve:
    """Log-derivative u = f'/f (side "f") or v = g'/g (side "g") on a grid.

    Stores w = x u on a uniform log-x grid together with the exact ODE
    slopes, interpolated by a cubic Hermite spline; ``ratio`` integrates
    w by the trapezoid rule.  ``residual_max`` is the largest Riccati
    residual over interior nodes, measured with an independent
    fourth-order finite difference of the stored values, so it actually
    certifies the solve rather than restating the integrator's own RHS.
    """

    side: str
    grid: np.ndarray
    w: np.ndarray
    w_slope: np.ndarray
    market: MarketParams
    vol: VolCurve
    residual_max: float

    def __post_init__(self) -> None:
        self._t = np.log(self.grid)
        self._spline = CubicHermiteSpline(self._t, self.w, self.w_slope)
        dt = np.diff(self._t)
        self._W = np.concatenate(
            ([0.0], np.cumsum(0.5 * dt * (self.w[1:] + self.w[:-1])))
        )

    @property
    def vol_bound(self) -> float:
        return self.vol.upper_bound

    def _tq(self, x):
        t = np.log(np.asarray(x, dtype=float))
        if np.any(t < self._t[0] - 1e-12) or np.any(t > self._t[-1] + 1e-12):
            raise NumericalError(
                f"query outside the solved window [{self.grid[0]:g}, {self.grid[-1]:g}]; "
                "window too narrow"
            )
        return np.clip(t, self._t[0], self._t[-1])

    def xu(self, x):
        """w(x) = x u(x)."""
        return self._spline(self._tq(x))

    def u(self, x):
        """u(x) = f'/f (or g'/g) at x."""
        x = np.asarray(x, dtype=float)
        return self._spline(self._tq(x)) / x

    def du(self, x):
        """du/dx, from the known dw/dt: u' = (w' - w) / x^2."""
        t = self._tq(x)
        x = np.asarray(x, dtype=float)
        return (self._spline(t, 1) - self._spline(t)) / (x * x)

    def _integral_to(self, t):
        """int w dt from the grid start, trapezoid consistent off-node."""
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, len(self._t) - 2)
        ti = self._t[i]
        return self._W[i] + 0.5 * (t - ti) * (self.w[i] + self._spline(t))

    def ratio(self, x1, x2):
        """f(x1)/f(x2) = exp(int_{x2}^{x1} u ds)."""
        t1 = self._tq(x1)
        t2 = self._tq(x2)
        return np.exp(self._integral_to(t1) - self._integral_to(t2))

    def table(self):
        """(x, u) columns for export."""
        return self.grid, self.w / self.grid


def _fd4_slope(w: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central first derivative at nodes [2, n-3]."""
    return (w[:-4] - 8.0 * w[1:-3] + 8.0 * w[3:-1] - w[4:]) / (12.0 * h)


def _solve_log_derivative(side, volcurve, m, window, num_nodes, rtol, residual_tol):
    t_lo, t_hi = np.log(window[0]), np.log(window[1])
    t = np.linspace(t_lo, t_hi, num_nodes)
    r, delta = m.r, m.delta

    if side == "f":
        # drift coefficient (r - delta), discount r, far-field start
        c1, c0 = r - delta, r
        t0, t1, w0 = t_hi, t_lo, float(exponent_a(volcurve.value(window[1]), m))
        t_eval = t[::-1]
    else:
        c1, c0 = delta - r, delta
        t0, t1, w0 = t_lo, t_hi, float(exponent_b(volcurve.value(window[0]), m))
        t_eval = t

    def rhs(ti, wi):
        s2 = volcurve.value(np.exp(ti)) ** 2
        return wi - wi * wi - 2.0 * (c1 * wi - c0) / s2

    sol = solve_ivp(rhs, (t0, t1), [w0], t_eval=t_eval, rtol=rtol, atol=1e-13,
                    method="RK45")
    if not sol.success or sol.t.shape[0] != num_nodes:
        reached = np.exp(sol.t[-1]) if sol.t.size else float("nan")
        raise NumericalError(
            f"log-derivative solve ({side}-side) failed near x = {reached:g}: "
            f"{sol.message}"
        )
    w = sol.y[0][::-1].copy() if side == "f" else sol.y[0].copy()
    if not np.all(np.isfinite(w)):
        raise NumericalError(f"log-derivative solve ({side}-side) produced non-finite values")
    if side == "f" and not np.all(w < 0.0):
        i = int(np.argmax(w >= 0.0))
        raise NumericalError(f"f-side log-derivative lost its sign at x = {np.exp(t[i]):g}")
    if side == "g" and not np.all(w > 0.0):
        i = int(np.argmax(w <= 0.0))
        raise NumericalError(f"g-side log-derivative lost its sign at x = {np.exp(t[i]):g}")

    slope = np.array([rhs(ti, wi) for ti, wi in zip(t, w)])
    h = t[1] - t[0]
    s2_mid = volcurve.value(np.exp(t[2:-2])) ** 2
    w_mid = w[2:-2]
    # the 4th-order stencil assumes a smooth coefficient; a tabulated
    # vol kinks where clamping starts and its interpolant has one-sided
    # curvature over the outermost knot intervals, so stencils near a
    # clamp edge are excluded (the solve itself only needs continuity)
    t_mid = t[2:-2]
    smooth = np.ones(w_mid.shape, dtype=bool)
    standoff = 3.0 * max(h, getattr(volcurve, "edge_log_width", 0.0))
    for edge in getattr(volcurve, "clamp_edges", ()):
        smooth &= np.abs(t_mid - np.log(edge)) > standoff
    resid = 0.5 * s2_mid * (_fd4_slope(w, h) - w_mid + w_mid * w_mid) \
        + c1 * w_mid - c0
    resid_checked = np.where(smooth, np.abs(resid), 0.0)
    residual_max = float(np.max(resid_checked))
    if residual_max > residual_tol:
        i = int(np.argmax(resid_checked))
        raise NumericalError(
            f"Riccati residual {residual_max:.3e} exceeds {residual_tol:.1e} "
            f"at x = {np.exp(t[2 + i]):g} ({side}-side)"
        )

    # convexity surrogate f''/f = u' + u^2 > 0, with u' from the finite
    # difference rather than the ODE identity
    conv = (_fd4_slope(w, h) - w_mid + w_mid * w_mid)
    if not np.all(conv[smooth] > 0.0):
        i = int(np.argmax(np.where(smooth, conv, 1.0) <= 0.0))
        raise NumericalError(
            f"convexity surrogate u' + u^2 <= 0 at x = {np.exp(t[2 + i]):g} ({side}-side)"
        )

    grid = np.exp(t)
    return LogDerivCurve(side=side, grid=grid, w=w, w_slope=slope, market=m,
                         vol=volcurve, residual_max=residual_max)


def solve_log_derivative_f(sigma: VolCurve, m: MarketParams, window=WINDOW,
                           num_nodes: int = NUM_NODES, rtol: float = RTOL,
                           residual_tol: float = RESIDUAL_TOL) -> LogDerivCurve:
    """u = f'/f on a log grid, integrated backward from the far field."""
    return _solve_log_derivative("f", sigma, m, window, num_nodes, rtol, residual_tol)


def solve_log_derivative_g(eta: VolCurve, m: MarketParams, window=WINDOW,
                           num_nodes: int = NUM_NODES, rtol: float = RTOL,
                           residual_tol: float = RESIDUAL_TOL) -> LogDerivCurve:
    """v = g'/g on a log grid, integrated forward from the near field."""
    return _solve_log_derivative("g", eta, m, window, num_nodes, rtol, residual_tol)


def f_ratio(u: LogDerivCurve, x1, x2):
    """f(x1)/f(x2) from a solved f-side curve."""
    return u.ratio(x1, x2)


def g_ratio(v: LogDerivCurve, y1, y2):
    """g(y1)/g(y2) from a solved g-side curve."""
    return v.ratio(y1, y2)
