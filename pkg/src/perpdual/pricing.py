"""Perpetual prices from fundamental solutions, and an independent
finite-maturity pricer used to cross-check them.

The perpetual put is phi(x*(y), y) * f(x)/f(x*(y)) in the continuation
region and the payoff at or below the boundary; the perpetual call
mirrors this with g.  The finite-maturity route never touches f, g, or
the boundary machinery: it solves the American obstacle problem in
log-price coordinates with Crank-Nicolson stepping, a Rannacher start,
and projected SOR, so agreement between the two is a genuine check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import call_boundary_at, put_boundary_at
from .errors import ConfigError, NumericalError
from .fundamental import LogDerivCurve
from .market import MarketParams
from .payoff import Payoff
from .volatility import VolCurve


@dataclass(frozen=True)
class PerpetualQuote:
    price: float
    boundary_point: float
    in_exercise_region: bool


def perpetual_put_price(x: float, y: float, p: Payoff,
                        u: LogDerivCurve) -> PerpetualQuote:
    """Perpetual put-style value sup E[e^{-r tau} phi(X_tau, y)]."""
    x, y = float(x), float(y)
    X = float(p.edge_x(y))
    if X == 0.0:
        return PerpetualQuote(0.0, 0.0, True)
    x_star = put_boundary_at(y, p, u)
    if x <= x_star:
        return PerpetualQuote(float(p.value(x, y)), x_star, True)
    price = float(p.value(x_star, y)) * float(u.ratio(x, x_star))
    return PerpetualQuote(price, x_star, False)


def perpetual_call_price(y: float, x: float, p: Payoff,
                         v: LogDerivCurve) -> PerpetualQuote:
    """Perpetual call-style value sup E[e^{-delta tau} phi(x, Y_tau)]."""
    x, y = float(x), float(y)
    Y = float(p.edge_y(x))
    if not np.isfinite(Y):
        return PerpetualQuote(0.0, float("inf"), False)
    y_star = call_boundary_at(x, p, v)
    if y >= y_star:
        return PerpetualQuote(float(p.value(x, y)), y_star, True)
    price = float(p.value(x, y_star)) * float(v.ratio(y, y_star))
    return PerpetualQuote(price, y_star, False)


@dataclass(frozen=True)
class FDGrid:
    """Finite-difference resolution controls.

    ``num_steps`` defaults to 200 per unit maturity (minimum 100); the
    spatial domain spans ``width_sigmas`` standard deviations either
    side of the spot plus enough room to contain the payoff kink.
    """

    num_nodes: int = 801
    num_steps: int | None = None
    width_sigmas: float = 8.0
    rannacher_steps: int = 2
    psor_tol: float = 1e-10
    psor_omega: float = 1.2
    psor_max_iter: int = 2000

    def __post_init__(self) -> None:
        if self.num_nodes < 200:
            raise ConfigError(f"num_nodes must be >= 200, got {self.num_nodes}")
        if not (0.0 < self.psor_omega < 2.0):
            raise ConfigError("psor_omega must lie in (0, 2)")

    def steps_for(self, T: float) -> int:
        if self.num_steps is not None:
            return self.num_steps
        return max(100, int(round(200.0 * T)))


def finite_maturity_curve(maturities, spot: float, strike: float, p: Payoff,
                          vol: VolCurve, m: MarketParams, side: str = "put",
                          grid: FDGrid | None = None) -> np.ndarray:
    """American values at several maturities from one backward sweep.

    ``side="put"``: PDE in the x variable, discount r, drift (r - delta),
    obstacle phi(., strike); ``spot`` is the x position.  ``side="call"``:
    PDE in the y variable, discount delta, drift (delta - r), obstacle
    phi(strike_x, .); here ``spot`` is the y position and ``strike`` the
    fixed x.  Maturities snap to the nearest time step.
    """
    grid = grid or FDGrid()
    maturities = np.atleast_1d(np.asarray(maturities, dtype=float))
    if np.any(maturities < 0.0):
        raise ConfigError("maturities must be nonnegative")
    T = float(np.max(maturities))
    if T == 0.0:
        val = _obstacle_value(side, spot, strike, p)
        return np.full(maturities.shape, val)

    n_steps = grid.steps_for(T)
    dt = T / n_steps
    s, phi_vec, sig_vec, disc, drift = _fd_setup(side, spot, strike, p, vol,
                                                 m, T, grid)
    h = s[1] - s[0]
    alpha = 0.5 * sig_vec**2 / h**2
    beta = (drift - 0.5 * sig_vec**2) / (2.0 * h)
    lower = alpha - beta
    upper = alpha + beta
    diag = -2.0 * alpha - disc

    V = phi_vec.copy()
    center = (len(s) - 1) // 2
    step_idx = np.clip(np.rint(maturities / dt).astype(int), 0, n_steps)
    out = np.empty(maturities.shape)
    out[step_idx == 0] = phi_vec[center]

    for k in range(1, n_steps + 1):
        theta = 1.0 if k <= grid.rannacher_steps else 0.5
        rhs = V.copy()
        if theta < 1.0:
            w = (1.0 - theta) * dt
            rhs[1:-1] = V[1:-1] + w * (lower[1:-1] * V[:-2]
                                       + diag[1:-1] * V[1:-1]
                                       + upper[1:-1] * V[2:])
        V = _psor_step(V, rhs, phi_vec, lower, diag, upper, theta * dt, grid)
        out[step_idx == k] = V[center]
    return out


def finite_maturity_price(T: float, spot: float, strike: float, p: Payoff,
                          vol: VolCurve, m: MarketParams, side: str = "put",
                          grid: FDGrid | None = None) -> float:
    """American value at a single maturity; see finite_maturity_curve."""
    return float(finite_maturity_curve([T], spot, strike, p, vol, m, side, grid)[0])


def _obstacle_value(side, spot, strike, p):
    if side == "put":
        return float(p.value(spot, strike))
    return float(p.value(strike, spot))


def _fd_setup(side, spot, strike, p, vol, m, T, grid):
    if side not in ("put", "call"):
        raise ConfigError(f"side must be 'put' or 'call', got {side!r}")
    spot, strike = float(spot), float(strike)
    mu = np.log(spot)
    if side == "put":
        kink = float(p.edge_x(strike))
        disc, drift = m.r, m.r - m.delta
    else:
        kink = float(p.edge_y(strike))
        disc, drift = m.delta, m.delta - m.r
    half = grid.width_sigmas * vol.upper_bound * np.sqrt(max(T, 0.25)) \
        + abs(np.log(kink) - mu) + 1.0
    s = mu + np.linspace(-half, half, grid.num_nodes)
    nodes = np.exp(s)
    if side == "put":
        phi_vec = np.asarray(p.value(nodes, strike), dtype=float)
    else:
        phi_vec = np.asarray(p.value(strike, nodes), dtype=float)
    sig_vec = np.asarray(vol.value(nodes), dtype=float) + np.zeros_like(nodes)
    return s, phi_vec, sig_vec, disc, drift


def _psor_step(V, rhs, phi_vec, lower, diag, upper, wdt, grid):
    """One implicit solve (I - wdt L) V = rhs with V >= phi, by projected
    SOR in red-black ordering so the sweeps vectorize."""
    d = 1.0 - wdt * diag
    lo = -wdt * lower
    up = -wdt * upper
    V = np.maximum(V, phi_vec)
    # Dirichlet ends: exercise value on the deep side, zero far out; both
    # are already encoded in phi_vec and preserved by skipping the ends.
    n = len(V)
    interior = np.arange(1, n - 1)
    reds = interior[::2]
    blacks = interior[1::2]
    omega = grid.psor_omega
    for _ in range(grid.psor_max_iter):
        delta_max = 0.0
        for idx in (reds, blacks):
            gs = (rhs[idx] - lo[idx] * V[idx - 1] - up[idx] * V[idx + 1]) / d[idx]
            new = np.maximum(phi_vec[idx], V[idx] + omega * (gs - V[idx]))
            delta_max = max(delta_max, float(np.max(np.abs(new - V[idx]))))
            V[idx] = new
        if delta_max <= grid.psor_tol:
            return V
    raise NumericalError(
        f"projected SOR did not converge within {grid.psor_max_iter} iterations "
        f"(last update {delta_max:.3e})"
    )
