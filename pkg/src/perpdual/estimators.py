"""Estimator-style front ends over the pricing and calibration cores.

Both follow the usual fit/predict shape: constructor arguments are
plain configuration, fit() does the expensive solve once and stores
everything learned in trailing-underscore attributes, predict() is
cheap and vectorized.  The pricer "learns" nothing statistical; what
fit() buys is a single fundamental-ODE solve whose window covers all
requested quotes, so batch pricing amortizes it.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .calibration import PriceCurve, calibrate
from .errors import ConfigError
from .fundamental import (exponent_a, exponent_b, solve_log_derivative_f,
                          solve_log_derivative_g)
from .market import MarketParams
from .payoff import CallPut, Payoff
from .pricing import perpetual_call_price, perpetual_put_price
from .validation import as_spot_strike_array, check_positive
from .volatility import ClampWarning, VolCurve

WINDOW_MARGIN = 100.0


class PerpetualOptionPricer(BaseEstimator):
    """Prices perpetual options under a fixed volatility curve.

    Parameters are the market and model: payoff, volatility curve,
    rates, and which side ("put" prices at (spot, strike) under the
    x-side equation, "call" at (strike-like, spot) under the y-side
    one).  fit(X) with (n, 2) rows of (spot, strike) solves the
    fundamental ODE over a window covering every row; predict(X)
    prices rows against the stored solution.
    """

    def __init__(self, payoff: Payoff | None = None,
                 vol: VolCurve | None = None, r: float = 0.05,
                 delta: float = 0.0, side: str = "put"):
        self.payoff = payoff
        self.vol = vol
        self.r = r
        self.delta = delta
        self.side = side

    def _checked(self):
        if self.vol is None:
            raise ConfigError("vol must be a VolCurve, got None")
        if self.side not in ("put", "call"):
            raise ConfigError(f"side must be 'put' or 'call', got {self.side!r}")
        payoff = self.payoff if self.payoff is not None else CallPut()
        return payoff, MarketParams(r=self.r, delta=self.delta)

    def fit(self, X, y=None):
        """Solve the fundamental ODE over a window covering X."""
        X = as_spot_strike_array("X", X)
        payoff, m = self._checked()
        spots, strikes = X[:, 0], X[:, 1]
        if self.side == "put":
            # constant-vol boundary sits at alpha * edge; the 100x pad
            # absorbs whatever a varying vol moves it by
            a_bar = float(exponent_a(self.vol.upper_bound, m))
            alpha = a_bar / (a_bar - 1.0)
            edges = np.asarray(payoff.edge_x(strikes), dtype=float)
            edges = edges[np.isfinite(edges) & (edges > 0.0)]
            pts = np.concatenate([spots, edges, alpha * edges])
            self.logderiv_ = solve_log_derivative_f(
                self.vol, m,
                (pts.min() / WINDOW_MARGIN, pts.max() * WINDOW_MARGIN))
        else:
            b_bar = float(exponent_b(self.vol.upper_bound, m))
            beta = b_bar / (b_bar - 1.0)
            edges = np.asarray(payoff.edge_y(strikes), dtype=float)
            edges = edges[np.isfinite(edges) & (edges > 0.0)]
            pts = np.concatenate([spots, edges, beta * edges])
            self.logderiv_ = solve_log_derivative_g(
                self.vol, m,
                (pts.min() / WINDOW_MARGIN, pts.max() * WINDOW_MARGIN))
        self.payoff_ = payoff
        self.market_ = m
        self.n_features_in_ = 2
        return self

    def quotes(self, X):
        """Full PerpetualQuote per row (price, boundary, region flag)."""
        if not hasattr(self, "logderiv_"):
            raise NotFittedError("call fit before predict")
        X = as_spot_strike_array("X", X)
        if self.side == "put":
            return [perpetual_put_price(s, k, self.payoff_, self.logderiv_)
                    for s, k in X]
        # call side: the spot is the moving y coordinate
        return [perpetual_call_price(s, k, self.payoff_, self.logderiv_)
                for s, k in X]

    def predict(self, X) -> np.ndarray:
        """Perpetual prices for (n, 2) rows of (spot, strike)."""
        return np.array([q.price for q in self.quotes(X)])

    def predict_boundary(self, X) -> np.ndarray:
        """Exercise boundary point for each row of X."""
        return np.array([q.boundary_point for q in self.quotes(X)])


class PerpetualVolCalibrator(BaseEstimator):
    """Recovers the volatility below the spot from perpetual prices.

    fit(X, y) takes strikes in X (shape (n,) or (n, 1)) and observed
    perpetual prices in y, or a single (n, 2) array of (strike, price)
    rows with y omitted.  Fitted attributes: ``exercise_strike_`` (the
    first strike priced at its exercise value), ``dual_vol_`` (the
    strike-side curve), ``boundary_`` (the call-side boundary on
    [x_end, x0]), ``sigma_`` (the recovered volatility), and
    ``diagnostics_``.  predict(X) evaluates sigma_ at spots.
    """

    def __init__(self, payoff: Payoff | None = None, r: float = 0.05,
                 delta: float = 0.0, x0: float = 1.0, smooth: bool = False,
                 x_end: float | None = None):
        self.payoff = payoff
        self.r = r
        self.delta = delta
        self.x0 = x0
        self.smooth = smooth
        self.x_end = x_end

    def fit(self, X, y=None):
        """Run the calibration pipeline on a strike/price table."""
        X = np.asarray(X, dtype=float)
        if y is None:
            if X.ndim != 2 or X.shape[1] != 2:
                raise ConfigError(
                    "without y, X must be (n, 2) rows of (strike, price)")
            strikes, prices = X[:, 0], X[:, 1]
        else:
            strikes = X.reshape(-1)
            prices = np.asarray(y, dtype=float).reshape(-1)
        check_positive("x0", self.x0)
        payoff = self.payoff if self.payoff is not None else CallPut()
        m = MarketParams(r=self.r, delta=self.delta)
        pc = PriceCurve(strikes=strikes, prices=prices, x0=self.x0)
        result = calibrate(pc, payoff, m, smooth=self.smooth,
                           x_end=self.x_end)
        self.exercise_strike_ = result.Y
        self.dual_vol_ = result.sigma_tilde
        self.boundary_ = result.y_star
        self.sigma_ = result.sigma
        self.diagnostics_ = result.diagnostics
        self.n_features_in_ = 1 if y is not None else 2
        return self

    def predict(self, X) -> np.ndarray:
        """Recovered sigma at the given spots."""
        if not hasattr(self, "sigma_"):
            raise NotFittedError("call fit before predict")
        spots = np.asarray(X, dtype=float).reshape(-1)
        if np.any(spots <= 0.0):
            raise ConfigError("spots must be positive")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            return np.asarray(self.sigma_.value(spots), dtype=float)
