"""Two-asset payoff families for perpetual put/call style claims.

Every payoff here has the form ``phi(x, y) = (inner(x, y))^+`` with
``inner`` decreasing in ``x`` and increasing in ``y``.  On the support
``{phi > 0}`` the families satisfy the structural sign conditions the
pricing theory needs: ``d_x phi < 0``, ``d_y phi > 0``, both second
partials ``<= 0``, and the supermodularity margin
``phi * d_xy phi - d_x phi * d_y phi`` is positive.  All of these are
decidable from the family parameters, so violations are rejected at
construction instead of being discovered mid-solve.

Partial derivatives are those of the smooth branch and are only
meaningful on the support; callers keep their evaluation points there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError

# Default evaluation window for admissibility spot checks.
WINDOW = (1e-4, 1e4)


# ---------------------------------------------------------------------------
# Monotone scalar maps used as psi-difference building blocks.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerMap:
    """``psi(u) = coeff * u**power`` on (0, inf)."""

    coeff: float = 1.0
    power: float = 1.0

    def __post_init__(self) -> None:
        if not (self.coeff > 0.0 and self.power > 0.0):
            raise AdmissibilityError(
                f"PowerMap needs coeff > 0 and power > 0, got {self.coeff}, {self.power}"
            )

    def value(self, u):
        return self.coeff * np.asarray(u, dtype=float) ** self.power

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        return self.coeff * self.power * u ** (self.power - 1.0)

    def deriv2(self, u):
        u = np.asarray(u, dtype=float)
        p = self.power
        return self.coeff * p * (p - 1.0) * u ** (p - 2.0)

    def inverse(self, w):
        return (np.asarray(w, dtype=float) / self.coeff) ** (1.0 / self.power)

    @property
    def is_convex(self) -> bool:
        return self.power >= 1.0

    @property
    def is_concave(self) -> bool:
        return self.power <= 1.0

    @property
    def scaling_lower_bound(self) -> bool:
        # psi(alpha u) = alpha**p * psi(u): the bound holds with C = alpha**p.
        return True


@dataclass(frozen=True)
class AffinePowerMap:
    """``psi(u) = coeff * ((u + shift)**power - shift**power)``.

    A power map translated so that psi(0) = 0.  Convexity matches the
    sign of ``power - 1``; the scaling lower bound still holds because
    psi(alpha u)/psi(u) stays pinched between alpha and alpha**power.
    """

    coeff: float = 1.0
    shift: float = 0.0
    power: float = 1.0

    def __post_init__(self) -> None:
        if not (self.coeff > 0.0 and self.power > 0.0 and self.shift >= 0.0):
            raise AdmissibilityError(
                "AffinePowerMap needs coeff > 0, power > 0, shift >= 0, got "
                f"{self.coeff}, {self.power}, {self.shift}"
            )

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return self.coeff * ((u + self.shift) ** self.power - self.shift**self.power)

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        return self.coeff * self.power * (u + self.shift) ** (self.power - 1.0)

    def deriv2(self, u):
        u = np.asarray(u, dtype=float)
        p = self.power
        return self.coeff * p * (p - 1.0) * (u + self.shift) ** (p - 2.0)

    def inverse(self, w):
        w = np.asarray(w, dtype=float)
        return (w / self.coeff + self.shift**self.power) ** (1.0 / self.power) - self.shift

    @property
    def is_convex(self) -> bool:
        return self.power >= 1.0

    @property
    def is_concave(self) -> bool:
        return self.power <= 1.0

    @property
    def scaling_lower_bound(self) -> bool:
        return True


@dataclass(frozen=True)
class ExpMap:
    """``psi(u) = exp(rate * u) - 1``.  Convex; grows too fast for the
    scaling lower bound (psi(alpha u)/psi(u) -> 0), so the inverse
    dualization refuses it as an x-side map."""

    rate: float = 1.0

    def __post_init__(self) -> None:
        if not (self.rate > 0.0):
            raise AdmissibilityError(f"ExpMap needs rate > 0, got {self.rate}")

    def value(self, u):
        return np.expm1(self.rate * np.asarray(u, dtype=float))

    def deriv(self, u):
        return self.rate * np.exp(self.rate * np.asarray(u, dtype=float))

    def deriv2(self, u):
        return self.rate**2 * np.exp(self.rate * np.asarray(u, dtype=float))

    def inverse(self, w):
        return np.log1p(np.asarray(w, dtype=float)) / self.rate

    @property
    def is_convex(self) -> bool:
        return True

    @property
    def is_concave(self) -> bool:
        return False

    @property
    def scaling_lower_bound(self) -> bool:
        return False


# ---------------------------------------------------------------------------
# Payoff families.
# ---------------------------------------------------------------------------


class Payoff:
    """Common interface; see module docstring for the sign conventions."""

    family: str = ""

    @staticmethod
    def _const(c, x, y):
        # constant broadcast against the shape of (x, y)
        return c + 0.0 * np.asarray(x, dtype=float) + 0.0 * np.asarray(y, dtype=float)

    def inner(self, x, y):
        raise NotImplementedError

    def value(self, x, y):
        return np.maximum(self.inner(x, y), 0.0)

    # Smooth-branch partials, valid on the support.
    def dx(self, x, y):
        raise NotImplementedError

    def dy(self, x, y):
        raise NotImplementedError

    def dxx(self, x, y):
        raise NotImplementedError

    def dyy(self, x, y):
        raise NotImplementedError

    def dxy(self, x, y):
        raise NotImplementedError

    def edge_x(self, y):
        """X(y): the x value where phi(., y) hits zero."""
        raise NotImplementedError

    def edge_y(self, x):
        """Y(x): the y value where phi(x, .) leaves zero."""
        raise NotImplementedError

    def fit_ratio_x(self, x, y):
        """phi / d_x phi, in a cancellation-free closed form."""
        return self.value(x, y) / self.dx(x, y)

    def fit_ratio_y(self, x, y):
        """phi / d_y phi."""
        return self.value(x, y) / self.dy(x, y)

    def supermodular_margin(self, x, y):
        """phi * d_xy phi - d_x phi * d_y phi; positive on the support."""
        return self.value(x, y) * self.dxy(x, y) - self.dx(x, y) * self.dy(x, y)


@dataclass(frozen=True)
class CallPut(Payoff):
    """phi(x, y) = (y - x)^+ : exchange of y against x."""

    family: str = field(default="callput", init=False)

    def inner(self, x, y):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def dx(self, x, y):
        return self._const(-1.0, x, y)

    def dy(self, x, y):
        return self._const(1.0, x, y)

    def dxx(self, x, y):
        return self._const(0.0, x, y)

    dyy = dxx
    dxy = dxx

    def edge_x(self, y):
        return np.asarray(y, dtype=float) + 0.0

    def edge_y(self, x):
        return np.asarray(x, dtype=float) + 0.0

    def fit_ratio_x(self, x, y):
        return -(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))

    def fit_ratio_y(self, x, y):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    @property
    def psi_x(self) -> PowerMap:
        return PowerMap(1.0, 1.0)

    @property
    def psi_y(self) -> PowerMap:
        return PowerMap(1.0, 1.0)


@dataclass(frozen=True)
class PowerGamma(Payoff):
    """phi(x, y) = ((y - x)^+)**gamma with gamma in (0, 1]."""

    gamma: float = 1.0
    family: str = field(default="power_gamma", init=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise AdmissibilityError(
                f"PowerGamma needs gamma in (0, 1], got {self.gamma}"
            )

    def inner(self, x, y):
        # only the positive part is ever raised to the power
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def value(self, x, y):
        return np.maximum(self.inner(x, y), 0.0) ** self.gamma

    def dx(self, x, y):
        return -self.gamma * self.inner(x, y) ** (self.gamma - 1.0)

    def dy(self, x, y):
        return self.gamma * self.inner(x, y) ** (self.gamma - 1.0)

    def dxx(self, x, y):
        g = self.gamma
        return g * (g - 1.0) * self.inner(x, y) ** (g - 2.0)

    dyy = dxx

    def dxy(self, x, y):
        g = self.gamma
        return -g * (g - 1.0) * self.inner(x, y) ** (g - 2.0)

    def edge_x(self, y):
        return np.asarray(y, dtype=float) + 0.0

    def edge_y(self, x):
        return np.asarray(x, dtype=float) + 0.0

    def fit_ratio_x(self, x, y):
        return -self.inner(x, y) / self.gamma

    def fit_ratio_y(self, x, y):
        return self.inner(x, y) / self.gamma

    def supermodular_margin(self, x, y):
        # simplifies to gamma * (y - x)**(2 gamma - 2)
        return self.gamma * self.inner(x, y) ** (2.0 * self.gamma - 2.0)


@dataclass(frozen=True)
class PowerPair(Payoff):
    """phi(x, y) = (alpha * y**gamma_p - x**gamma)^+.

    ``gamma >= 1`` keeps the x-side convex, ``gamma_p in (0, 1]`` keeps
    the y-side concave; ``alpha > 0`` scales the y-side.
    """

    alpha: float = 1.0
    gamma: float = 1.0
    gamma_p: float = 1.0
    family: str = field(default="power_pair", init=False)

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0):
            raise AdmissibilityError(f"PowerPair needs alpha > 0, got {self.alpha}")
        if not (self.gamma >= 1.0):
            raise AdmissibilityError(
                f"PowerPair needs gamma >= 1 (convex x-side), got {self.gamma}"
            )
        if not (0.0 < self.gamma_p <= 1.0):
            raise AdmissibilityError(
                f"PowerPair needs gamma_p in (0, 1] (concave y-side), got {self.gamma_p}"
            )

    def inner(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.alpha * y**self.gamma_p - x**self.gamma

    def dx(self, x, y):
        x = np.asarray(x, dtype=float)
        return -self.gamma * x ** (self.gamma - 1.0)

    def dy(self, x, y):
        y = np.asarray(y, dtype=float)
        return self.alpha * self.gamma_p * y ** (self.gamma_p - 1.0)

    def dxx(self, x, y):
        x = np.asarray(x, dtype=float)
        g = self.gamma
        return -g * (g - 1.0) * x ** (g - 2.0)

    def dyy(self, x, y):
        y = np.asarray(y, dtype=float)
        gp = self.gamma_p
        return self.alpha * gp * (gp - 1.0) * y ** (gp - 2.0)

    def dxy(self, x, y):
        return self._const(0.0, x, y)

    def edge_x(self, y):
        y = np.asarray(y, dtype=float)
        return (self.alpha * y**self.gamma_p) ** (1.0 / self.gamma)

    def edge_y(self, x):
        x = np.asarray(x, dtype=float)
        return (x**self.gamma / self.alpha) ** (1.0 / self.gamma_p)

    def fit_ratio_x(self, x, y):
        return self.inner(x, y) / self.dx(x, y)

    def fit_ratio_y(self, x, y):
        return self.inner(x, y) / self.dy(x, y)

    @property
    def psi_x(self) -> PowerMap:
        return PowerMap(1.0, self.gamma)

    @property
    def psi_y(self) -> PowerMap:
        return PowerMap(self.alpha, self.gamma_p)


@dataclass(frozen=True)
class PsiDifference(Payoff):
    """phi(x, y) = (psi_y(y) - psi_x(x))^+ from two monotone maps.

    psi_x must be increasing and convex with psi_x(0+) = 0; psi_y must
    be increasing and concave with psi_y(0+) = 0 and psi_y(inf) = inf.
    Both are supplied as closed-form descriptors so these properties are
    checked by inspection, not by sampling a black box.
    """

    psi_x: PowerMap | AffinePowerMap | ExpMap
    psi_y: PowerMap | AffinePowerMap | ExpMap
    family: str = field(default="psi_difference", init=False)

    def __post_init__(self) -> None:
        if not self.psi_x.is_convex:
            raise AdmissibilityError("psi_x must be convex")
        if not self.psi_y.is_concave:
            raise AdmissibilityError("psi_y must be concave")

    def inner(self, x, y):
        return self.psi_y.value(y) - self.psi_x.value(x)

    def dx(self, x, y):
        return -self.psi_x.deriv(x)

    def dy(self, x, y):
        return self.psi_y.deriv(y)

    def dxx(self, x, y):
        return -self.psi_x.deriv2(x)

    def dyy(self, x, y):
        return self.psi_y.deriv2(y)

    def dxy(self, x, y):
        return self._const(0.0, x, y)

    def edge_x(self, y):
        return self.psi_x.inverse(self.psi_y.value(y))

    def edge_y(self, x):
        return self.psi_y.inverse(self.psi_x.value(x))

    def fit_ratio_x(self, x, y):
        return self.inner(x, y) / (-self.psi_x.deriv(x))

    def fit_ratio_y(self, x, y):
        return self.inner(x, y) / self.psi_y.deriv(y)

    def supermodular_margin(self, x, y):
        return self.psi_x.deriv(x) * self.psi_y.deriv(y)


def admissibility_report(p: Payoff, window=WINDOW, n: int = 41) -> dict:
    """Sampled sanity check of the sign conditions on the support.

    Returns min/max margins over an n-by-n log grid restricted to the
    support.  Structural constraints already guarantee these; the report
    exists so custom psi combinations can be eyeballed.
    """
    xs = np.geomspace(window[0], window[1], n)
    ys = np.geomspace(window[0], window[1], n)
    X, Y = np.meshgrid(xs, ys)
    mask = p.value(X, Y) > 0
    if not np.any(mask):
        raise AdmissibilityError("payoff support misses the evaluation window")
    xs_, ys_ = X[mask], Y[mask]
    return {
        "max_dx": float(np.max(p.dx(xs_, ys_))),
        "min_dy": float(np.min(p.dy(xs_, ys_))),
        "max_dxx": float(np.max(p.dxx(xs_, ys_))),
        "max_dyy": float(np.max(p.dyy(xs_, ys_))),
        "min_supermodular_margin": float(np.min(p.supermodular_margin(xs_, ys_))),
        "min_edge_x": float(np.min(p.edge_x(ys))),
    }
