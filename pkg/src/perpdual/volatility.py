"""Local volatility curves: constant, closed-form, and tabulated.

Every curve exposes ``value(x)`` on (0, inf), a strict upper bound
``upper_bound`` used by boundary brackets, and a sampled lower bound.
Curves whose sampled minimum falls below ``1e-4 * upper_bound`` are
rejected at construction: the log-derivative solver divides by sigma^2
and a near-vanishing vol silently destroys its error control.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import AdmissibilityError

WINDOW = (1e-4, 1e4)
MIN_VOL_FRACTION = 1e-4


class ClampWarning(RuntimeWarning):
    """A tabulated vol was queried outside its knot span and clamped."""


class VolCurve:
    """Interface shared by the three curve kinds."""

    kind: str = ""

    def value(self, x):
        raise NotImplementedError

    @property
    def clamp_edges(self):
        """Points where the curve stops being smooth (none by default)."""
        return ()

    @property
    def upper_bound(self) -> float:
        raise NotImplementedError

    @property
    def lower_bound(self) -> float:
        raise NotImplementedError

    def _check_floor(self) -> None:
        if self.lower_bound < MIN_VOL_FRACTION * self.upper_bound:
            raise AdmissibilityError(
                "volatility curve spans more than 1e4x between min and max "
                f"(min {self.lower_bound:.3e}, max bound {self.upper_bound:.3e}); "
                "the log-derivative solve would lose its error control"
            )


@dataclass(frozen=True)
class ConstantVol(VolCurve):
    level: float
    kind: str = field(default="constant", init=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.level) and self.level > 0.0):
            raise AdmissibilityError(f"constant vol must be positive, got {self.level}")

    def value(self, x):
        return self.level + 0.0 * np.asarray(x, dtype=float)

    @property
    def upper_bound(self) -> float:
        return self.level * (1.0 + 1e-12)

    @property
    def lower_bound(self) -> float:
        return self.level


class TabulatedVol(VolCurve):
    """Monotone-cubic (PCHIP) interpolation of (x, sigma) knots in log-x.

    Queries outside the knot span clamp to the edge values; a warning is
    emitted once so silent extrapolation does not go unnoticed.  PCHIP
    never overshoots the local data range, so the knot extrema bound the
    whole interpolant.
    """

    kind = "tabulated"

    def __init__(self, x, values):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2:
            raise AdmissibilityError("need matching 1-d knot arrays with >= 2 points")
        if np.any(x <= 0.0) or np.any(np.diff(x) <= 0.0):
            raise AdmissibilityError("knot abscissae must be positive and increasing")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise AdmissibilityError("knot vol values must be positive and finite")
        self.x = x
        self.values = values
        self._logx = np.log(x)
        self._interp = PchipInterpolator(self._logx, values, extrapolate=False)
        self._check_floor()

    def value(self, x):
        x = np.asarray(x, dtype=float)
        t = np.log(x)
        out = self._interp(np.clip(t, self._logx[0], self._logx[-1]))
        if np.any(t < self._logx[0]) or np.any(t > self._logx[-1]):
            warnings.warn(
                "tabulated vol queried outside its knot span; clamping to edge values",
                ClampWarning,
                stacklevel=2,
            )
        return out if out.ndim else float(out)

    @property
    def upper_bound(self) -> float:
        return float(np.max(self.values)) * (1.0 + 1e-12)

    @property
    def lower_bound(self) -> float:
        return float(np.min(self.values))

    @property
    def clamp_edges(self):
        """Span ends where the clamped extension kinks the curve."""
        return float(self.x[0]), float(self.x[-1])

    @property
    def edge_log_width(self) -> float:
        # curvature of the interpolant is one-sided over the outermost
        # knot intervals, so smoothness checks should stand off by this
        lx = np.log(self.x)
        return float(max(lx[1] - lx[0], lx[-1] - lx[-2]))


class ClosedFormVol(VolCurve):
    """Wraps an analytic sigma(x) expression.

    The upper bound is estimated as the supremum over a dense log grid
    on ``window`` (inflated by 1e-9); pass ``bound_hint`` when the exact
    supremum is known.
    """

    kind = "closed_form"

    def __init__(self, fn, name: str = "", params: dict | None = None,
                 window=WINDOW, bound_hint: float | None = None):
        self.fn = fn
        self.name = name
        self.params = dict(params or {})
        self.window = (float(window[0]), float(window[1]))
        xs = np.geomspace(self.window[0], self.window[1], 4097)
        vals = np.asarray(fn(xs), dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            bad = xs[~(np.isfinite(vals) & (vals > 0.0))][:3]
            raise AdmissibilityError(
                f"closed-form vol not positive/finite on the window, e.g. at x={bad}"
            )
        self._sup = float(np.max(vals))
        self._inf = float(np.min(vals))
        if bound_hint is not None:
            if bound_hint < self._sup:
                raise AdmissibilityError(
                    f"bound_hint {bound_hint} is below the sampled supremum {self._sup}"
                )
            self._sup = float(bound_hint)
        self._check_floor()

    def value(self, x):
        return self.fn(np.asarray(x, dtype=float))

    @property
    def upper_bound(self) -> float:
        return self._sup * (1.0 + 1e-9)

    @property
    def lower_bound(self) -> float:
        return self._inf
