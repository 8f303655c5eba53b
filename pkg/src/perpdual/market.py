"""Market parameters for the two-sided discounting model."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class MarketParams:
    """Riskless rate ``r`` and dividend yield ``delta``.

    ``r`` discounts the put side, ``delta`` the call side; the two sides
    swap their roles under dualization.  ``r`` must be positive, ``delta``
    nonnegative.
    """

    r: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not (self.r > 0.0):
            raise ConfigError(f"r must be positive, got {self.r}")
        if not (self.delta >= 0.0):
            raise ConfigError(f"delta must be nonnegative, got {self.delta}")
