"""Exception types shared across the package.

The split matters to the command line front end: configuration problems
exit with status 2, numerical failures with status 3.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid user input: parameters out of range, malformed config."""


class AdmissibilityError(ConfigError):
    """A structural hypothesis on payoff or volatility is violated."""


class NumericalError(RuntimeError):
    """A numerical invariant failed; the message names the invariant."""


class BracketError(NumericalError):
    """Root bracket endpoints do not straddle a sign change."""
