"""Perpetual American options under local volatility: pricing, exercise
boundaries, dual volatility pairs, and calibration from perpetual prices.

The payoff is a two-variable function phi(x, y); the put side freezes y
and optimally stops x, the call side freezes x and stops y.  A dual
pair (sigma, eta) makes the two perpetual values agree, and that
identity is what everything here is built around.
"""

from .boundary import (BoundaryCurve, call_boundary_at, call_boundary_curve,
                       call_boundary_ode, call_bracket, put_boundary_at,
                       put_boundary_curve, put_boundary_ode, put_bracket)
from .calibration import (CalibrationResult, PriceCurve, UniquenessReport,
                          backward_boundary_solve, calibrate,
                          detect_exercise_strike, recover_dual_vol_from_prices,
                          recover_primal_vol, uniqueness_check)
from .duality import (AnalyticExampleParams, ConditionMargin, DualPair,
                      DualVolResult, DualityReport, analytic_pair_gamma,
                      analytic_pair_psi, build_dual_pair, dual_vol_callput,
                      dual_vol_for, dual_vol_gamma, dual_vol_psi,
                      inverse_dual_vol_callput, inverse_dual_vol_gamma,
                      inverse_dual_vol_psi, solve_dual_constant_vol,
                      verify_duality)
from .errors import (AdmissibilityError, BracketError, ConfigError,
                     NumericalError)
from .estimators import PerpetualOptionPricer, PerpetualVolCalibrator
from .fundamental import (LogDerivCurve, exponent_a, exponent_b, f_ratio,
                          g_ratio, quadratic_residual_a, quadratic_residual_b,
                          solve_log_derivative_f, solve_log_derivative_g)
from .market import MarketParams
from .payoff import (AffinePowerMap, CallPut, ExpMap, Payoff, PowerGamma,
                     PowerMap, PowerPair, PsiDifference, admissibility_report)
from .pricing import (FDGrid, PerpetualQuote, finite_maturity_curve,
                      finite_maturity_price, perpetual_call_price,
                      perpetual_put_price)
from .volatility import (ClampWarning, ClosedFormVol, ConstantVol,
                         TabulatedVol, VolCurve)

__all__ = [
    "AdmissibilityError",
    "AffinePowerMap",
    "AnalyticExampleParams",
    "BoundaryCurve",
    "BracketError",
    "CalibrationResult",
    "CallPut",
    "ClampWarning",
    "ClosedFormVol",
    "ConditionMargin",
    "ConfigError",
    "ConstantVol",
    "DualPair",
    "DualVolResult",
    "DualityReport",
    "ExpMap",
    "FDGrid",
    "LogDerivCurve",
    "MarketParams",
    "NumericalError",
    "Payoff",
    "PerpetualOptionPricer",
    "PerpetualQuote",
    "PerpetualVolCalibrator",
    "PowerGamma",
    "PowerMap",
    "PowerPair",
    "PriceCurve",
    "PsiDifference",
    "TabulatedVol",
    "UniquenessReport",
    "VolCurve",
    "admissibility_report",
    "analytic_pair_gamma",
    "analytic_pair_psi",
    "backward_boundary_solve",
    "build_dual_pair",
    "calibrate",
    "call_boundary_at",
    "call_boundary_curve",
    "call_boundary_ode",
    "call_bracket",
    "detect_exercise_strike",
    "dual_vol_callput",
    "dual_vol_for",
    "dual_vol_gamma",
    "dual_vol_psi",
    "exponent_a",
    "exponent_b",
    "f_ratio",
    "finite_maturity_curve",
    "finite_maturity_price",
    "g_ratio",
    "inverse_dual_vol_callput",
    "inverse_dual_vol_gamma",
    "inverse_dual_vol_psi",
    "perpetual_call_price",
    "perpetual_put_price",
    "put_boundary_at",
    "put_boundary_curve",
    "put_boundary_ode",
    "put_bracket",
    "quadratic_residual_a",
    "quadratic_residual_b",
    "recover_dual_vol_from_prices",
    "recover_primal_vol",
    "solve_dual_constant_vol",
    "solve_log_derivative_f",
    "solve_log_derivative_g",
    "uniqueness_check",
    "verify_duality",
]
