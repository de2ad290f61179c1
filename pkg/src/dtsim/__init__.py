"""Differential-transformation transient simulation.

The core pieces are the coefficient recursion (:mod:`dtsim.engine`), the PI
step controller (:mod:`dtsim.step_control`), the order selector
(:mod:`dtsim.order_control`) and the drivers that combine them
(:mod:`dtsim.drivers`).  Power-system models live in :mod:`dtsim.power`.
"""
from .baselines import ComparisonError, ErrorSeries, benchmark_error, me_integrate, rk4_integrate
from .drivers import ScheduleError, fixed_integrate, vs_integrate, vsoo_integrate
from .engine import (AugmentedSystemSpec, SpecBuilder, SpecError, StepDivergence, dt_coefficients,
                     dt_step, linear_spec, validate_spec)
from .order_control import (ComplexityModel, OrderControllerConfig, complexity, decrease_candidate,
                            increase_candidate, select_operating_point)
from .series import CoefficientBlock, series_eval
from .step_control import (StepControllerConfig, TruncationDivergence, accept_step, basic_step,
                           char_roots, error_radius, pi_jacobian_radius, pi_step, truncation_error)
from .trace import StepRecord, Trace

__version__ = "0.1.0"

__all__ = [
    "AugmentedSystemSpec", "CoefficientBlock", "ComparisonError", "ComplexityModel", "ErrorSeries",
    "OrderControllerConfig", "ScheduleError", "SpecBuilder", "SpecError", "StepControllerConfig",
    "StepDivergence", "StepRecord", "Trace", "TruncationDivergence", "accept_step", "basic_step",
    "benchmark_error", "char_roots", "complexity", "decrease_candidate", "dt_coefficients", "dt_step",
    "error_radius", "fixed_integrate", "increase_candidate", "linear_spec", "me_integrate",
    "pi_jacobian_radius", "pi_step", "rk4_integrate", "select_operating_point", "series_eval",
    "truncation_error", "validate_spec", "vs_integrate", "vsoo_integrate",
]
