"""Robust power allocation for integrated LED positioning/communication networks.

The library models an indoor network of ceiling LEDs that simultaneously
provide RSS-based positioning and data transmission to a photodetector
user terminal.  It computes power allocations that minimize the positioning
CRLB subject to rate-outage constraints (perfect-CSI, Bernstein-robust, and
worst-case-CVaR designs) and verifies them by Monte Carlo simulation.
"""

__version__ = "0.1.0"

from .scenario import (
    LedParams,
    PdParams,
    PowerBudget,
    Scenario,
    ScenarioError,
    default_layout,
    default_scenario,
    load_scenario,
    power_budget,
    validate,
)
from .channel import DiffuseParams, estimated_gain, gain_error, gain_gradient, isi_power_split, los_gain
from .fisher import crlb, fim, fim_coefficients, spd_power
from .rate import abg_params, delta_b, delta_coefficient, rate_los_diffuse, rate_lower_bound
from .conic import ConicProblem, ConicSolution, solve
from .allocator import (
    InfeasibleError,
    PowerAllocation,
    RobustConfig,
    bernstein_bound,
    select_serving_led,
    solve_bernstein,
    solve_cvar_sca,
    solve_perfect,
)
from .positioning import PositionEstimate, RssMeasurement, estimate_position, rse, simulate_rss
from .montecarlo import (
    ErrorModel,
    ExperimentResult,
    allocation_error_model,
    outage_probability,
    rate_cdf,
    sample_errors,
    sweep,
)
