"""Optimal investment and consumption of a household that herds on a leader's investments.

Typical use::

    from crowdout import baseline_scenario, make_uniform_grid, solve_follower

    s = baseline_scenario()
    sol = solve_follower(s, make_uniform_grid(s.market.horizon_T, 1025))
    sol.crowding, sol.k1_star, sol.eta
"""

from .closed_form import (
    RationalDecision,
    rational_consumption,
    rational_decision,
    rational_intercept,
    rational_investment,
)
from .crowding import (
    SweepResult,
    SweepSpec,
    crowding_out,
    crowding_out_limit,
    sensitivity,
    sweep,
)
from .follower import (
    FollowerSolution,
    eta_residual,
    herding_ratio,
    optimal_investment,
    solve_eta,
    solve_follower,
)
from .model import (
    ControlPath,
    CrowdoutError,
    HerdingScenario,
    HouseholdParams,
    MarketParams,
    SolverError,
    TimeGrid,
    ValidationError,
    baseline_scenario,
    dumps_scenario,
    load_scenario,
    make_uniform_grid,
    validate_scenario,
)
from .numerics import QuadratureRule, RootConfig, find_root, integrate

__all__ = [
    "ControlPath", "CrowdoutError", "FollowerSolution", "HerdingScenario", "HouseholdParams",
    "MarketParams", "QuadratureRule", "RationalDecision", "RootConfig", "SolverError",
    "SweepResult", "SweepSpec", "TimeGrid", "ValidationError", "crowding_out",
    "crowding_out_limit", "dumps_scenario", "eta_residual", "find_root", "herding_ratio", "integrate",
    "load_scenario", "make_uniform_grid", "optimal_investment", "baseline_scenario", "rational_consumption",
    "rational_decision", "rational_intercept", "rational_investment", "sensitivity",
    "solve_eta", "solve_follower", "sweep", "validate_scenario",
]
