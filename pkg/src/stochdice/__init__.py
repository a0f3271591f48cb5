"""Stochastic DICE: value-function iteration for the DICE-2016 climate-economy
model with regime-switching output shocks, plus forward Monte Carlo
simulation of the resulting trajectories.

Typical use::

    from stochdice import ModelParams, build_exogenous_paths, solve_deterministic

    params = ModelParams(N=40)
    paths = build_exogenous_paths(params)
    ref = solve_deterministic(params)
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Controls, ExogenousPaths, StateVector, build_exogenous_paths, carbon_price,
    damage_abatement_factor, emissions, gross_output, initial_state, net_output,
    radiative_forcing, shock_transition_matrix, step_state, utility,
)
from .params import ModelParams, ShockSpec, load_params, save_params  # noqa: E402
from .reference import (  # noqa: E402
    GridRanges, ReferenceTrajectory, grid_ranges_from_reference, solve_deterministic,
)
from .simulate import (  # noqa: E402
    SCENARIOS, ScenarioConfig, Trajectory, derived_outputs, quantile_bands, scenario,
    simulate_trajectories,
)
from .solver import (  # noqa: E402
    Grid, PolicyTable, ValueTable, backward_induction, build_grid, expected_continuation,
    interpolate, optimize_controls,
)

__all__ = [
    "Controls", "ExogenousPaths", "StateVector", "build_exogenous_paths", "carbon_price",
    "damage_abatement_factor", "emissions", "gross_output", "initial_state", "net_output",
    "radiative_forcing", "shock_transition_matrix", "step_state", "utility",
    "ModelParams", "ShockSpec", "load_params", "save_params",
    "GridRanges", "ReferenceTrajectory", "grid_ranges_from_reference", "solve_deterministic",
    "SCENARIOS", "ScenarioConfig", "Trajectory", "derived_outputs", "quantile_bands",
    "scenario", "simulate_trajectories",
    "Grid", "PolicyTable", "ValueTable", "backward_induction", "build_grid",
    "expected_continuation", "interpolate", "optimize_controls",
]
