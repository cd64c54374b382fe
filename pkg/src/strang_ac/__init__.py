"""Strang splitting solvers for the Allen-Cahn equation on periodic grids."""

from .log_flow import CROUZEIX_A, STRICT_A_MIN, LogScheme, NewtonFailure, find_ustar, prrk_flow
from .poly_flow import PolyScheme, poly_nonlinear_flow
from .spectral import Field, PeriodicGrid, apply_heat_propagator, inner, make_grid, quadratic_form
from .stepper import (
    EnergyRecord,
    InvariantViolation,
    SimulationState,
    SolverFailure,
    evolve,
    ic_disk,
    ic_seven_circles,
    ic_sine,
    run,
    strang_step,
)
from .verify import ConvergenceReport, convergence_study, ode_flow_oracle, one_step_order

__version__ = "0.1.0"
