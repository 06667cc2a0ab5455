"""Indirect optimal control of two-mode switched systems with state-dependent switching."""

__version__ = "0.1.0"

from .bvp import BvpGuess, Formulation, ShootingConfig, TwoPhaseSolution, solve_two_phase
from .errors import (
    BvpDiverged,
    ContractViolation,
    DerivativeVanished,
    HybridJumpError,
    InnerFailure,
    NotFound,
    NumericalBlowup,
    OracleExhausted,
    ProblemFileError,
    SingularJacobian,
    StationarityFailure,
    StepBudgetExceeded,
    TangentialCrossing,
)
from .gel import GelConfig, GelResult, GelTrace, StopReason, absolute_error, residual_F, solve_gel
from .integrate import IntegratorConfig, OdeTrajectory, integrate
from .jump import (
    CostateJump,
    SwitchPointData,
    compute_jump,
    compute_jump_tiv,
    compute_jump_tv,
    hamiltonian_gap,
    switch_point_data,
)
from .oracle import OracleResult, SweepConfig, solve_phase_fixed_endpoints, sweep
from .problem import ModeId, SwitchedOCP, hamiltonian, optimal_control
from .problem_file import load_problem_file, resolve_problem
from .registry import build_problem, registry_get, registry_names
from .report import RunReport
