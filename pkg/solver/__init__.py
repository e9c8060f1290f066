"""Semi-Lagrangian policy-iteration solver for the transformed value function."""

from .config import SolverConfig, control_set, controls_for
from .semi_lagrangian import (
    SolverError,
    NonConvergence,
    StepTable,
    ValueField,
    SemiLagrangianSolver,
    UNDEFINED,
    build_step_table,
    initial_value_field,
    step_cost,
    bellman_update,
    policy_improve,
    policy_evaluate,
    solve,
    recover_value,
)

__all__ = [
    'SolverConfig', 'control_set', 'controls_for',
    'SolverError', 'NonConvergence', 'StepTable', 'ValueField', 'SemiLagrangianSolver',
    'UNDEFINED', 'build_step_table', 'initial_value_field',
    'step_cost', 'bellman_update', 'policy_improve', 'policy_evaluate', 'solve', 'recover_value',
]
