"""Solver configuration and the discrete control set."""

import math
from dataclasses import asdict, dataclass

import numpy as np

EVAL_METHODS = ("sweep", "direct")


@dataclass(frozen=True)
class SolverConfig:
    """
    Semi-Lagrangian / policy-iteration parameters.

    Args:
        dt: Time step
        speed: Control magnitude (single speed: u_min = u_max = speed)
        n_directions: Number of control headings (>= 8)
        tol_policy_eval: Sup-norm tolerance of the fixed-policy sweeps
        tol_outer: Sup-norm tolerance of the policy-iteration loop
        max_eval_sweeps: Sweep budget per policy evaluation
        max_outer_iters: Policy-iteration budget
        eval_method: 'sweep' (fixed-point iteration) or 'direct' (sparse solve)
        workers: Threads used to build the step table
        verbose: Print per-iteration status lines
        optimizer_candidates: Local optimizer samples per waypoint
        optimizer_passes: Local optimizer pass budget
        optimizer_seed: Local optimizer seed
    """
    dt: float = 0.1
    speed: float = 1.0
    n_directions: int = 36
    tol_policy_eval: float = 1e-10
    tol_outer: float = 1e-8
    max_eval_sweeps: int = 100000
    max_outer_iters: int = 2000
    eval_method: str = "sweep"
    workers: int = 1
    verbose: bool = False
    optimizer_candidates: int = 16
    optimizer_passes: int = 20
    optimizer_seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0 (got {self.dt})")
        if not self.speed > 0:
            raise ValueError(f"speed must be > 0 (got {self.speed})")
        if self.n_directions < 8:
            raise ValueError(f"n_directions must be >= 8 (got {self.n_directions})")
        if not (self.tol_policy_eval > 0 and self.tol_outer > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_eval_sweeps < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration budgets must be >= 1")
        if self.eval_method not in EVAL_METHODS:
            raise ValueError(f"eval_method must be one of {EVAL_METHODS} (got '{self.eval_method}')")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1 (got {self.workers})")
        if self.optimizer_candidates < 1 or self.optimizer_passes < 0:
            raise ValueError("optimizer_candidates must be >= 1 and optimizer_passes >= 0")

    @property
    def step_length(self) -> float:
        return self.speed * self.dt

    def to_dict(self) -> dict:
        return asdict(self)


def controls_for(n_directions: int, speed: float) -> np.ndarray:
    """Velocities of magnitude speed at headings 2*pi*j/n_directions, j = 0..n-1."""
    headings = 2.0 * math.pi * np.arange(n_directions) / n_directions
    return speed * np.column_stack([np.cos(headings), np.sin(headings)])


def control_set(config: SolverConfig) -> np.ndarray:
    """
    Discrete velocities of the configured control set.

    Returns:
        (n_directions, 2) array
    """
    return controls_for(config.n_directions, config.speed)
