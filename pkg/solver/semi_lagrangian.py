"""
Kruzkov-transformed value function by policy iteration on the
Semi-Lagrangian scheme over an unstructured grid.

The scheme at a point p, for control u and foot p' = p + u*dt, is

    vbar(p) = min_u  1 + (I[vbar](p') - 1) * exp(-g(p, u))

with I the barycentric interpolant and g the trapezoidal step cost on the
rescaled intensity. It is evaluated as I*exp(-g) - expm1(-g), which is the
same quantity without the cancellation near vbar = 0.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve

from geometry import Domain, SpatialGrid, VertexClass
from sensing import IntensityField
from .config import SolverConfig, control_set

UNDEFINED = -1
VBAR_CLAMP = 1.0 - 1e-15
TABLE_CHUNK = 2048


class SolverError(Exception):
    """Base exception for solver errors."""
    pass


class NonConvergence(SolverError):
    """An iteration budget ran out before the tolerance was met."""

    def __init__(self, message: str, iterations: int = 0, residual: float = math.nan):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass
class StepTable:
    """
    Everything about one Semi-Lagrangian step that does not depend on vbar,
    for a batch of start points and the whole control set.

    Shapes are (M, D) or (M, D, 3) for M points and D controls.
    """
    admissible: np.ndarray
    inside: np.ndarray
    verts: np.ndarray
    weights: np.ndarray
    decay: np.ndarray
    gain: np.ndarray

    def __len__(self) -> int:
        return self.admissible.shape[0]

    def candidates(self, vbar: np.ndarray) -> np.ndarray:
        """Scheme value for every (point, control); +inf where inadmissible."""
        corner = vbar[self.verts]
        interpolated = np.einsum('mdk,mdk->md', self.weights, corner)
        np.clip(interpolated, corner.min(axis=2), corner.max(axis=2), out=interpolated)
        interpolated = np.where(self.inside, interpolated, 1.0)
        values = interpolated * self.decay + self.gain
        return np.where(self.admissible, values, np.inf)

    def best(self, vbar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Minimum over controls (lowest index on ties); (1, UNDEFINED) if none admissible."""
        candidates = self.candidates(vbar)
        index = np.argmin(candidates, axis=1)
        value = candidates[np.arange(len(index)), index]
        stuck = ~np.isfinite(value)
        value = np.where(stuck, 1.0, np.clip(value, 0.0, 1.0))
        index = np.where(stuck, UNDEFINED, index)
        return value, index


def step_cost(field: IntensityField, p_k, p_next, u_norm: float, dt: float):
    """
    Trapezoidal step cost on the rescaled intensity:
    g = (I(p_k) + I(p_next)) / 2 * |u| * dt.
    """
    return 0.5 * (field.scaled_intensity(p_k) + field.scaled_intensity(p_next)) * u_norm * dt


def recover_value(vbar):
    """Exposure V = -ln(1 - vbar) in scaled units (vbar clamped below 1)."""
    clamped = np.minimum(np.asarray(vbar, dtype=float), VBAR_CLAMP)
    value = -np.log1p(-clamped)
    if np.ndim(value) == 0:
        return float(value)
    return value


def _table_chunk(
    grid: SpatialGrid,
    field: IntensityField,
    domain: Domain,
    points: np.ndarray,
    controls: np.ndarray,
    dt: float
) -> StepTable:
    m, d = len(points), len(controls)
    feet = (points[:, None, :] + controls[None, :, :] * dt).reshape(-1, 2)
    starts = np.repeat(points, d, axis=0)
    admissible = domain.segments_clear(starts, feet).reshape(m, d)
    simplex, verts, weights = grid.barycentric(feet)
    here = np.asarray(field.scaled_intensity(points)).reshape(m)
    there = np.asarray(field.scaled_intensity(feet)).reshape(m, d)
    speeds = np.linalg.norm(controls, axis=1)
    g = 0.5 * (here[:, None] + there) * speeds[None, :] * dt
    return StepTable(
        admissible=admissible,
        inside=(simplex >= 0).reshape(m, d),
        verts=verts.reshape(m, d, 3),
        weights=weights.reshape(m, d, 3),
        decay=np.exp(-g),
        gain=-np.expm1(-g),
    )


def build_step_table(
    grid: SpatialGrid,
    field: IntensityField,
    domain: Domain,
    points,
    config: SolverConfig
) -> StepTable:
    """
    Precompute feet, admissibility, interpolation stencils and step costs.

    Work is split in fixed chunks and optionally spread over
    `config.workers` threads; the result does not depend on the worker count.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    controls = control_set(config)
    bounds = list(range(0, len(points), TABLE_CHUNK)) or [0]
    jobs = [points[lo:lo + TABLE_CHUNK] for lo in bounds]

    def run(chunk):
        return _table_chunk(grid, field, domain, chunk, controls, config.dt)

    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(chunk) for chunk in jobs]
    return StepTable(**{
        name: np.concatenate([getattr(part, name) for part in parts])
        for name in ('admissible', 'inside', 'verts', 'weights', 'decay', 'gain')
    })


@dataclass
class ValueField:
    """
    Kruzkov value per grid vertex with its policy.

    Attributes:
        grid: Grid the values live on
        vbar: (V,) values in [0, 1]
        policy_index: (V,) control index per vertex, UNDEFINED where frozen or stuck
        frozen: (V,) boundary-condition mask (goal and obstacle vertices)
        controls: (D, 2) control set the indices refer to
        outer_iters: Policy-iteration count that produced the field
        eval_sweeps: Total fixed-policy sweeps spent
        reachable: (V,) vertices with a chain of admissible steps to the goal
    """
    grid: SpatialGrid
    vbar: np.ndarray
    policy_index: np.ndarray
    frozen: np.ndarray
    controls: np.ndarray
    outer_iters: int = 0
    eval_sweeps: int = 0
    converged: bool = False
    residual: float = field(default=math.nan)
    reachable: Optional[np.ndarray] = None

    @property
    def policy(self) -> np.ndarray:
        """(V, 2) velocities; NaN rows where the policy is undefined."""
        velocities = np.full((len(self.vbar), 2), np.nan)
        defined = self.policy_index >= 0
        velocities[defined] = self.controls[self.policy_index[defined]]
        return velocities

    def value_at(self, p) -> float:
        """Interpolated vbar at an arbitrary point."""
        return self.grid.interpolate(self.vbar, p)

    def recovered(self) -> np.ndarray:
        """V in scaled-exposure units at every vertex."""
        return recover_value(self.vbar)

    def copy(self) -> 'ValueField':
        return ValueField(
            grid=self.grid,
            vbar=self.vbar.copy(),
            policy_index=self.policy_index.copy(),
            frozen=self.frozen.copy(),
            controls=self.controls,
            outer_iters=self.outer_iters,
            eval_sweeps=self.eval_sweeps,
            converged=self.converged,
            residual=self.residual,
            reachable=self.reachable,
        )


def frozen_vertices(grid: SpatialGrid) -> np.ndarray:
    """Goal and obstacle vertices keep their boundary values."""
    return (grid.vertex_class == VertexClass.GOAL) | (grid.vertex_class == VertexClass.OBSTACLE)


def initial_value_field(grid: SpatialGrid, config: SolverConfig) -> ValueField:
    """
    Boundary conditions: vbar = 1 everywhere, 0 at the goal; goal and
    obstacle vertices frozen.
    """
    if grid.goal_index is None:
        raise ValueError("grid has no goal vertex")
    frozen = frozen_vertices(grid)
    vbar = np.ones(len(grid))
    vbar[grid.goal_index] = 0.0
    return ValueField(
        grid=grid,
        vbar=vbar,
        policy_index=np.full(len(grid), UNDEFINED, dtype=np.int64),
        frozen=frozen,
        controls=control_set(config),
    )


class SemiLagrangianSolver:
    """
    Policy iteration for the transformed value function on a fixed grid.

    The step table for the grid vertices is built on first use and shared by
    every sweep, so repeated improvement/evaluation calls only gather values.
    """

    def __init__(
        self,
        grid: SpatialGrid,
        field: IntensityField,
        domain: Domain,
        config: SolverConfig
    ):
        """
        Initialize the solver.

        Args:
            grid: Triangulated grid containing the goal vertex
            field: Sensor field (the rescaled intensity drives the step cost)
            domain: Domain used for move admissibility
            config: Solver parameters
        """
        self.grid = grid
        self.field = field
        self.domain = domain
        self.config = config
        self.controls = control_set(config)
        self._table: Optional[StepTable] = None

    @property
    def table(self) -> StepTable:
        if self._table is None:
            if self.config.verbose:
                print(f"  Solver: building step table ({len(self.grid)} vertices x {len(self.controls)} controls)")
            self._table = build_step_table(self.grid, self.field, self.domain, self.grid.vertices, self.config)
        return self._table

    def _log(self, message: str):
        if self.config.verbose:
            print(f"  Solver: {message}")

    def update_point(self, vbar: np.ndarray, p) -> Tuple[float, int]:
        """Scheme minimum at an arbitrary point (not cached)."""
        table = build_step_table(self.grid, self.field, self.domain, np.asarray(p, dtype=float)[None, :], self.config)
        value, index = table.best(vbar)
        return float(value[0]), int(index[0])

    def reachable_vertices(self) -> np.ndarray:
        """
        Vertices from which a chain of admissible steps reaches the goal.

        Decided from the stencils alone: p reaches the goal if some admissible
        foot of p has positive weight on a vertex that does. Unlike vbar < 1
        this does not depend on exp(-V) staying representable.
        """
        table = self.table
        n = len(self.grid)
        frozen = frozen_vertices(self.grid)
        usable = table.admissible & table.inside
        usable[frozen] = False
        src, ctl = np.nonzero(usable)
        live = table.weights[src, ctl] > 0
        corners = table.verts[src, ctl][live]
        starts = np.broadcast_to(src[:, None], live.shape)[live]
        # corner -> start, so a search from the goal walks backwards along steps
        graph = sparse.csr_matrix((np.ones(len(starts)), (corners, starts)), shape=(n, n))
        order = breadth_first_order(graph, self.grid.goal_index, directed=True, return_predecessors=False)
        reachable = np.zeros(n, dtype=bool)
        reachable[order] = True
        return reachable

    def reaches_goal(self, p, reachable: np.ndarray) -> bool:
        """True iff some admissible step from p lands on a stencil touching a reachable vertex."""
        table = build_step_table(self.grid, self.field, self.domain, np.asarray(p, dtype=float)[None, :], self.config)
        usable = (table.admissible[0] & table.inside[0])[:, None]
        live = (table.weights[0] > 0) & reachable[table.verts[0]]
        return bool(np.any(usable & live))

    def improve(self, value: ValueField) -> ValueField:
        """
        One Jacobi sweep: every non-frozen vertex takes the scheme minimum
        computed from the snapshot `value.vbar`.
        """
        best, index = self.table.best(value.vbar)
        active = ~value.frozen
        result = value.copy()
        result.vbar[active] = best[active]
        result.policy_index[active] = index[active]
        return result

    def policy_operator(self, value: ValueField) -> Tuple[sparse.csr_matrix, np.ndarray]:
        """
        Fixed-policy affine map v -> A v + c.

        Frozen vertices keep their value; a vertex without an admissible
        control, or whose foot leaves the hull, maps to 1.
        """
        n = len(value.vbar)
        table = self.table
        rows = np.arange(n)
        policy = value.policy_index
        frozen = value.frozen
        defined = (policy >= 0) & ~frozen
        safe = np.where(defined, policy, 0)
        inside = table.inside[rows, safe] & defined

        c = np.ones(n)
        c[frozen] = value.vbar[frozen]
        c[inside] = table.gain[rows[inside], safe[inside]]

        decay = table.decay[rows[inside], safe[inside]]
        weights = table.weights[rows[inside], safe[inside]] * decay[:, None]
        cols = table.verts[rows[inside], safe[inside]]
        matrix = sparse.csr_matrix(
            (weights.ravel(), (np.repeat(rows[inside], 3), cols.ravel())),
            shape=(n, n)
        )
        return matrix, c

    def evaluate(self, value: ValueField) -> Tuple[np.ndarray, int]:
        """
        Value of the fixed policy in `value`.

        Returns:
            (vbar, sweeps used; 0 for the direct method)

        Raises:
            NonConvergence: Sweep budget exhausted
        """
        matrix, c = self.policy_operator(value)
        if self.config.eval_method == "direct":
            system = sparse.identity(len(c), format='csr') - matrix
            return np.clip(spsolve(system.tocsc(), c), 0.0, 1.0), 0

        v = np.clip(value.vbar, 0.0, 1.0)
        residual = math.inf
        for sweep in range(1, self.config.max_eval_sweeps + 1):
            v_next = np.clip(c + matrix @ v, 0.0, 1.0)
            residual = float(np.max(np.abs(v_next - v)))
            v = v_next
            if residual < self.config.tol_policy_eval:
                return v, sweep
        raise NonConvergence(
            f"policy evaluation did not reach {self.config.tol_policy_eval:g} "
            f"in {self.config.max_eval_sweeps} sweeps (residual {residual:.3e})",
            iterations=self.config.max_eval_sweeps,
            residual=residual
        )

    def solve(self) -> ValueField:
        """
        Alternate improvement and evaluation until the value change of an
        outer iteration drops below tol_outer or the policy stops changing.

        Raises:
            NonConvergence: max_outer_iters exhausted
        """
        value = initial_value_field(self.grid, self.config)
        total_sweeps = 0
        change = math.inf
        for iteration in range(1, self.config.max_outer_iters + 1):
            improved = self.improve(value)
            changed = int(np.sum(improved.policy_index != value.policy_index))
            vbar, sweeps = self.evaluate(improved)
            total_sweeps += sweeps
            change = float(np.max(np.abs(vbar - value.vbar)))
            improved.vbar = vbar
            value = improved
            self._log(f"iteration {iteration}: policy changes={changed}, change={change:.3e}, sweeps={sweeps}")
            if change < self.config.tol_outer or changed == 0:
                value.outer_iters = iteration
                value.eval_sweeps = total_sweeps
                value.converged = True
                value.residual = change
                value.reachable = self.reachable_vertices()
                return value
        raise NonConvergence(
            f"policy iteration did not converge in {self.config.max_outer_iters} iterations "
            f"(last change {change:.3e})",
            iterations=self.config.max_outer_iters,
            residual=change
        )

    def value_iterate(self, max_iters: int = 100000, tol: Optional[float] = None) -> ValueField:
        """Plain repeated Jacobi sweeps; reference solver for small grids."""
        tol = self.config.tol_outer if tol is None else tol
        value = initial_value_field(self.grid, self.config)
        for iteration in range(1, max_iters + 1):
            improved = self.improve(value)
            change = float(np.max(np.abs(improved.vbar - value.vbar)))
            value = improved
            if change < tol:
                value.outer_iters = iteration
                value.converged = True
                value.residual = change
                return value
        raise NonConvergence(f"value iteration did not converge in {max_iters} sweeps",
                             iterations=max_iters, residual=change)


def bellman_update(
    value: ValueField,
    field: IntensityField,
    domain: Domain,
    p,
    config: SolverConfig
) -> Tuple[float, Optional[np.ndarray]]:
    """
    Scheme minimum at p against the current values.

    Returns:
        (new vbar, best velocity or None when no control is admissible)
    """
    solver = SemiLagrangianSolver(value.grid, field, domain, config)
    vbar, index = solver.update_point(value.vbar, p)
    if index == UNDEFINED:
        return 1.0, None
    return vbar, solver.controls[index].copy()


def policy_improve(value: ValueField, field: IntensityField, domain: Domain, config: SolverConfig) -> ValueField:
    """Jacobi improvement sweep over all non-frozen vertices."""
    return SemiLagrangianSolver(value.grid, field, domain, config).improve(value)


def policy_evaluate(value: ValueField, field: IntensityField, domain: Domain, config: SolverConfig) -> np.ndarray:
    """vbar of the fixed policy carried by `value`."""
    vbar, _ = SemiLagrangianSolver(value.grid, field, domain, config).evaluate(value)
    return vbar


def solve(
    domain: Domain,
    field: IntensityField,
    goal,
    config: SolverConfig,
    grid: SpatialGrid
) -> ValueField:
    """
    Converged value field for `goal` on `grid`.

    Raises:
        ValueError: goal is not the grid's goal vertex
        NonConvergence: iteration budgets exhausted
    """
    if grid.goal_index is None:
        raise ValueError("grid has no goal vertex")
    goal = np.asarray(goal, dtype=float)
    if np.linalg.norm(grid.vertices[grid.goal_index] - goal) > 1e-9 * max(grid.diameter, 1.0):
        raise ValueError(f"goal {tuple(goal)} is not the grid's goal vertex")
    return SemiLagrangianSolver(grid, field, domain, config).solve()
