"""
Path extraction from a converged value field and local path optimization.
"""

import math
import time
from typing import Optional

import numpy as np

from geometry import Domain, SourceInObstacle
from sensing import IntensityField
from solver import SemiLagrangianSolver, SolverConfig, UNDEFINED, ValueField, recover_value
from .exposure import evaluate_exposure, segment_exposures
from .path import ExposureSaturated, Path, PathResult, Unreachable

# a step whose best value is this close to 1 leads nowhere
STUCK_VALUE = 1.0 - 1e-12
MAX_STEP_FACTOR = 20
DEFAULT_H_EVAL_FRACTION = 1e-3


def default_h_eval(domain: Domain) -> float:
    return DEFAULT_H_EVAL_FRACTION * domain.diameter


def extract_path(
    value: ValueField,
    field: IntensityField,
    domain: Domain,
    source,
    goal,
    config: SolverConfig
) -> Path:
    """
    Follow the discrete optimal policy from source to goal.

    At every (off-grid) point the scheme minimum picks the velocity u and the
    walker steps p <- p + u*dt. Once the goal is within speed*dt and the
    straight hop to it is clear, the goal is appended and the walk ends.

    Raises:
        SourceInObstacle: Source outside the domain or inside an obstacle
        Unreachable: No admissible control, no chain of steps to the goal, or step budget exhausted
        ExposureSaturated: The goal is reachable but vbar has saturated to 1 (omega too small)
    """
    source = np.asarray(source, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if not domain.contains(source)[0] or domain.points_in_obstacles(source)[0]:
        raise SourceInObstacle(f"source {tuple(source)} is not in free space")

    solver = SemiLagrangianSolver(value.grid, field, domain, config)
    capture = config.step_length
    max_steps = math.ceil(MAX_STEP_FACTOR * domain.diameter / config.step_length)

    waypoints = [source]
    p = source
    for _ in range(max_steps):
        if np.linalg.norm(p - goal) <= capture and domain.segments_clear(p, goal)[0]:
            waypoints.append(goal)
            return Path(waypoints=np.array(waypoints), dt=config.dt)
        vbar, index = solver.update_point(value.vbar, p)
        if index == UNDEFINED:
            raise Unreachable(f"no admissible move at {tuple(p)}", source=source)
        if vbar >= STUCK_VALUE:
            reachable = value.reachable if value.reachable is not None else solver.reachable_vertices()
            if solver.reaches_goal(p, reachable):
                raise ExposureSaturated(
                    f"exposure from {tuple(p)} saturates the transformed value at omega={field.omega:g}; "
                    f"raise omega",
                    omega=field.omega,
                    source=source
                )
            raise Unreachable(f"goal is not reachable from {tuple(p)}", source=source)
        p = p + solver.controls[index] * config.dt
        waypoints.append(p)
    raise Unreachable(f"goal not reached within {max_steps} steps", source=source)


def local_optimize(
    field: IntensityField,
    domain: Domain,
    path: Path,
    config: SolverConfig,
    h_eval: Optional[float] = None
) -> Path:
    """
    Coordinate descent over interior waypoints.

    Each interior waypoint draws config.optimizer_candidates points uniformly
    from the disk of radius speed*dt/2 around it and moves to the best one if
    both adjacent segments stay clear and the exposure of the two segments
    strictly drops. Passes repeat until one makes no replacement or
    config.optimizer_passes is reached. Endpoints never move.
    """
    if len(path) <= 2 or config.optimizer_passes == 0:
        return path
    h_eval = default_h_eval(domain) if h_eval is None else h_eval
    rng = np.random.default_rng(config.optimizer_seed)
    radius = 0.5 * config.step_length
    k = config.optimizer_candidates
    waypoints = np.array(path.waypoints)

    for _ in range(config.optimizer_passes):
        replaced = 0
        for i in range(1, len(waypoints) - 1):
            prev, here, succ = waypoints[i - 1], waypoints[i], waypoints[i + 1]
            r = radius * np.sqrt(rng.random(k))
            theta = 2.0 * math.pi * rng.random(k)
            candidates = here + np.column_stack([r * np.cos(theta), r * np.sin(theta)])

            clear = (domain.segments_clear(np.repeat(prev[None, :], k, axis=0), candidates)
                     & domain.segments_clear(candidates, np.repeat(succ[None, :], k, axis=0)))
            if not np.any(clear):
                continue
            candidates = candidates[clear]
            m = len(candidates)
            current = segment_exposures(field, np.array([prev, here]), np.array([here, succ]), h_eval).sum()
            trial = segment_exposures(
                field,
                np.vstack([np.repeat(prev[None, :], m, axis=0), candidates]),
                np.vstack([candidates, np.repeat(succ[None, :], m, axis=0)]),
                h_eval
            )
            totals = trial[:m] + trial[m:]
            best = int(np.argmin(totals))
            if totals[best] < current:
                waypoints[i] = candidates[best]
                replaced += 1
        if replaced == 0:
            break
    return path.with_waypoints(waypoints)


def plan_path(
    value: ValueField,
    field: IntensityField,
    domain: Domain,
    source,
    goal,
    config: SolverConfig,
    h_eval: Optional[float] = None,
    source_index: int = 0,
    elapsed: float = 0.0
) -> PathResult:
    """
    extract_path + local_optimize + raw exposure for one source.

    Args:
        elapsed: Time already spent for this source (grid and solve), added to wall_time

    Raises:
        Unreachable, ExposureSaturated: See extract_path
    """
    started = time.perf_counter()
    h_eval = default_h_eval(domain) if h_eval is None else h_eval
    raw = extract_path(value, field, domain, source, goal, config)
    optimized = local_optimize(field, domain, raw, config, h_eval)
    exposure_raw = evaluate_exposure(field, raw, h_eval)
    exposure = evaluate_exposure(field, optimized, h_eval)
    return PathResult(
        path=optimized,
        exposure=exposure,
        exposure_unoptimized=exposure_raw,
        value_at_source=recover_value(value.value_at(source)),
        outer_iters=value.outer_iters,
        wall_time=elapsed + time.perf_counter() - started,
        source_index=source_index,
    )
