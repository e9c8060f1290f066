"""Tests for the control set, step cost, Bellman operator and policy iteration."""

import math

import numpy as np
import pytest

from geometry import GridConfig, VertexClass, build_domain, build_grid, triangulate
from sensing import AttenuatedDisk, SensorNode, build_field
from solver import (
    UNDEFINED,
    NonConvergence,
    SemiLagrangianSolver,
    SolverConfig,
    bellman_update,
    build_step_table,
    control_set,
    controls_for,
    initial_value_field,
    policy_evaluate,
    policy_improve,
    recover_value,
    solve,
    step_cost,
)
from conftest import faint_field, uniform_field


# ---------------------------------------------------------------------------
# configuration and primitives

def test_controls_for_four_headings():
    assert np.allclose(controls_for(4, 1.0), [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_control_set_has_uniform_headings():
    controls = control_set(SolverConfig(n_directions=36, speed=2.0))
    assert controls.shape == (36, 2)
    assert np.allclose(np.linalg.norm(controls, axis=1), 2.0, atol=1e-12)
    headings = np.unwrap(np.arctan2(controls[:, 1], controls[:, 0]))
    assert np.allclose(np.diff(headings), 2.0 * math.pi / 36)


@pytest.mark.parametrize("kwargs", [
    {'dt': 0.0}, {'speed': -1.0}, {'n_directions': 4}, {'tol_outer': 0.0},
    {'eval_method': 'cg'}, {'workers': 0}, {'max_eval_sweeps': 0},
])
def test_invalid_solver_config(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_step_cost_arithmetic():
    # scaled intensity 2 at the start and 4 at the end of the step
    nodes = [SensorNode(position=(0.0, 0.0), model=AttenuatedDisk(lam=200.0, mu=1.0))]
    field = build_field(nodes, omega=1.0)
    assert step_cost(field, (100.0, 0.0), (50.0, 0.0), 1.0, 0.1) == pytest.approx(0.3)


def test_step_cost_constant_intensity():
    field = uniform_field(omega=4.0)
    assert step_cost(field, (1.0, 1.0), (1.1, 1.0), 2.0, 0.05) == pytest.approx(0.25 * 2.0 * 0.05)


def test_step_cost_floor():
    field = faint_field(eps_floor=1e-6, corner=(100.0, 100.0))
    assert step_cost(field, (0.0, 0.0), (0.1, 0.0), 1.0, 0.1) == pytest.approx(1e-7)


def test_recover_value():
    assert recover_value(0.0) == 0.0
    assert recover_value(0.5) == pytest.approx(math.log(2.0))
    assert recover_value(1.0) == pytest.approx(34.5388, rel=1e-5)
    values = recover_value(np.linspace(0.0, 1.0, 101))
    assert np.all(np.diff(values) > 0)


# ---------------------------------------------------------------------------
# Bellman operator

def test_all_ones_field_stays_one(toy_grid, unit_domain):
    config = SolverConfig(dt=0.5, n_directions=8)
    value = initial_value_field(toy_grid, config)
    value.vbar[:] = 1.0
    for p in [(0.5, 0.5), (0.2, 0.7), (1.0, 1.0)]:
        vbar, _ = bellman_update(value, uniform_field(), unit_domain, p, config)
        assert vbar == pytest.approx(1.0, abs=1e-15)


def test_one_step_from_goal(toy_grid, unit_domain):
    # from (1, 0), heading pi with dt = 1 lands exactly on the goal
    config = SolverConfig(dt=1.0, n_directions=8)
    value = initial_value_field(toy_grid, config)
    vbar, u = bellman_update(value, uniform_field(), unit_domain, (1.0, 0.0), config)
    assert vbar == pytest.approx(1.0 - math.exp(-1.0), abs=1e-14)
    assert np.allclose(u, [-1.0, 0.0], atol=1e-12)


def test_no_admissible_control(toy_grid, unit_domain):
    # every foot of a step this long leaves the unit square
    config = SolverConfig(dt=2.0, n_directions=8)
    value = initial_value_field(toy_grid, config)
    vbar, u = bellman_update(value, uniform_field(), unit_domain, (0.5, 0.5), config)
    assert vbar == 1.0
    assert u is None


def _brute_force_sweep(grid, vbar, frozen, config, intensity):
    """Loop-based Jacobi sweep with its own triangle search."""
    controls = [(config.speed * math.cos(2 * math.pi * j / config.n_directions),
                 config.speed * math.sin(2 * math.pi * j / config.n_directions))
                for j in range(config.n_directions)]
    lo, hi = grid.vertices.min(axis=0), grid.vertices.max(axis=0)

    def interpolate(q):
        for tri in grid.triangles:
            (x1, y1), (x2, y2), (x3, y3) = grid.vertices[tri]
            det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
            l1 = ((y2 - y3) * (q[0] - x3) + (x3 - x2) * (q[1] - y3)) / det
            l2 = ((y3 - y1) * (q[0] - x3) + (x1 - x3) * (q[1] - y3)) / det
            l3 = 1.0 - l1 - l2
            if min(l1, l2, l3) >= -1e-12:
                return l1 * vbar[tri[0]] + l2 * vbar[tri[1]] + l3 * vbar[tri[2]]
        return 1.0

    result = vbar.copy()
    best_values = {}
    for i, p in enumerate(grid.vertices):
        if frozen[i]:
            continue
        candidates = []
        for u in controls:
            q = (p[0] + u[0] * config.dt, p[1] + u[1] * config.dt)
            if not (lo[0] - 1e-12 <= q[0] <= hi[0] + 1e-12 and lo[1] - 1e-12 <= q[1] <= hi[1] + 1e-12):
                candidates.append(math.inf)
                continue
            g = intensity * config.speed * config.dt
            candidates.append(1.0 + (interpolate(q) - 1.0) * math.exp(-g))
        result[i] = min(candidates)
        best_values[i] = candidates
    return result, best_values


def test_toy_sweep_matches_brute_force(toy_grid, unit_domain):
    config = SolverConfig(dt=0.5, n_directions=8)
    value = initial_value_field(toy_grid, config)
    improved = policy_improve(value, uniform_field(), unit_domain, config)
    expected, candidates = _brute_force_sweep(toy_grid, value.vbar, value.frozen, config, 1.0)
    assert np.allclose(improved.vbar, expected, atol=1e-12)
    for i, options in candidates.items():
        assert options[improved.policy_index[i]] == pytest.approx(min(options), abs=1e-12)
    # (1, 0) reaches the midpoint of the goal edge: 1 - 0.5 * e^-0.5
    assert improved.vbar[1] == pytest.approx(1.0 - 0.5 * math.exp(-0.5), abs=1e-12)
    # the far corner cannot reach the goal in one step
    assert improved.vbar[2] == pytest.approx(1.0, abs=1e-15)


def test_second_sweep_matches_brute_force(toy_grid, unit_domain):
    config = SolverConfig(dt=0.5, n_directions=8)
    field = uniform_field(omega=2.0)
    value = initial_value_field(toy_grid, config)
    once = policy_improve(value, field, unit_domain, config)
    twice = policy_improve(once, field, unit_domain, config)
    expected, _ = _brute_force_sweep(toy_grid, once.vbar, once.frozen, config, 0.5)
    assert np.allclose(twice.vbar, expected, atol=1e-12)


def test_sweep_is_local(random_grid, unit_domain):
    config = SolverConfig(dt=0.05, n_directions=16)
    value = initial_value_field(random_grid, config)
    improved = policy_improve(value, uniform_field(), unit_domain, config)
    goal = random_grid.vertices[random_grid.goal_index]
    dropped = np.flatnonzero(improved.vbar < 1.0 - 1e-12)
    assert len(dropped) > 1
    reach = np.linalg.norm(random_grid.vertices[dropped] - goal, axis=1)
    # a foot must land in a triangle touching the goal
    touching = np.unique(random_grid.triangles[np.any(random_grid.triangles == random_grid.goal_index, axis=1)])
    radius = np.max(np.linalg.norm(random_grid.vertices[touching] - goal, axis=1))
    assert np.all(reach <= radius + config.step_length + 1e-12)


def test_operator_is_monotone(random_grid, unit_domain):
    config = SolverConfig(dt=0.05, n_directions=16)
    field = build_field([SensorNode(position=(0.6, 0.6), model=AttenuatedDisk(lam=0.5, mu=2.0))], omega=10.0)
    solver = SemiLagrangianSolver(random_grid, field, unit_domain, config)
    base = initial_value_field(random_grid, config)
    rng = np.random.default_rng(21)
    for _ in range(100):
        v = base.copy()
        w = base.copy()
        free = ~base.frozen
        v.vbar[free] = rng.random(free.sum())
        w.vbar[free] = np.minimum(v.vbar[free] + rng.random(free.sum()) * rng.random(), 1.0)
        tv = solver.improve(v).vbar
        tw = solver.improve(w).vbar
        assert np.all(tv <= tw + 1e-12)


def test_operator_is_a_contraction(random_grid, unit_domain):
    eps_floor = 1e-2
    config = SolverConfig(dt=0.05, n_directions=16)
    field = faint_field(eps_floor=eps_floor)
    solver = SemiLagrangianSolver(random_grid, field, unit_domain, config)
    base = initial_value_field(random_grid, config)
    rate = math.exp(-eps_floor * config.speed * config.dt)
    rng = np.random.default_rng(22)
    for _ in range(100):
        v = base.copy()
        w = base.copy()
        free = ~base.frozen
        v.vbar[free] = rng.random(free.sum())
        w.vbar[free] = rng.random(free.sum())
        gap = np.max(np.abs(solver.improve(v).vbar - solver.improve(w).vbar))
        assert gap <= rate * np.max(np.abs(v.vbar - w.vbar)) + 1e-12


def test_sweeps_keep_range_and_boundary(random_grid, unit_domain):
    config = SolverConfig(dt=0.05, n_directions=16)
    solver = SemiLagrangianSolver(random_grid, uniform_field(omega=5.0), unit_domain, config)
    value = initial_value_field(random_grid, config)
    for _ in range(30):
        value = solver.improve(value)
        assert np.all((value.vbar >= 0.0) & (value.vbar <= 1.0))
        assert value.vbar[random_grid.goal_index] == 0.0


# ---------------------------------------------------------------------------
# policy evaluation

@pytest.fixture
def chain():
    """Vertices 0.25 apart on y = 0 (goal at x = 0) between two rows of obstacle-tagged vertices."""
    xs = np.arange(5) * 0.25
    vertices = np.vstack([
        np.column_stack([xs, np.zeros(5)]),
        np.column_stack([xs, np.full(5, 1.0)]),
        np.column_stack([xs, np.full(5, -1.0)]),
    ])
    classes = np.array([VertexClass.GOAL] + [VertexClass.FREE] * 4 + [VertexClass.OBSTACLE] * 10)
    domain = build_domain((0.0, -1.0), (1.0, 1.0))
    return triangulate(vertices, classes, domain), domain


def test_chain_evaluation_matches_geometric_recursion(chain):
    grid, domain = chain
    config = SolverConfig(dt=0.25, speed=1.0, n_directions=8, tol_policy_eval=1e-13)
    field = uniform_field(omega=2.0)  # scaled intensity 0.5
    value = initial_value_field(grid, config)
    value.policy_index[1:5] = 4  # heading pi
    vbar = policy_evaluate(value, field, domain, config)
    k = np.arange(5)
    assert np.allclose(vbar[:5], 1.0 - np.exp(-k * 0.5 * 0.25), atol=1e-9)
    assert np.all(vbar[5:] == 1.0)


def test_direct_evaluation_agrees_with_sweeps(chain):
    grid, domain = chain
    field = uniform_field(omega=2.0)
    results = []
    for method in ('sweep', 'direct'):
        config = SolverConfig(dt=0.25, n_directions=8, tol_policy_eval=1e-13, eval_method=method)
        value = initial_value_field(grid, config)
        value.policy_index[1:5] = 4
        results.append(policy_evaluate(value, field, domain, config))
    assert np.allclose(results[0], results[1], atol=1e-10)


def test_self_trapping_policy_stays_one(chain):
    grid, domain = chain
    config = SolverConfig(dt=0.25, n_directions=8)
    value = initial_value_field(grid, config)
    value.policy_index[1:5] = 0  # heading 0: away from the goal along the chain
    vbar = policy_evaluate(value, uniform_field(), domain, config)
    assert np.allclose(vbar[1:5], 1.0, atol=1e-9)
    assert vbar[0] == 0.0


def test_evaluation_budget_raises(chain):
    grid, domain = chain
    config = SolverConfig(dt=0.25, n_directions=8, max_eval_sweeps=2, tol_policy_eval=1e-14)
    value = initial_value_field(grid, config)
    value.policy_index[1:5] = 4
    with pytest.raises(NonConvergence):
        policy_evaluate(value, uniform_field(), domain, config)


# ---------------------------------------------------------------------------
# full solve

def test_solve_on_chain(chain):
    grid, domain = chain
    config = SolverConfig(dt=0.25, n_directions=8)
    value = solve(domain, uniform_field(omega=2.0), (0.0, 0.0), config, grid)
    assert value.converged
    k = np.arange(5)
    assert np.allclose(value.vbar[:5], 1.0 - np.exp(-k * 0.5 * 0.25), atol=1e-9)
    assert np.all(value.policy_index[1:5] == 4)


def test_solve_pins_boundary_and_is_idempotent(random_grid, unit_domain):
    config = SolverConfig(dt=0.05, n_directions=16)
    field = build_field([SensorNode(position=(0.6, 0.6), model=AttenuatedDisk(lam=0.5, mu=2.0))], omega=10.0)
    value = solve(unit_domain, field, random_grid.vertices[random_grid.goal_index], config, random_grid)
    assert value.vbar[random_grid.goal_index] == 0.0
    assert np.all((value.vbar >= 0.0) & (value.vbar <= 1.0))
    assert np.all(value.policy_index[~value.frozen] >= 0)
    again = policy_improve(value, field, unit_domain, config)
    assert np.max(np.abs(again.vbar - value.vbar)) <= 1e-5
    # evaluating the converged policy reproduces the field
    assert np.allclose(policy_evaluate(value, field, unit_domain, config), value.vbar, atol=1e-6)


def test_policy_iteration_matches_value_iteration(random_grid, unit_domain):
    config = SolverConfig(dt=0.05, n_directions=16)
    field = build_field([SensorNode(position=(0.6, 0.6), model=AttenuatedDisk(lam=0.5, mu=2.0))], omega=3.0)
    solver = SemiLagrangianSolver(random_grid, field, unit_domain, config)
    reference = solver.value_iterate(tol=1e-10)
    assert reference.converged
    value = solver.solve()
    assert np.allclose(value.vbar, reference.vbar, atol=1e-5)
    # policy iteration needs far fewer outer iterations than value iteration sweeps
    assert value.outer_iters < reference.outer_iters


def test_value_iteration_budget_raises(random_grid, unit_domain):
    solver = SemiLagrangianSolver(random_grid, uniform_field(), unit_domain, SolverConfig(dt=0.05, n_directions=16))
    with pytest.raises(NonConvergence) as info:
        solver.value_iterate(max_iters=3)
    assert info.value.iterations == 3


def test_solve_rejects_foreign_goal(random_grid, unit_domain):
    with pytest.raises(ValueError):
        solve(unit_domain, uniform_field(), (0.9, 0.9), SolverConfig(), random_grid)


def test_outer_budget_raises(random_grid, unit_domain):
    config = SolverConfig(dt=0.01, n_directions=16, max_outer_iters=2)
    with pytest.raises(NonConvergence) as info:
        solve(unit_domain, uniform_field(), random_grid.vertices[random_grid.goal_index], config, random_grid)
    assert info.value.iterations == 2


def test_faint_field_value_is_floor_times_distance():
    domain = build_domain((0.0, 0.0), (2.0, 2.0))
    eps = 1e-3
    field = faint_field(eps_floor=eps, corner=(2.0, 2.0))
    goal = (0.2, 0.2)
    grid = build_grid(domain, field, goal, [], GridConfig(points_per_node=600, rng_seed=3))
    config = SolverConfig(dt=0.05, n_directions=36)
    value = solve(domain, field, goal, config, grid)
    distance = np.linalg.norm(grid.vertices - np.asarray(goal), axis=1)
    far = (distance > 0.5) & (np.linalg.norm(grid.vertices - [2.0, 2.0], axis=1) > 0.2)
    ratio = value.recovered()[far] / (eps * distance[far])
    assert np.all(ratio > 0.9)
    assert np.median(ratio) < 1.15


def test_enclosed_vertex_is_unreachable():
    walls = [
        [(1.0, 1.0), (3.0, 1.0), (3.0, 1.4), (1.0, 1.4)],
        [(1.0, 2.6), (3.0, 2.6), (3.0, 3.0), (1.0, 3.0)],
        [(1.0, 1.4), (1.4, 1.4), (1.4, 2.6), (1.0, 2.6)],
        [(2.6, 1.4), (3.0, 1.4), (3.0, 2.6), (2.6, 2.6)],
    ]
    domain = build_domain((0.0, 0.0), (4.0, 4.0), walls)
    field = uniform_field(omega=10.0)
    grid = build_grid(domain, field, (0.5, 0.5), [(2.0, 2.0)],
                      GridConfig(points_per_node=400, boundary_spacing=0.05, rng_seed=2))
    config = SolverConfig(dt=0.1, n_directions=16)
    value = solve(domain, field, (0.5, 0.5), config, grid)
    enclosed = int(np.flatnonzero(np.all(grid.vertices == [2.0, 2.0], axis=1))[0])
    assert value.vbar[enclosed] == pytest.approx(1.0, abs=1e-9)
    assert not value.reachable[enclosed]
    # corners of the domain outside the ring are reachable
    corner = int(np.flatnonzero(np.all(grid.vertices == [4.0, 4.0], axis=1))[0])
    assert value.vbar[corner] < 1.0 - 1e-6
    assert value.reachable[corner]
    assert value.reachable[grid.goal_index]
    assert not np.any(value.reachable[grid.vertex_class == VertexClass.OBSTACLE])


def test_step_table_does_not_depend_on_worker_count(random_grid, unit_domain):
    field = uniform_field(omega=3.0)
    points = np.random.default_rng(8).uniform(0.0, 1.0, size=(5000, 2))
    one = build_step_table(random_grid, field, unit_domain, points, SolverConfig(workers=1, dt=0.05))
    four = build_step_table(random_grid, field, unit_domain, points, SolverConfig(workers=4, dt=0.05))
    for name in ('admissible', 'inside', 'verts', 'weights', 'decay', 'gain'):
        assert np.array_equal(getattr(one, name), getattr(four, name))


def test_solve_is_deterministic_across_workers(random_grid, unit_domain):
    field = uniform_field(omega=3.0)
    goal = random_grid.vertices[random_grid.goal_index]
    a = solve(unit_domain, field, goal, SolverConfig(dt=0.05, n_directions=16, workers=1), random_grid)
    b = solve(unit_domain, field, goal, SolverConfig(dt=0.05, n_directions=16, workers=3), random_grid)
    assert np.array_equal(a.vbar, b.vbar)
    assert np.array_equal(a.policy_index, b.policy_index)


def test_policy_property_undefined_at_frozen(toy_grid, unit_domain):
    config = SolverConfig(dt=0.5, n_directions=8)
    value = solve(unit_domain, uniform_field(), (0.0, 0.0), config, toy_grid)
    assert value.policy_index[toy_grid.goal_index] == UNDEFINED
    assert np.all(np.isnan(value.policy[toy_grid.goal_index]))
    assert np.allclose(np.linalg.norm(value.policy[1:], axis=1), 1.0)
