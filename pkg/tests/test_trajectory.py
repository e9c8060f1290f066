"""Tests for path extraction, exposure evaluation and local optimization."""

import math

import numpy as np
import pytest
from scipy import integrate

from geometry import GridConfig, SourceInObstacle, build_domain, build_grid
from sensing import AttenuatedDisk, SensorNode, build_field
from solver import SolverConfig, initial_value_field, solve
from trajectory import (
    ExposureSaturated,
    Path,
    Unreachable,
    concat,
    evaluate_exposure,
    extract_path,
    local_optimize,
    plan_path,
    segment_exposures,
)
from conftest import uniform_field

WALLS = [
    [(1.0, 1.0), (3.0, 1.0), (3.0, 1.4), (1.0, 1.4)],
    [(1.0, 2.6), (3.0, 2.6), (3.0, 3.0), (1.0, 3.0)],
    [(1.0, 1.4), (1.4, 1.4), (1.4, 2.6), (1.0, 2.6)],
    [(2.6, 1.4), (3.0, 1.4), (3.0, 2.6), (2.6, 2.6)],
]


@pytest.fixture
def peak_field():
    return build_field([SensorNode(position=(0.5, 0.5), model=AttenuatedDisk(lam=0.05, mu=2.0, s_max=20.0))])


# ---------------------------------------------------------------------------
# exposure

def test_constant_intensity_exposure_is_length():
    field = uniform_field()
    path = Path(waypoints=[[0.0, 0.0], [3.0, 4.0], [3.0, 6.0]], dt=0.1)
    assert evaluate_exposure(field, path, 1e-2) == pytest.approx(7.0, rel=1e-12)


def test_segment_exposure_matches_quadrature():
    field = build_field([SensorNode(position=(0.0, 0.0), model=AttenuatedDisk(lam=4.0, mu=2.0))])
    exposure = segment_exposures(field, [[1.0, 0.0]], [[1.0, 3.0]], 1e-3)[0]
    reference, _ = integrate.quad(lambda y: 4.0 / (1.0 + y * y), 0.0, 3.0)
    assert reference == pytest.approx(4.0 * math.atan(3.0))
    assert exposure == pytest.approx(reference, rel=1e-4)


def test_zero_length_segment_has_zero_exposure():
    field = uniform_field()
    assert segment_exposures(field, [[1.0, 1.0]], [[1.0, 1.0]], 1e-3)[0] == 0.0


def test_segment_exposures_rejects_bad_resolution():
    with pytest.raises(ValueError):
        segment_exposures(uniform_field(), [[0.0, 0.0]], [[1.0, 0.0]], 0.0)


def test_exposure_is_additive_under_concatenation(peak_field):
    first = Path(waypoints=[[0.0, 0.0], [0.3, 0.6], [0.5, 0.45]], dt=0.1)
    second = Path(waypoints=[[0.5, 0.45], [0.8, 0.9], [1.0, 1.0]], dt=0.1)
    joined = concat(first, second)
    assert len(joined) == 5
    total = evaluate_exposure(peak_field, first, 1e-3) + evaluate_exposure(peak_field, second, 1e-3)
    assert evaluate_exposure(peak_field, joined, 1e-3) == pytest.approx(total, rel=1e-12)


def test_concat_requires_meeting_paths():
    with pytest.raises(ValueError):
        concat(Path(waypoints=[[0, 0], [1, 0]], dt=1.0), Path(waypoints=[[1, 1], [2, 2]], dt=1.0))


def test_path_validation_and_immutability():
    with pytest.raises(ValueError):
        Path(waypoints=[[0.0, 0.0]], dt=0.1)
    with pytest.raises(ValueError):
        Path(waypoints=[[0.0, 0.0], [1.0, 1.0]], dt=0.0)
    path = Path(waypoints=[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], dt=0.5)
    with pytest.raises(ValueError):
        path.waypoints[0, 0] = 3.0
    assert np.allclose(path.times, [0.0, 0.5, 1.0])
    assert path.length == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# local optimization

def _straight_path(start, end, steps):
    return Path(waypoints=np.linspace(start, end, steps + 1), dt=0.1)


def test_two_point_path_is_unchanged(unit_domain, peak_field):
    path = _straight_path([0.0, 0.5], [1.0, 0.5], 1)
    assert local_optimize(peak_field, unit_domain, path, SolverConfig()) is path


def test_zero_passes_leave_path_unchanged(unit_domain, peak_field):
    path = _straight_path([0.0, 0.5], [1.0, 0.5], 10)
    result = local_optimize(peak_field, unit_domain, path, SolverConfig(optimizer_passes=0))
    assert np.array_equal(result.waypoints, path.waypoints)


def test_path_through_a_peak_is_improved(unit_domain, peak_field):
    path = _straight_path([0.0, 0.5], [1.0, 0.5], 10)
    result = local_optimize(peak_field, unit_domain, path, SolverConfig(dt=0.1), h_eval=1e-3)
    before = evaluate_exposure(peak_field, path, 1e-3)
    after = evaluate_exposure(peak_field, result, 1e-3)
    assert after < before
    assert np.array_equal(result.waypoints[0], path.waypoints[0])
    assert np.array_equal(result.waypoints[-1], path.waypoints[-1])
    assert len(result) == len(path)


def test_local_optimization_never_increases_exposure(unit_domain, peak_field):
    rng = np.random.default_rng(13)
    for seed in range(10):
        waypoints = np.vstack([[0.05, 0.05], rng.uniform(0.1, 0.9, size=(6, 2)), [0.95, 0.95]])
        path = Path(waypoints=waypoints, dt=0.1)
        config = SolverConfig(dt=0.1, optimizer_seed=seed)
        result = local_optimize(peak_field, unit_domain, path, config, h_eval=1e-3)
        assert evaluate_exposure(peak_field, result, 1e-3) <= evaluate_exposure(peak_field, path, 1e-3)


def test_local_optimization_is_seeded(unit_domain, peak_field):
    path = _straight_path([0.0, 0.5], [1.0, 0.5], 10)
    config = SolverConfig(dt=0.1, optimizer_seed=5)
    a = local_optimize(peak_field, unit_domain, path, config, h_eval=1e-3)
    b = local_optimize(peak_field, unit_domain, path, config, h_eval=1e-3)
    assert np.array_equal(a.waypoints, b.waypoints)


def test_local_optimization_keeps_segments_clear():
    domain = build_domain((0.0, 0.0), (1.0, 1.0), [[(0.45, 0.2), (0.55, 0.2), (0.55, 0.45), (0.45, 0.45)]])
    field = build_field([SensorNode(position=(0.5, 0.6), model=AttenuatedDisk(lam=0.05, mu=2.0, s_max=20.0))])
    path = _straight_path([0.0, 0.5], [1.0, 0.5], 10)
    result = local_optimize(field, domain, path, SolverConfig(dt=0.1), h_eval=1e-3)
    assert np.all(domain.segments_clear(result.waypoints[:-1], result.waypoints[1:]))


# ---------------------------------------------------------------------------
# extraction

def test_source_at_goal(random_grid, unit_domain):
    config = SolverConfig(dt=0.05, n_directions=16)
    field = uniform_field()
    goal = random_grid.vertices[random_grid.goal_index]
    value = solve(unit_domain, field, goal, config, random_grid)
    path = extract_path(value, field, unit_domain, goal, goal, config)
    assert len(path) == 2
    assert evaluate_exposure(field, path, 1e-3) == 0.0


def test_source_in_obstacle_is_rejected(random_grid):
    domain = build_domain((0.0, 0.0), (1.0, 1.0), [[(0.7, 0.7), (0.9, 0.7), (0.9, 0.9), (0.7, 0.9)]])
    config = SolverConfig(dt=0.05, n_directions=16)
    field = uniform_field()
    value = initial_value_field(random_grid, config)
    with pytest.raises(SourceInObstacle):
        extract_path(value, field, domain, (0.8, 0.8), (0.3, 0.4), config)


def test_constant_intensity_path_is_nearly_straight(unit_domain):
    field = uniform_field()
    goal, source = (0.2, 0.3), (0.85, 0.9)
    grid = build_grid(unit_domain, field, goal, [source], GridConfig(points_per_node=2000, rng_seed=4))
    config = SolverConfig(dt=0.02, n_directions=36)
    value = solve(unit_domain, field, goal, config, grid)
    result = plan_path(value, field, unit_domain, source, goal, config)
    distance = math.dist(goal, source)
    assert np.array_equal(result.path.source, source)
    assert np.array_equal(result.path.goal, goal)
    assert distance - 1e-9 <= result.exposure <= 1.05 * distance
    assert result.exposure <= result.exposure_unoptimized
    # the recovered value at the source estimates the same exposure
    assert result.value_at_source == pytest.approx(distance, rel=0.1)


def test_path_waypoints_follow_the_step_length(unit_domain):
    field = uniform_field()
    goal, source = (0.2, 0.3), (0.85, 0.9)
    grid = build_grid(unit_domain, field, goal, [source], GridConfig(points_per_node=500, rng_seed=4))
    config = SolverConfig(dt=0.04, n_directions=36)
    value = solve(unit_domain, field, goal, config, grid)
    path = extract_path(value, field, unit_domain, source, goal, config)
    hops = np.linalg.norm(np.diff(path.waypoints, axis=0), axis=1)
    assert np.allclose(hops[:-1], config.step_length)
    assert hops[-1] <= config.step_length + 1e-12


def test_enclosed_source_is_unreachable():
    domain = build_domain((0.0, 0.0), (4.0, 4.0), WALLS)
    field = uniform_field(omega=10.0)
    grid = build_grid(domain, field, (0.5, 0.5), [(2.0, 2.0)],
                      GridConfig(points_per_node=200, boundary_spacing=0.05, rng_seed=2))
    config = SolverConfig(dt=0.1, n_directions=16)
    value = solve(domain, field, (0.5, 0.5), config, grid)
    with pytest.raises(Unreachable) as info:
        extract_path(value, field, domain, (2.0, 2.0), (0.5, 0.5), config)
    assert info.value.source == (2.0, 2.0)
    # recomputed from the stencils when the field carries no reachability
    value.reachable = None
    with pytest.raises(Unreachable):
        extract_path(value, field, domain, (2.0, 2.0), (0.5, 0.5), config)


def test_saturated_exposure_is_not_reported_unreachable():
    domain = build_domain((0.0, 0.0), (4.0, 4.0))
    # capped at 30 everywhere in the square
    node = SensorNode(position=(2.0, 2.0), model=AttenuatedDisk(lam=1e6, mu=2.0, s_max=30.0))
    source, goal = (0.4, 2.0), (3.8, 2.0)
    config = SolverConfig(dt=0.1, n_directions=16)
    saturated = build_field([node], omega=1.0)
    grid = build_grid(domain, saturated, goal, [source], GridConfig(points_per_node=400, rng_seed=1))
    value = solve(domain, saturated, goal, config, grid)
    at_source = int(np.flatnonzero(np.all(grid.vertices == source, axis=1))[0])
    assert value.vbar[at_source] > 1.0 - 1e-12
    assert value.reachable[at_source]
    with pytest.raises(ExposureSaturated) as info:
        extract_path(value, saturated, domain, source, goal, config)
    assert info.value.omega == 1.0
    assert 'omega=1' in str(info.value)
    assert info.value.source == source

    # same geometry, intensity rescaled into range
    rescaled = build_field([node], omega=30.0)
    value = solve(domain, rescaled, goal, config, grid)
    path = extract_path(value, rescaled, domain, source, goal, config)
    assert np.array_equal(path.goal, goal)

