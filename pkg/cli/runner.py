"""Scenario driver: one grid, one solve, one path per source."""

import time
from dataclasses import dataclass, field, replace
from pathlib import Path as FilePath
from typing import Dict, List, Optional

from geometry import SpatialGrid, build_grid
from solver import NonConvergence, ValueField, solve
from trajectory import ExposureSaturated, PathResult, Unreachable, plan_path
from .export import write_field_csv, write_grid_csv, write_path_csv, write_triangles_csv, write_yaml
from .scenario import Scenario, scenario_to_dict

EXIT_OK = 0
EXIT_UNREACHABLE = 1
EXIT_INVALID = 2
EXIT_NONCONVERGENCE = 3


@dataclass
class SolveReport:
    """Everything one run_solve produced."""
    scenario: Scenario
    results: List[PathResult] = field(default_factory=list)
    failures: Dict[int, str] = field(default_factory=dict)
    grid: Optional[SpatialGrid] = None
    value: Optional[ValueField] = None
    grid_time: float = 0.0
    solve_time: float = 0.0
    nonconverged: bool = False
    saturated: List[int] = field(default_factory=list)

    @property
    def setup_time(self) -> float:
        return self.grid_time + self.solve_time

    @property
    def exit_code(self) -> int:
        if self.nonconverged:
            return EXIT_NONCONVERGENCE
        if self.saturated:
            return EXIT_INVALID
        if self.failures:
            return EXIT_UNREACHABLE
        return EXIT_OK

    def result_for(self, source_index: int) -> Optional[PathResult]:
        return next((r for r in self.results if r.source_index == source_index), None)

    def to_dict(self) -> dict:
        document = {
            'scenario': self.scenario.name,
            'status': {EXIT_OK: 'ok', EXIT_UNREACHABLE: 'unreachable', EXIT_INVALID: 'saturated',
                       EXIT_NONCONVERGENCE: 'nonconvergence'}[self.exit_code],
            'grid_time': self.grid_time,
            'solve_time': self.solve_time,
        }
        if self.grid is not None:
            document['grid'] = {
                'vertices': len(self.grid),
                'triangles': self.grid.n_triangles,
                'max_gap': self.grid.max_gap,
                'classes': self.grid.class_counts(),
            }
        if self.value is not None:
            document['solver'] = {
                'outer_iters': self.value.outer_iters,
                'eval_sweeps': self.value.eval_sweeps,
                'residual': self.value.residual,
            }
        document['paths'] = [r.to_dict() for r in self.results]
        document['failures'] = [{'source_index': i, 'error': message}
                                for i, message in sorted(self.failures.items())]
        document['config'] = scenario_to_dict(self.scenario)
        return document


def run_solve(scenario: Scenario, out_dir=None, verbose: bool = False) -> SolveReport:
    """
    Build the grid once, solve once, then plan a path for every source
    against the shared value field.

    Unreachable and saturated sources are recorded in `failures` and do not
    stop the others; solver non-convergence fails every source.

    Args:
        scenario: Validated scenario
        out_dir: Directory for field.csv, grid.csv, triangles.csv,
                 path_<i>.csv and result.yaml (nothing written if None)
        verbose: Print progress lines
    """
    config = scenario.solver_config
    if verbose and not config.verbose:
        config = replace(config, verbose=True)
    field_ = scenario.intensity_field
    report = SolveReport(scenario=scenario)

    started = time.perf_counter()
    report.grid = build_grid(scenario.domain, field_, scenario.goal, scenario.sources, scenario.grid_config)
    report.grid_time = time.perf_counter() - started
    if verbose:
        counts = report.grid.class_counts()
        print(f"  Grid: {len(report.grid)} vertices, {report.grid.n_triangles} triangles, "
              f"max gap {report.grid.max_gap:.4g} ({counts})")

    started = time.perf_counter()
    try:
        report.value = solve(scenario.domain, field_, scenario.goal, config, report.grid)
    except NonConvergence as e:
        report.solve_time = time.perf_counter() - started
        report.nonconverged = True
        for i in range(len(scenario.sources)):
            report.failures[i] = str(e)
        if verbose:
            print(f"✗ Solver did not converge: {e}")
        _write_outputs(report, out_dir)
        return report
    report.solve_time = time.perf_counter() - started
    if verbose:
        print(f"  Solver: converged after {report.value.outer_iters} iterations in {report.solve_time:.2f}s")

    for i, source in enumerate(scenario.sources):
        try:
            result = plan_path(
                report.value, field_, scenario.domain, source, scenario.goal, config,
                h_eval=scenario.eval_resolution, source_index=i, elapsed=report.setup_time
            )
        except Unreachable as e:
            report.failures[i] = str(e)
            if verbose:
                print(f"⚠ Source {i} {tuple(source)}: {e}")
            continue
        except ExposureSaturated as e:
            report.failures[i] = str(e)
            report.saturated.append(i)
            if verbose:
                print(f"⚠ Source {i} {tuple(source)}: {e}")
            continue
        report.results.append(result)
        if verbose:
            print(f"✓ Source {i} {tuple(source)}: exposure {result.exposure:.6g} "
                  f"(unoptimized {result.exposure_unoptimized:.6g}), {len(result.path)} waypoints")

    _write_outputs(report, out_dir)
    return report


def _write_outputs(report: SolveReport, out_dir):
    if out_dir is None:
        return
    out_dir = FilePath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if report.grid is not None:
        write_grid_csv(out_dir / 'grid.csv', report.grid)
        write_triangles_csv(out_dir / 'triangles.csv', report.grid)
    if report.value is not None:
        write_field_csv(out_dir / 'field.csv', report.value)
    for result in report.results:
        write_path_csv(out_dir / f'path_{result.source_index}.csv', result.path)
    write_yaml(out_dir / 'result.yaml', report.to_dict())
