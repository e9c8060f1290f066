"""Subcommand handlers for the command-line driver."""

import argparse
import asyncio
from dataclasses import dataclass
from pathlib import Path as FilePath

from geometry import GeometryError, build_grid
from solver import NonConvergence
from trajectory import Unreachable, evaluate_exposure
from .benchmark import run_benchmark
from .export import read_path_csv, write_grid_csv, write_triangles_csv
from .oracle import lattice_shortest_path
from .runner import EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_OK, EXIT_UNREACHABLE, run_solve
from .scenario import ScenarioError, load_scenario


def positive_float(text: str) -> float:
    """argparse type: a finite number > 0."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < value < float('inf'):
        raise argparse.ArgumentTypeError(f"must be > 0 (got {text})")
    return value


def positive_int(text: str) -> int:
    """argparse type: an integer >= 1."""
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1 (got {text})")
    return value


@dataclass
class Settings:
    """Environment-level defaults (see main.py)."""
    jobs: int = 1
    output_dir: str = "./data/runs"
    db_path: str = "./data/benchmarks.db"
    workers: int = 1
    verbose: bool = False

    def solver_defaults(self) -> dict:
        return {'workers': self.workers}


class CommandHandler:
    """Handler for CLI subcommands."""

    # Command descriptions for help system
    COMMAND_HELP = {
        'solve': 'Solve a scenario and write field/grid/path CSVs plus result.yaml',
        'eval': 'Raw exposure of a t,x,y path CSV in a scenario\'s sensor field',
        'oracle': 'Lattice Dijkstra exposure for every source (16 neighbours, 48 with --reach 4)',
        'grid': 'Build the scenario grid, print its statistics and write it as CSV',
        'bench': 'Run a benchmark manifest and summarize improvements over references',
    }

    @staticmethod
    def register_all(subparsers: argparse._SubParsersAction):
        """Register all commands with the parser."""
        p = subparsers.add_parser('solve', help=CommandHandler.COMMAND_HELP['solve'])
        p.add_argument('scenario')
        p.add_argument('--out', help='Output directory (default: $MEP_OUTPUT_DIR/<scenario name>)')
        p.set_defaults(handler=CommandHandler.cmd_solve)

        p = subparsers.add_parser('eval', help=CommandHandler.COMMAND_HELP['eval'])
        p.add_argument('scenario')
        p.add_argument('path_csv')
        p.add_argument('--h', type=positive_float, help='Evaluation resolution (default: scenario eval.h_eval)')
        p.set_defaults(handler=CommandHandler.cmd_eval)

        p = subparsers.add_parser('oracle', help=CommandHandler.COMMAND_HELP['oracle'])
        p.add_argument('scenario')
        p.add_argument('--h', type=positive_float, required=True, help='Lattice spacing')
        p.add_argument('--reach', type=positive_int, default=2,
                       help='Neighbour reach: offsets up to this many lattice steps (default: 2)')
        p.set_defaults(handler=CommandHandler.cmd_oracle)

        p = subparsers.add_parser('grid', help=CommandHandler.COMMAND_HELP['grid'])
        p.add_argument('scenario')
        p.add_argument('--out', required=True, help='Grid CSV file (triangles go to <stem>_triangles.csv)')
        p.set_defaults(handler=CommandHandler.cmd_grid)

        p = subparsers.add_parser('bench', help=CommandHandler.COMMAND_HELP['bench'])
        p.add_argument('manifest')
        p.add_argument('--refs', help='Reference exposure CSV (distribution,n,ordinal,exposure)')
        p.add_argument('--jobs', type=positive_int, help='Concurrent instances (default: $MEP_JOBS)')
        p.add_argument('--out', help='Report directory (default: next to the manifest)')
        p.add_argument('--db', help='SQLite file for records (default: $MEP_DB_PATH)')
        p.set_defaults(handler=CommandHandler.cmd_bench)

    @staticmethod
    def cmd_solve(args: argparse.Namespace, settings: Settings) -> int:
        """Solve a scenario."""
        scenario = load_scenario(args.scenario, solver_defaults=settings.solver_defaults())
        label = scenario.name or FilePath(args.scenario).stem
        out_dir = FilePath(args.out) if args.out else FilePath(settings.output_dir) / label
        print(f"Scenario: {label} ({len(scenario.nodes)} nodes, "
              f"{len(scenario.domain.obstacles)} obstacles, {len(scenario.sources)} sources)")

        report = run_solve(scenario, out_dir=out_dir, verbose=settings.verbose)

        for i, source in enumerate(scenario.sources):
            result = report.result_for(i)
            if result is not None:
                print(f"✓ Source {i} {tuple(source)}: exposure {result.exposure:.8g}, "
                      f"V(source) {result.value_at_source:.6g} (scaled), "
                      f"{result.outer_iters} iterations, {result.wall_time:.2f}s")
            elif i in report.saturated:
                print(f"⚠ Source {i} {tuple(source)}: {report.failures.get(i)}")
            else:
                print(f"✗ Source {i} {tuple(source)}: {report.failures.get(i)}")
        print(f"Output written to {out_dir}")
        return report.exit_code

    @staticmethod
    def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
        """Evaluate an external path."""
        scenario = load_scenario(args.scenario)
        path = read_path_csv(args.path_csv, dt=scenario.solver_config.dt)
        h_eval = args.h if args.h is not None else scenario.eval_resolution
        exposure = evaluate_exposure(scenario.intensity_field, path, h_eval)
        print(f"✓ Exposure: {exposure:.10g} ({len(path)} waypoints, length {path.length:.6g}, h={h_eval:g})")
        return EXIT_OK

    @staticmethod
    def cmd_oracle(args: argparse.Namespace, settings: Settings) -> int:
        """Lattice oracle for every source."""
        scenario = load_scenario(args.scenario)
        code = EXIT_OK
        for i, source in enumerate(scenario.sources):
            try:
                result = lattice_shortest_path(scenario, args.h, source_index=i, reach=args.reach)
            except Unreachable as e:
                print(f"✗ Source {i} {tuple(source)}: {e}")
                code = EXIT_UNREACHABLE
                continue
            print(f"✓ Source {i} {tuple(source)}: lattice exposure {result.exposure:.8g} "
                  f"(h={args.h:g}, {result.nodes} nodes, {result.edges} edges)")
        return code

    @staticmethod
    def cmd_grid(args: argparse.Namespace, settings: Settings) -> int:
        """Build and export the grid."""
        scenario = load_scenario(args.scenario)
        grid = build_grid(scenario.domain, scenario.intensity_field, scenario.goal,
                          scenario.sources, scenario.grid_config)
        out = FilePath(args.out)
        write_grid_csv(out, grid)
        write_triangles_csv(out.with_name(f"{out.stem}_triangles.csv"), grid)
        counts = ', '.join(f"{name}={count}" for name, count in grid.class_counts().items())
        print(f"✓ Grid: {len(grid)} vertices, {grid.n_triangles} triangles")
        print(f"  Classes: {counts}")
        print(f"  Max gap: {grid.max_gap:.6g}")
        return EXIT_OK

    @staticmethod
    def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
        """Run a benchmark manifest."""
        jobs = args.jobs if args.jobs is not None else settings.jobs
        out_dir = FilePath(args.out) if args.out else FilePath(args.manifest).parent
        db_path = args.db if args.db else settings.db_path
        print(f"Benchmark: {args.manifest} (jobs={jobs})")
        records, summaries = asyncio.run(run_benchmark(
            args.manifest, refs=args.refs, jobs=jobs, out_dir=out_dir, db_path=db_path,
            solver_defaults=settings.solver_defaults(), verbose=True
        ))
        for s in summaries:
            if s.mean_improvement is None:
                print(f"  {s.distribution}/{s.n_nodes}: {s.solved}/{s.instances} solved, no references")
            else:
                print(f"  {s.distribution}/{s.n_nodes}: {s.solved}/{s.instances} solved, "
                      f"improvement {s.mean_improvement:.2f}% ± {s.std_improvement:.2f}")
        failed = sum(1 for r in records if r.status != 'ok')
        if failed:
            print(f"⚠ {failed} instance(s) failed (see bench_report.csv)")
        print(f"Reports written to {out_dir}")
        return EXIT_OK


def dispatch(args: argparse.Namespace, settings: Settings) -> int:
    """Run the selected handler and map errors to exit codes."""
    try:
        return args.handler(args, settings)
    except (ScenarioError, GeometryError) as e:
        print(f"✗ {e}")
        return EXIT_INVALID
    except ValueError as e:
        print(f"✗ {e}")
        return EXIT_INVALID
    except NonConvergence as e:
        print(f"✗ {e}")
        return EXIT_NONCONVERGENCE
