"""Scenario files, solve driver, lattice oracle and benchmark harness."""

from .scenario import (
    Scenario,
    ScenarioError,
    ParseError,
    ValidationError,
    load_scenario,
    parse_scenario,
    serialize,
    save_scenario,
    scenario_to_dict,
    import_nodes,
    heterogeneous_nodes,
    noisy_template,
)
from .runner import SolveReport, run_solve
from .oracle import dijkstra_oracle, lattice_shortest_path, richardson_estimate
from .benchmark import improvement, run_benchmark, summarize
from .commands import CommandHandler, Settings, dispatch

__all__ = [
    'Scenario', 'ScenarioError', 'ParseError', 'ValidationError',
    'load_scenario', 'parse_scenario', 'serialize', 'save_scenario', 'scenario_to_dict',
    'import_nodes', 'heterogeneous_nodes', 'noisy_template',
    'SolveReport', 'run_solve',
    'dijkstra_oracle', 'lattice_shortest_path', 'richardson_estimate',
    'improvement', 'run_benchmark', 'summarize',
    'CommandHandler', 'Settings', 'dispatch',
]
