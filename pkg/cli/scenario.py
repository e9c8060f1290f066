"""
Scenario documents: loading, validation, serialization and node import.

A scenario is a YAML mapping with the sections

    name:       optional label
    domain:     {min: [x, y], max: [x, y]}
    obstacles:  [[[x, y], ...], ...]
    nodes:      [{x, y, model, params: {...}}, ...]
    nodes_file: {path, model, params}     (rows appended after `nodes`)
    intensity:  {mode, omega, eps_floor}
    sources:    [[x, y], ...]
    goal:       [x, y]
    grid:       {points_per_node, boundary_spacing, base_rate, seed}
    solver:     {dt, speed, n_directions, tol_policy_eval, tol_outer,
                 tolerances: {policy_eval, outer}, max_eval_sweeps,
                 max_outer_iters, eval_method, workers,
                 optimizer_candidates, optimizer_passes, optimizer_seed}
    eval:       {h_eval}
"""

import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from geometry import Domain, GridConfig
from sensing import (
    DEFAULT_EPS_FLOOR,
    DEFAULT_OMEGA,
    MAX_SENSOR,
    MODEL_KINDS,
    AttenuatedDisk,
    IntensityField,
    NoisyProbability,
    SensingModel,
    SensorNode,
    build_field,
    model_from_params,
)
from solver import SolverConfig

TOP_LEVEL_FIELDS = ('name', 'domain', 'obstacles', 'nodes', 'nodes_file', 'intensity',
                    'sources', 'goal', 'grid', 'solver', 'eval')
DOMAIN_FIELDS = ('min', 'max')
NODE_FIELDS = ('x', 'y', 'model', 'params')
NODES_FILE_FIELDS = ('path', 'model', 'params')
INTENSITY_FIELDS = ('mode', 'omega', 'eps_floor')
GRID_FIELDS = ('points_per_node', 'boundary_spacing', 'base_rate', 'seed')
SOLVER_FLOAT_FIELDS = ('dt', 'speed', 'tol_policy_eval', 'tol_outer')
SOLVER_INT_FIELDS = ('n_directions', 'max_eval_sweeps', 'max_outer_iters', 'workers',
                     'optimizer_candidates', 'optimizer_passes', 'optimizer_seed')
SOLVER_FIELDS = SOLVER_FLOAT_FIELDS + SOLVER_INT_FIELDS + ('eval_method', 'tolerances')
TOLERANCE_ALIASES = {'policy_eval': 'tol_policy_eval', 'outer': 'tol_outer'}
EVAL_FIELDS = ('h_eval',)

_ROW_SPLIT = re.compile(r"[,\s]+")


class ScenarioError(Exception):
    """Base exception for scenario errors."""
    pass


class ParseError(ScenarioError):
    """Malformed document: syntax, unknown field or wrong type."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(location)})" if location else message)
        self.line = line
        self.field = field


class ValidationError(ScenarioError):
    """Well-formed document whose values break an invariant."""
    pass


def noisy_template() -> NoisyProbability:
    """Benchmark node model: lambda=100, mu=1, sigma=1, A=6."""
    return NoisyProbability(lam=100.0, mu=1.0, sigma=1.0, a_threshold=6.0)


@dataclass(frozen=True)
class Scenario:
    """
    One planning problem: environment, sensor field, endpoints and parameters.

    Attributes:
        h_eval: Exposure evaluation resolution (None -> 1e-3 * domain diameter)
    """
    domain: Domain
    nodes: Tuple[SensorNode, ...]
    sources: Tuple[Tuple[float, float], ...]
    goal: Tuple[float, float]
    intensity_mode: str = MAX_SENSOR
    omega: float = DEFAULT_OMEGA
    eps_floor: float = DEFAULT_EPS_FLOOR
    grid_config: GridConfig = field(default_factory=GridConfig)
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    h_eval: Optional[float] = None
    name: str = ""

    @property
    def intensity_field(self) -> IntensityField:
        return build_field(self.nodes, mode=self.intensity_mode, omega=self.omega, eps_floor=self.eps_floor)

    @property
    def eval_resolution(self) -> float:
        if self.h_eval is not None:
            return self.h_eval
        return 1e-3 * self.domain.diameter


# ---------------------------------------------------------------------------
# parsing helpers

def _line_of(root: Optional[yaml.Node], path: Sequence) -> Optional[int]:
    """1-based line of the node at `path` in a composed document, if found."""
    node = root
    line = None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            match = next(((k, v) for k, v in node.value if k.value == key), None)
            if match is None:
                return line
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


class _Reader:
    """Typed access to a loaded document with field paths in every error."""

    def __init__(self, root: Optional[yaml.Node]):
        self.root = root

    def fail(self, message: str, path: Sequence) -> ParseError:
        name = '.'.join(str(p) for p in path)
        return ParseError(message, line=_line_of(self.root, path), field=name or None)

    def mapping(self, value, path: Sequence, allowed: Sequence[str]) -> Dict[str, Any]:
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise self.fail("expected a mapping", path)
        for key in value:
            if key not in allowed:
                raise self.fail(f"unknown field '{key}'", list(path) + [key])
        return value

    def number(self, value, path: Sequence) -> float:
        if isinstance(value, bool) or value is None:
            raise self.fail(f"expected a number, got {value!r}", path)
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value.strip())
            except ValueError:
                pass
        raise self.fail(f"expected a number, got {value!r}", path)

    def integer(self, value, path: Sequence) -> int:
        number = self.number(value, path)
        if not number.is_integer():
            raise self.fail(f"expected an integer, got {value!r}", path)
        return int(number)

    def point(self, value, path: Sequence) -> Tuple[float, float]:
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise self.fail("expected a point [x, y]", path)
        return (self.number(value[0], list(path) + [0]), self.number(value[1], list(path) + [1]))

    def points(self, value, path: Sequence) -> List[Tuple[float, float]]:
        if not isinstance(value, list):
            raise self.fail("expected a list of points", path)
        return [self.point(v, list(path) + [i]) for i, v in enumerate(value)]

    def model(self, kind, params, path: Sequence) -> SensingModel:
        if kind not in MODEL_KINDS:
            raise self.fail(f"unknown sensing model {kind!r} (expected one of {sorted(MODEL_KINDS)})",
                            list(path) + ['model'])
        params = self.mapping(params, list(path) + ['params'], _model_param_names(kind))
        numeric = {key: self.number(v, list(path) + ['params', key]) for key, v in params.items()}
        try:
            return model_from_params(kind, numeric)
        except ValueError as e:
            raise ValidationError(f"{'.'.join(str(p) for p in path)}: {e}")


def _model_param_names(kind: str) -> Tuple[str, ...]:
    names = {
        'boolean_disk': ('r', 'delta'),
        'attenuated_disk': ('lambda', 'mu', 's_max'),
        'probability_exp': ('alpha', 'beta'),
        'noisy_probability': ('lambda', 'mu', 'sigma', 'a_threshold', 'A', 's_max'),
    }
    return names[kind]


def _validated(build, what: str):
    try:
        return build()
    except ValueError as e:
        raise ValidationError(f"{what}: {e}")


# ---------------------------------------------------------------------------
# node import

def import_nodes(path, template: Optional[SensingModel] = None) -> List[SensorNode]:
    """
    Read a coordinate table (one `x y` or `x,y` row per node).

    Blank lines and lines starting with '#' are skipped.

    Args:
        path: Table file
        template: Model given to every node (NoisyProbability benchmark model if None)

    Raises:
        ParseError: A row without exactly two numeric columns
    """
    template = noisy_template() if template is None else template
    nodes = []
    text = FilePath(path).read_text()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        columns = [c for c in _ROW_SPLIT.split(line) if c]
        if len(columns) != 2:
            raise ParseError(f"expected 2 columns, found {len(columns)} in {FilePath(path).name}", line=number)
        try:
            x, y = float(columns[0]), float(columns[1])
        except ValueError:
            raise ParseError(f"non-numeric row {line!r} in {FilePath(path).name}", line=number)
        nodes.append(SensorNode(position=(x, y), model=template))
    return nodes


def heterogeneous_nodes(
    n: int,
    domain: Domain,
    lambdas: Sequence[float] = (1.0, 3.0),
    mu: float = 2.0,
    seed: int = 0
) -> List[SensorNode]:
    """
    Nodes at seeded uniform positions in the free part of the domain, each an
    AttenuatedDisk with lambda drawn uniformly from `lambdas`.
    """
    rng = np.random.default_rng(seed)
    nodes = []
    lower, upper = np.asarray(domain.lower), np.asarray(domain.upper)
    while len(nodes) < n:
        p = lower + rng.random(2) * (upper - lower)
        if domain.points_in_obstacles(p)[0]:
            continue
        lam = float(lambdas[int(rng.integers(len(lambdas)))])
        nodes.append(SensorNode(position=(float(p[0]), float(p[1])), model=AttenuatedDisk(lam=lam, mu=mu)))
    return nodes


# ---------------------------------------------------------------------------
# loading

def parse_scenario(
    text: str,
    base_dir=None,
    solver_defaults: Optional[Dict[str, Any]] = None
) -> Scenario:
    """
    Parse and validate a scenario document.

    Args:
        text: YAML document
        base_dir: Directory relative `nodes_file.path` entries resolve against
        solver_defaults: Solver values applied when the document omits them

    Raises:
        ParseError: Syntax error, unknown field or wrong type
        ValidationError: Violated invariant
    """
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        raise ParseError(f"invalid YAML: {getattr(e, 'problem', None) or e}",
                         line=mark.line + 1 if mark else None)
    reader = _Reader(root)
    data = reader.mapping(data, [], TOP_LEVEL_FIELDS)

    for required in ('domain', 'sources', 'goal'):
        if required not in data:
            raise ParseError(f"missing required field '{required}'", field=required)

    section = reader.mapping(data['domain'], ['domain'], DOMAIN_FIELDS)
    if 'min' not in section or 'max' not in section:
        raise ParseError("domain needs 'min' and 'max'", line=_line_of(root, ['domain']), field='domain')
    lower = reader.point(section['min'], ['domain', 'min'])
    upper = reader.point(section['max'], ['domain', 'max'])

    obstacles_raw = data.get('obstacles') or []
    if not isinstance(obstacles_raw, list):
        raise reader.fail("expected a list of polygons", ['obstacles'])
    obstacles = [reader.points(polygon, ['obstacles', i]) for i, polygon in enumerate(obstacles_raw)]
    domain = _validated(lambda: Domain(lower=lower, upper=upper,
                                       obstacles=tuple(tuple(p) for p in obstacles)), "domain")

    nodes = []
    nodes_raw = data.get('nodes') or []
    if not isinstance(nodes_raw, list):
        raise reader.fail("expected a list of nodes", ['nodes'])
    for i, entry in enumerate(nodes_raw):
        entry = reader.mapping(entry, ['nodes', i], NODE_FIELDS)
        for key in ('x', 'y', 'model'):
            if key not in entry:
                raise ParseError(f"node needs '{key}'", line=_line_of(root, ['nodes', i]), field=f"nodes.{i}")
        x = reader.number(entry['x'], ['nodes', i, 'x'])
        y = reader.number(entry['y'], ['nodes', i, 'y'])
        model = reader.model(entry['model'], entry.get('params'), ['nodes', i])
        nodes.append(SensorNode(position=(x, y), model=model))

    if data.get('nodes_file') is not None:
        table_cfg = reader.mapping(data['nodes_file'], ['nodes_file'], NODES_FILE_FIELDS)
        if 'path' not in table_cfg:
            raise reader.fail("nodes_file needs 'path'", ['nodes_file'])
        template = noisy_template()
        if 'model' in table_cfg:
            template = reader.model(table_cfg['model'], table_cfg.get('params'), ['nodes_file'])
        table = FilePath(str(table_cfg['path']))
        if not table.is_absolute() and base_dir is not None:
            table = FilePath(base_dir) / table
        if not table.exists():
            raise ValidationError(f"nodes_file: {table} does not exist")
        nodes.extend(import_nodes(table, template))

    if not nodes:
        raise ValidationError("scenario needs at least one sensor node")
    for i, node in enumerate(nodes):
        if not domain.contains(node.position)[0]:
            raise ValidationError(f"node {i} at {node.position} lies outside the domain")

    section = reader.mapping(data.get('intensity'), ['intensity'], INTENSITY_FIELDS)
    mode = str(section.get('mode', MAX_SENSOR))
    omega = reader.number(section['omega'], ['intensity', 'omega']) if 'omega' in section else DEFAULT_OMEGA
    eps_floor = (reader.number(section['eps_floor'], ['intensity', 'eps_floor'])
                 if 'eps_floor' in section else DEFAULT_EPS_FLOOR)
    _validated(lambda: build_field(nodes, mode=mode, omega=omega, eps_floor=eps_floor), "intensity")

    sources = reader.points(data['sources'], ['sources'])
    if not sources:
        raise ValidationError("scenario needs at least one source")
    goal = reader.point(data['goal'], ['goal'])
    if not domain.contains(goal)[0] or domain.points_in_obstacles(goal)[0]:
        raise ValidationError(f"goal {goal} must lie in the free part of the domain")
    for i, source in enumerate(sources):
        if not domain.contains(source)[0] or domain.points_in_obstacles(source)[0]:
            raise ValidationError(f"source {i} at {source} must lie in the free part of the domain")

    section = reader.mapping(data.get('grid'), ['grid'], GRID_FIELDS)
    grid_kwargs = {}
    if 'points_per_node' in section:
        grid_kwargs['points_per_node'] = reader.integer(section['points_per_node'], ['grid', 'points_per_node'])
    if section.get('boundary_spacing') is not None:
        grid_kwargs['boundary_spacing'] = reader.number(section['boundary_spacing'], ['grid', 'boundary_spacing'])
    if 'base_rate' in section:
        grid_kwargs['base_rate'] = reader.number(section['base_rate'], ['grid', 'base_rate'])
    if 'seed' in section:
        grid_kwargs['rng_seed'] = reader.integer(section['seed'], ['grid', 'seed'])
    grid_config = _validated(lambda: GridConfig(**grid_kwargs), "grid")

    section = reader.mapping(data.get('solver'), ['solver'], SOLVER_FIELDS)
    solver_kwargs = dict(solver_defaults or {})
    for key in SOLVER_FLOAT_FIELDS:
        if key in section:
            solver_kwargs[key] = reader.number(section[key], ['solver', key])
    for key in SOLVER_INT_FIELDS:
        if key in section:
            solver_kwargs[key] = reader.integer(section[key], ['solver', key])
    if 'eval_method' in section:
        solver_kwargs['eval_method'] = str(section['eval_method'])
    tolerances = reader.mapping(section.get('tolerances'), ['solver', 'tolerances'], tuple(TOLERANCE_ALIASES))
    for key, target in TOLERANCE_ALIASES.items():
        if key in tolerances:
            solver_kwargs[target] = reader.number(tolerances[key], ['solver', 'tolerances', key])
    solver_config = _validated(lambda: SolverConfig(**solver_kwargs), "solver")

    section = reader.mapping(data.get('eval'), ['eval'], EVAL_FIELDS)
    h_eval = None
    if section.get('h_eval') is not None:
        h_eval = reader.number(section['h_eval'], ['eval', 'h_eval'])
        if not h_eval > 0:
            raise ValidationError(f"eval.h_eval must be > 0 (got {h_eval})")

    return Scenario(
        domain=domain,
        nodes=tuple(nodes),
        sources=tuple(sources),
        goal=goal,
        intensity_mode=mode,
        omega=omega,
        eps_floor=eps_floor,
        grid_config=grid_config,
        solver_config=solver_config,
        h_eval=h_eval,
        name=str(data.get('name') or ''),
    )


def load_scenario(path, solver_defaults: Optional[Dict[str, Any]] = None) -> Scenario:
    """
    Read and validate a scenario file.

    Raises:
        ParseError: Unreadable or malformed document
        ValidationError: Violated invariant
    """
    path = FilePath(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read scenario {path}: {e}")
    return parse_scenario(text, base_dir=path.parent, solver_defaults=solver_defaults)


# ---------------------------------------------------------------------------
# serialization

def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Canonical document for a scenario; nodes are always written inline."""
    solver = scenario.solver_config.to_dict()
    solver.pop('verbose', None)
    document = {
        'name': scenario.name,
        'domain': scenario.domain.to_dict(),
        'obstacles': [[list(v) for v in polygon] for polygon in scenario.domain.obstacles],
        'nodes': [node.to_dict() for node in scenario.nodes],
        'intensity': {
            'mode': scenario.intensity_mode,
            'omega': scenario.omega,
            'eps_floor': scenario.eps_floor,
        },
        'sources': [list(s) for s in scenario.sources],
        'goal': list(scenario.goal),
        'grid': scenario.grid_config.to_dict(),
        'solver': solver,
        'eval': {'h_eval': scenario.h_eval},
    }
    return document


def serialize(scenario: Scenario) -> str:
    """YAML text that load_scenario/parse_scenario turn back into an equal Scenario."""
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False, default_flow_style=None)


def write_atomic(path, text: str):
    """Write text to a temporary file next to `path`, then rename it over `path`."""
    path = FilePath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def save_scenario(scenario: Scenario, path):
    write_atomic(path, serialize(scenario))
