"""
Benchmark harness: many scenario instances, solved concurrently, compared
with reference exposures and summarized per (distribution, n) group.

Manifest (YAML):

    instances:
      - scenario: exponential/30/ord-1.yaml   (relative to the manifest)
        distribution: Exponential
        n: 30
        ordinal: 1
    references: refs.csv                      (optional)

Reference table (CSV): distribution,n,ordinal,exposure
"""

import asyncio
import csv
import io
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from storage import BenchmarkRecord, Database
from storage.models import (
    STATUS_ERROR,
    STATUS_INVALID,
    STATUS_NONCONVERGENCE,
    STATUS_OK,
    STATUS_SATURATED,
    STATUS_UNREACHABLE,
)
from .export import csv_text
from .runner import run_solve
from .scenario import ParseError, ScenarioError, load_scenario, write_atomic

REPORT_HEADER = ('label', 'distribution', 'n', 'ordinal', 'status', 'exposure', 'wall_time',
                 'reference_exposure', 'improvement', 'error')
GROUP_HEADER = ('distribution', 'n', 'instances', 'solved', 'mean_improvement', 'std_improvement',
                'mean_exposure')
MANIFEST_FIELDS = ('instances', 'references')
INSTANCE_FIELDS = ('scenario', 'distribution', 'n', 'ordinal')

ReferenceKey = Tuple[str, int, int]


@dataclass
class BenchmarkInstance:
    scenario: FilePath
    distribution: str
    n_nodes: int
    ordinal: int

    @property
    def key(self) -> ReferenceKey:
        return (self.distribution, self.n_nodes, self.ordinal)


@dataclass
class GroupSummary:
    distribution: str
    n_nodes: int
    instances: int
    solved: int
    mean_improvement: Optional[float]
    std_improvement: Optional[float]
    mean_exposure: Optional[float]


def improvement(ours: float, reference: float) -> float:
    """Percent improvement over a reference: 100 * (ref - ours) / ref."""
    if reference == 0:
        raise ValueError("reference exposure must be non-zero")
    return 100.0 * (reference - ours) / reference


def load_manifest(path) -> Tuple[List[BenchmarkInstance], Optional[FilePath]]:
    """
    Raises:
        ParseError: Unreadable manifest, unknown or missing field
    """
    path = FilePath(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ParseError(f"cannot read manifest {path}: {e}")
    if not isinstance(data, dict):
        raise ParseError("manifest must be a mapping", field='instances')
    for key in data:
        if key not in MANIFEST_FIELDS:
            raise ParseError(f"unknown field '{key}'", field=key)
    instances = []
    for i, entry in enumerate(data.get('instances') or []):
        if not isinstance(entry, dict):
            raise ParseError("instance must be a mapping", field=f"instances.{i}")
        for key in entry:
            if key not in INSTANCE_FIELDS:
                raise ParseError(f"unknown field '{key}'", field=f"instances.{i}.{key}")
        if 'scenario' not in entry:
            raise ParseError("instance needs 'scenario'", field=f"instances.{i}")
        scenario = FilePath(str(entry['scenario']))
        if not scenario.is_absolute():
            scenario = path.parent / scenario
        try:
            instances.append(BenchmarkInstance(
                scenario=scenario,
                distribution=str(entry.get('distribution', 'default')),
                n_nodes=int(entry.get('n', 0)),
                ordinal=int(entry.get('ordinal', i + 1)),
            ))
        except (TypeError, ValueError):
            raise ParseError("n and ordinal must be integers", field=f"instances.{i}")
    references = data.get('references')
    if references is not None:
        references = FilePath(str(references))
        if not references.is_absolute():
            references = path.parent / references
    return instances, references


def load_references(path) -> Dict[ReferenceKey, float]:
    """
    Raises:
        ParseError: Missing columns or non-numeric values
    """
    path = FilePath(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read references {path}: {e}")
    reader = csv.DictReader(io.StringIO(text))
    required = {'distribution', 'n', 'ordinal', 'exposure'}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ParseError(f"{path.name} needs columns {sorted(required)}", line=1)
    references = {}
    for number, row in enumerate(reader, start=2):
        try:
            key = (row['distribution'].strip(), int(row['n']), int(row['ordinal']))
            references[key] = float(row['exposure'])
        except (TypeError, ValueError):
            raise ParseError(f"bad reference row {row!r}", line=number)
    return references


def solve_instance(scenario_path: str, solver_defaults: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Worker entry point (runs in a child process): solve one scenario file and
    report the exposure of its first source. Never raises.
    """
    started = time.perf_counter()
    try:
        scenario = load_scenario(scenario_path, solver_defaults=solver_defaults)
        report = run_solve(scenario)
    except ScenarioError as e:
        return {'status': STATUS_INVALID, 'error': str(e), 'wall_time': time.perf_counter() - started}
    except Exception as e:
        return {'status': STATUS_ERROR, 'error': f"{type(e).__name__}: {e}",
                'wall_time': time.perf_counter() - started, 'traceback': traceback.format_exc()}
    wall_time = time.perf_counter() - started
    if report.nonconverged:
        return {'status': STATUS_NONCONVERGENCE, 'error': report.failures.get(0), 'wall_time': wall_time}
    if 0 in report.saturated:
        return {'status': STATUS_SATURATED, 'error': report.failures.get(0), 'wall_time': wall_time}
    result = report.result_for(0)
    if result is None:
        return {'status': STATUS_UNREACHABLE, 'error': report.failures.get(0), 'wall_time': wall_time}
    return {'status': STATUS_OK, 'exposure': result.exposure, 'wall_time': wall_time}


def make_record(instance: BenchmarkInstance, outcome: Dict[str, Any],
                references: Dict[ReferenceKey, float]) -> BenchmarkRecord:
    reference = references.get(instance.key)
    exposure = outcome.get('exposure')
    gain = None
    if exposure is not None and reference:
        gain = improvement(exposure, reference)
    return BenchmarkRecord(
        distribution=instance.distribution,
        n_nodes=instance.n_nodes,
        ordinal=instance.ordinal,
        exposure=exposure,
        wall_time=outcome.get('wall_time'),
        reference_exposure=reference,
        improvement=gain,
        status=outcome.get('status', STATUS_ERROR),
        error=outcome.get('error'),
        scenario=str(instance.scenario),
    )


def summarize(records: List[BenchmarkRecord]) -> List[GroupSummary]:
    """
    Per-group mean and sample standard deviation (ddof=1; 0 for a single
    instance) of the improvement percentages, in first-seen group order.
    """
    groups: Dict[Tuple[str, int], List[BenchmarkRecord]] = {}
    for record in records:
        groups.setdefault((record.distribution, record.n_nodes), []).append(record)
    summaries = []
    for (distribution, n_nodes), members in groups.items():
        gains = np.array([r.improvement for r in members if r.improvement is not None], dtype=float)
        exposures = np.array([r.exposure for r in members if r.exposure is not None], dtype=float)
        summaries.append(GroupSummary(
            distribution=distribution,
            n_nodes=n_nodes,
            instances=len(members),
            solved=sum(1 for r in members if r.status == STATUS_OK),
            mean_improvement=float(gains.mean()) if len(gains) else None,
            std_improvement=(float(gains.std(ddof=1)) if len(gains) > 1 else 0.0) if len(gains) else None,
            mean_exposure=float(exposures.mean()) if len(exposures) else None,
        ))
    return summaries


def write_reports(out_dir, records: List[BenchmarkRecord], summaries: List[GroupSummary]):
    out_dir = FilePath(out_dir)
    rows = ((r.label, r.distribution, r.n_nodes, r.ordinal, r.status,
             _blank(r.exposure), _blank(r.wall_time), _blank(r.reference_exposure),
             _blank(r.improvement), r.error or '') for r in records)
    write_atomic(out_dir / 'bench_report.csv', csv_text(REPORT_HEADER, rows))
    rows = ((s.distribution, s.n_nodes, s.instances, s.solved, _blank(s.mean_improvement),
             _blank(s.std_improvement), _blank(s.mean_exposure)) for s in summaries)
    write_atomic(out_dir / 'bench_groups.csv', csv_text(GROUP_HEADER, rows))


def _blank(value):
    return '' if value is None else value


async def run_benchmark(
    manifest,
    refs=None,
    jobs: int = 1,
    out_dir=None,
    db_path: Optional[str] = None,
    solver_defaults: Optional[Dict[str, Any]] = None,
    verbose: bool = False
) -> Tuple[List[BenchmarkRecord], List[GroupSummary]]:
    """
    Solve every manifest instance, at most `jobs` at a time in worker
    processes, and compare against references.

    Per-instance failures become records with a non-ok status. Records come
    back in manifest order.

    Args:
        manifest: Manifest file
        refs: Reference CSV (overrides the manifest's `references`)
        jobs: Concurrent instances
        out_dir: Where bench_report.csv and bench_groups.csv go (None: not written)
        db_path: SQLite file for the records (None: not stored)
        solver_defaults: Solver values for scenarios that omit them
        verbose: Print one line per finished instance
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1 (got {jobs})")
    instances, manifest_refs = load_manifest(manifest)
    refs = refs if refs is not None else manifest_refs
    references = load_references(refs) if refs is not None else {}

    database = None
    run = None
    if db_path is not None:
        database = Database(db_path)
        await database.connect()
        run = await database.start_run(str(manifest), jobs)

    loop = asyncio.get_running_loop()
    semaphore = asyncio.Semaphore(jobs)
    records: List[Optional[BenchmarkRecord]] = [None] * len(instances)

    async def run_one(position: int, instance: BenchmarkInstance, pool: ProcessPoolExecutor):
        async with semaphore:
            try:
                outcome = await loop.run_in_executor(pool, solve_instance, str(instance.scenario), solver_defaults)
            except Exception as e:
                outcome = {'status': STATUS_ERROR, 'error': f"{type(e).__name__}: {e}"}
        record = make_record(instance, outcome, references)
        records[position] = record
        if database is not None:
            await database.log_record(run.id, record)
        if verbose:
            mark = '✓' if record.status == STATUS_OK else '✗'
            detail = f"exposure {record.exposure:.6g}" if record.exposure is not None else record.error
            if record.improvement is not None:
                detail += f", improvement {record.improvement:.2f}%"
            print(f"{mark} {record.label}: {detail}")

    try:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            await asyncio.gather(*(run_one(i, instance, pool) for i, instance in enumerate(instances)))
    finally:
        if database is not None:
            await database.close()

    summaries = summarize(records)
    if out_dir is not None:
        write_reports(out_dir, records, summaries)
    return records, summaries
