"""Plot-ready CSV and YAML output. Every file is written atomically."""

import csv
import io
from pathlib import Path as FilePath
from typing import Iterable, List, Sequence

import numpy as np
import yaml

from geometry import SpatialGrid, VertexClass
from solver import ValueField
from trajectory import Path
from .scenario import ParseError, write_atomic

FIELD_HEADER = ('x', 'y', 'vbar', 'V_scaled')
GRID_HEADER = ('x', 'y', 'class')
TRIANGLE_HEADER = ('a', 'b', 'c')
PATH_HEADER = ('t', 'x', 'y')


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        # repr round-trips every double exactly
        return repr(float(value))
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def write_field_csv(path, value: ValueField):
    """x,y,vbar,V_scaled per grid vertex."""
    recovered = value.recovered()
    rows = zip(value.grid.vertices[:, 0], value.grid.vertices[:, 1], value.vbar, recovered)
    write_atomic(path, csv_text(FIELD_HEADER, rows))


def write_grid_csv(path, grid: SpatialGrid):
    """x,y,class per grid vertex (class as its lowercase name)."""
    rows = ((x, y, VertexClass(int(c)).label)
            for (x, y), c in zip(grid.vertices, grid.vertex_class))
    write_atomic(path, csv_text(GRID_HEADER, rows))


def write_triangles_csv(path, grid: SpatialGrid):
    """Vertex index triples of the triangulation."""
    rows = ((int(a), int(b), int(c)) for a, b, c in grid.triangles)
    write_atomic(path, csv_text(TRIANGLE_HEADER, rows))


def write_path_csv(path, trajectory: Path):
    """t,x,y per waypoint."""
    rows = zip(trajectory.times, trajectory.waypoints[:, 0], trajectory.waypoints[:, 1])
    write_atomic(path, csv_text(PATH_HEADER, rows))


def write_yaml(path, document: dict):
    write_atomic(path, yaml.safe_dump(document, sort_keys=False))


def read_path_csv(path, dt: float = 1.0) -> Path:
    """
    Load a t,x,y (or x,y) CSV as a Path.

    The nominal step is taken from the t column when it is present.

    Raises:
        ParseError: Malformed rows or fewer than two waypoints
    """
    path = FilePath(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read path {path}: {e}")
    reader = csv.reader(io.StringIO(text))
    rows: List[List[str]] = [row for row in reader if row and any(c.strip() for c in row)]
    if not rows:
        raise ParseError(f"{path.name} is empty")
    header = [c.strip() for c in rows[0]]
    start = 1 if not _is_numeric(header) else 0
    columns = header if start == 1 else (list(PATH_HEADER) if len(header) == 3 else ['x', 'y'])
    if 'x' not in columns or 'y' not in columns:
        raise ParseError(f"{path.name} needs x and y columns", line=1)
    ix, iy = columns.index('x'), columns.index('y')
    it = columns.index('t') if 't' in columns else None

    points, times = [], []
    for number, row in enumerate(rows[start:], start=start + 1):
        if len(row) != len(columns):
            raise ParseError(f"expected {len(columns)} columns, found {len(row)}", line=number)
        try:
            points.append((float(row[ix]), float(row[iy])))
            if it is not None:
                times.append(float(row[it]))
        except ValueError:
            raise ParseError(f"non-numeric row {row!r}", line=number)
    if len(points) < 2:
        raise ParseError(f"{path.name} needs at least 2 waypoints")
    if len(times) >= 2 and times[1] > times[0]:
        dt = times[1] - times[0]
    return Path(waypoints=np.array(points), dt=dt)


def _is_numeric(row: Sequence[str]) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return False
    return True
