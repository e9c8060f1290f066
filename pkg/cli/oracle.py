"""
Independent optimality check: shortest paths on a regular lattice,
weighted by the raw exposure of each lattice edge.

With reach r every lattice point links to the points (i + dx, j + dy) for
all primitive offsets with max(|dx|, |dy|) <= r: 8 neighbours for r = 1,
16 for r = 2, 48 for r = 4. The worst-case direction bias falls from
about 2.7% at r = 2 to about 0.75% at r = 4.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from trajectory import Path, Unreachable, segment_exposures
from .scenario import Scenario

DEFAULT_REACH = 2
EDGE_CHUNK = 200000


@lru_cache(maxsize=None)
def neighbor_offsets(reach: int = DEFAULT_REACH) -> Tuple[Tuple[int, int], ...]:
    """(dx, dy) for one direction of every undirected lattice edge within reach."""
    if reach < 1:
        raise ValueError(f"reach must be >= 1 (got {reach})")
    offsets = []
    for dx in range(0, reach + 1):
        for dy in range(-reach, reach + 1):
            if (dx == 0 and dy <= 0) or math.gcd(dx, abs(dy)) != 1:
                continue
            offsets.append((dx, dy))
    return tuple(offsets)


@dataclass
class OracleResult:
    exposure: float
    path: Path
    nodes: int
    edges: int


def _axis(lo: float, hi: float, h: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / h + 1e-9)) + 1
    return lo + h * np.arange(count)


def lattice_shortest_path(scenario: Scenario, h: float, source_index: int = 0,
                          reach: int = DEFAULT_REACH) -> OracleResult:
    """
    Lattice shortest path from a source to the goal.

    Lattice points inside obstacles are dropped; an edge exists when its
    straight segment is clear. Source and goal snap to their nearest free
    lattice point and the snapping hops are charged like edges.

    Raises:
        ValueError: h <= 0 or reach < 1
        Unreachable: Snap hop blocked or no lattice path
    """
    if not h > 0:
        raise ValueError(f"lattice spacing must be > 0 (got {h})")
    domain = scenario.domain
    field = scenario.intensity_field
    h_eval = min(scenario.eval_resolution, h)
    offsets = neighbor_offsets(reach)

    xs = _axis(domain.lower[0], domain.upper[0], h)
    ys = _axis(domain.lower[1], domain.upper[1], h)
    nx, ny = len(xs), len(ys)
    gx, gy = np.meshgrid(xs, ys, indexing='ij')
    points = np.column_stack([gx.ravel(), gy.ravel()])
    free = ~domain.points_in_obstacles(points)
    index = np.arange(nx * ny).reshape(nx, ny)

    rows, cols, weights = [], [], []
    for dx, dy in offsets:
        i0, i1 = max(0, -dx), nx - max(0, dx)
        j0, j1 = max(0, -dy), ny - max(0, dy)
        if i1 <= i0 or j1 <= j0:
            continue
        a = index[i0:i1, j0:j1].ravel()
        b = index[i0 + dx:i1 + dx, j0 + dy:j1 + dy].ravel()
        keep = free[a] & free[b]
        a, b = a[keep], b[keep]
        for lo in range(0, len(a), EDGE_CHUNK):
            ca, cb = a[lo:lo + EDGE_CHUNK], b[lo:lo + EDGE_CHUNK]
            clear = domain.segments_clear(points[ca], points[cb])
            ca, cb = ca[clear], cb[clear]
            cost = segment_exposures(field, points[ca], points[cb], h_eval)
            rows.append(ca)
            cols.append(cb)
            weights.append(cost)

    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    weights = np.concatenate(weights) if weights else np.zeros(0)
    # csgraph drops zero-weight entries as missing edges
    weights = np.maximum(weights, 1e-12 * h)
    graph = sparse.csr_matrix((weights, (rows, cols)), shape=(nx * ny, nx * ny))

    source = np.asarray(scenario.sources[source_index], dtype=float)
    goal = np.asarray(scenario.goal, dtype=float)
    s = _snap(points, free, source)
    g = _snap(points, free, goal)
    for p, q, what in ((source, points[s], 'source'), (points[g], goal, 'goal')):
        if not domain.segments_clear(p, q)[0]:
            raise Unreachable(f"{what} cannot reach its lattice point at h={h}", source=source)

    distances, predecessors = dijkstra(graph, directed=False, indices=s, return_predecessors=True)
    if not np.isfinite(distances[g]):
        raise Unreachable(f"no lattice path from {tuple(source)} to the goal at h={h}", source=source)

    chain = [g]
    while chain[-1] != s:
        chain.append(int(predecessors[chain[-1]]))
    waypoints = [source] + [points[k] for k in reversed(chain)] + [goal]
    hops = segment_exposures(field, np.array([source, points[g]]), np.array([points[s], goal]), h_eval)
    return OracleResult(
        exposure=float(distances[g] + hops.sum()),
        path=Path(waypoints=np.array(waypoints), dt=h),
        nodes=int(free.sum()),
        edges=len(weights),
    )


def _snap(points: np.ndarray, free: np.ndarray, p: np.ndarray) -> int:
    distances = np.linalg.norm(points - p, axis=1)
    distances[~free] = np.inf
    return int(np.argmin(distances))


def dijkstra_oracle(scenario: Scenario, h: float, source_index: int = 0, reach: int = DEFAULT_REACH) -> float:
    """Raw exposure of the lattice shortest path (see lattice_shortest_path)."""
    return lattice_shortest_path(scenario, h, source_index, reach).exposure


def richardson_estimate(scenario: Scenario, h: float, source_index: int = 0,
                        order: float = 1.0, fine: Optional[float] = None,
                        reach: int = DEFAULT_REACH) -> float:
    """
    Extrapolated lattice cost from spacings h and h/2, assuming the error
    shrinks like h**order. The angular metrication error does not vanish
    with h, so this removes only the resolution part.
    """
    fine = dijkstra_oracle(scenario, h / 2.0, source_index, reach) if fine is None else fine
    coarse = dijkstra_oracle(scenario, h, source_index, reach)
    factor = 2.0 ** order
    return (factor * fine - coarse) / (factor - 1.0)
