"""
Exposure-weighted unstructured grid: sampling, Delaunay triangulation,
point location and linear (barycentric) interpolation.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from sensing import IntensityField
from .domain import (
    DegenerateInput,
    Domain,
    GeometryError,
    GoalInObstacle,
    SourceInObstacle,
)

OUTSIDE = -1

# rejection sampling
INTENSITY_PROBES = 4096
INTENSITY_QUANTILE = 0.99
SAMPLE_BATCH = 4096
MAX_DRAW_FACTOR = 2000

# max-gap probing lattice
GAP_PROBE_RESOLUTION = 512

# relative tolerances (times domain diameter)
DUPLICATE_TOLERANCE = 1e-9
LOCATE_TOLERANCE = 1e-12


class VertexClass(IntEnum):
    """Role of a grid vertex."""
    FREE = 0
    GOAL = 1
    OBSTACLE = 2
    DOMAIN_BOUNDARY = 3

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class GridConfig:
    """
    Grid sampling parameters.

    Args:
        points_per_node: Interior samples per sensor node (>= 10)
        boundary_spacing: Spacing of obstacle/domain-edge samples
                          (None -> 1% of the domain diameter)
        base_rate: Acceptance floor of the rejection sampler, in (0, 1]
        rng_seed: Seed of the sampler
    """
    points_per_node: int = 100
    boundary_spacing: Optional[float] = None
    base_rate: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.points_per_node < 10:
            raise ValueError(f"points_per_node must be >= 10 (got {self.points_per_node})")
        if self.boundary_spacing is not None and not self.boundary_spacing > 0:
            raise ValueError(f"boundary_spacing must be > 0 (got {self.boundary_spacing})")
        if not 0 < self.base_rate <= 1:
            raise ValueError(f"base_rate must be in (0, 1] (got {self.base_rate})")

    def spacing_for(self, domain: Domain) -> float:
        if self.boundary_spacing is not None:
            return self.boundary_spacing
        return 0.01 * domain.diameter

    def to_dict(self) -> dict:
        return {
            'points_per_node': self.points_per_node,
            'boundary_spacing': self.boundary_spacing,
            'base_rate': self.base_rate,
            'seed': self.rng_seed,
        }


def _polyline_samples(vertices: np.ndarray, spacing: float, closed: bool = True) -> np.ndarray:
    """Points along a polyline at (at most) the given spacing, vertices included."""
    ends = np.roll(vertices, -1, axis=0) if closed else vertices[1:]
    starts = vertices if closed else vertices[:-1]
    samples = []
    for a, b in zip(starts, ends):
        count = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.arange(count) / count
        samples.append(a + t[:, None] * (b - a))
    return np.vstack(samples)


def _check_endpoint(domain: Domain, p: np.ndarray, error, what: str):
    if not domain.contains(p)[0]:
        raise error(f"{what} {tuple(p)} lies outside the domain")
    if domain.points_in_obstacles(p)[0]:
        raise error(f"{what} {tuple(p)} lies inside an obstacle")


def sample_grid(
    domain: Domain,
    field: IntensityField,
    goal,
    sources: Sequence,
    config: GridConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample grid vertices, concentrated where the field intensity is high.

    Args:
        domain: Cluttered rectangular domain
        field: Sensor field driving the sampling density
        goal: Goal position (becomes the unique Goal vertex)
        sources: Source positions (inserted verbatim as Free vertices)
        config: Sampling parameters

    Returns:
        (vertices (V, 2), classes (V,) of VertexClass values)

    Raises:
        GoalInObstacle: Goal outside the domain or inside an obstacle
        SourceInObstacle: Likewise for a source
    """
    goal = np.asarray(goal, dtype=float)
    _check_endpoint(domain, goal, GoalInObstacle, "goal")
    sources = [np.asarray(s, dtype=float) for s in sources]
    for source in sources:
        _check_endpoint(domain, source, SourceInObstacle, "source")

    rng = np.random.default_rng(config.rng_seed)
    spacing = config.spacing_for(domain)
    lower, upper = np.asarray(domain.lower), np.asarray(domain.upper)

    parts: List[np.ndarray] = [goal[None, :]]
    classes: List[np.ndarray] = [np.array([VertexClass.GOAL])]
    if sources:
        parts.append(np.vstack(sources))
        classes.append(np.full(len(sources), VertexClass.FREE))
    for polygon in domain.obstacles:
        ring = _polyline_samples(np.asarray(polygon, dtype=float), spacing)
        parts.append(ring)
        classes.append(np.full(len(ring), VertexClass.OBSTACLE))
    edge = _polyline_samples(domain.corners(), spacing)
    edge_class = np.full(len(edge), VertexClass.DOMAIN_BOUNDARY)
    # edge samples on an obstacle side that runs along the domain edge
    on_obstacle = domain.boundary_distance(edge) <= DUPLICATE_TOLERANCE * domain.diameter
    edge_class[on_obstacle] = VertexClass.OBSTACLE
    parts.append(edge)
    classes.append(edge_class)

    # robust intensity scale: a high quantile of a uniform probe
    probes = rng.uniform(lower, upper, size=(INTENSITY_PROBES, 2))
    probes = probes[~domain.points_in_obstacles(probes)]
    if len(probes):
        scale = float(np.quantile(field.scaled_intensity(probes), INTENSITY_QUANTILE))
    else:
        scale = field.eps_floor
    scale = max(scale, field.eps_floor)

    target = config.points_per_node * field.n
    interior: List[np.ndarray] = []
    accepted = 0
    drawn = 0
    while accepted < target:
        if drawn > MAX_DRAW_FACTOR * target:
            raise GeometryError("grid sampler could not place interior points; is the domain free space empty?")
        batch = rng.uniform(lower, upper, size=(SAMPLE_BATCH, 2))
        drawn += SAMPLE_BATCH
        batch = batch[~domain.points_in_obstacles(batch)]
        ratio = np.minimum(field.scaled_intensity(batch) / scale, 1.0)
        probability = config.base_rate + (1.0 - config.base_rate) * ratio
        keep = batch[rng.random(len(batch)) < probability][:target - accepted]
        interior.append(keep)
        accepted += len(keep)
    parts.extend(interior)
    classes.append(np.full(accepted, VertexClass.FREE))

    vertices = np.vstack(parts)
    vertex_class = np.concatenate(classes).astype(np.int8)
    keep = _first_occurrences(vertices, DUPLICATE_TOLERANCE * domain.diameter)
    return vertices[keep], vertex_class[keep]


def _first_occurrences(points: np.ndarray, tol: float) -> np.ndarray:
    """Mask keeping the first of any group of points closer than tol."""
    keep = np.ones(len(points), dtype=bool)
    pairs = cKDTree(points).query_pairs(r=tol, output_type='ndarray')
    if len(pairs):
        # drop the later index of every close pair
        keep[np.max(pairs, axis=1)] = False
    return keep


class SpatialGrid:
    """
    Delaunay-triangulated vertex set with point location and interpolation.

    Immutable after construction; all queries are pure.
    """

    def __init__(self, vertices: np.ndarray, vertex_class: np.ndarray, domain: Optional[Domain] = None):
        """
        Triangulate the vertices.

        Args:
            vertices: (V, 2) vertex coordinates
            vertex_class: (V,) VertexClass values
            domain: Domain used for the max-gap estimate (bounding box if None)

        Raises:
            DegenerateInput: Fewer than 3 vertices, collinear or duplicated vertices
        """
        vertices = np.ascontiguousarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
            raise DegenerateInput("need at least 3 two-dimensional vertices")
        centered = vertices - vertices.mean(axis=0)
        scale = max(float(np.abs(centered).max()), 1e-300)
        if np.linalg.matrix_rank(centered / scale, tol=1e-12) < 2:
            raise DegenerateInput("all vertices are collinear")
        try:
            self._delaunay = Delaunay(vertices)
        except QhullError as e:
            raise DegenerateInput(f"triangulation failed: {e}")
        if len(self._delaunay.coplanar):
            raise DegenerateInput(f"{len(self._delaunay.coplanar)} duplicated vertices")

        self.vertices = vertices
        self.triangles = self._delaunay.simplices.astype(np.int64)
        self.vertex_class = np.asarray(vertex_class, dtype=np.int8)
        if len(self.vertex_class) != len(vertices):
            raise ValueError("vertex_class length does not match vertex count")
        goals = np.flatnonzero(self.vertex_class == VertexClass.GOAL)
        self.goal_index = int(goals[0]) if len(goals) == 1 else None
        if len(goals) > 1:
            raise ValueError("grid has more than one goal vertex")
        self.domain = domain
        lower = vertices.min(axis=0)
        upper = vertices.max(axis=0)
        self.diameter = float(np.linalg.norm(upper - lower))
        self._tol = LOCATE_TOLERANCE * self.diameter
        self._incident: Optional[List[np.ndarray]] = None
        self.max_gap = self._estimate_max_gap()

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def class_counts(self) -> Dict[str, int]:
        return {cls.label: int(np.sum(self.vertex_class == cls)) for cls in VertexClass}

    def _estimate_max_gap(self) -> float:
        """Largest distance from a free domain point to its nearest vertex."""
        if self.domain is not None:
            lower, upper = np.asarray(self.domain.lower), np.asarray(self.domain.upper)
        else:
            lower, upper = self.vertices.min(axis=0), self.vertices.max(axis=0)
        xs = np.linspace(lower[0], upper[0], GAP_PROBE_RESOLUTION)
        ys = np.linspace(lower[1], upper[1], GAP_PROBE_RESOLUTION)
        probes = np.column_stack([g.ravel() for g in np.meshgrid(xs, ys)])
        if self.domain is not None and self.domain.obstacles:
            probes = probes[~self.domain.points_in_obstacles(probes)]
        distances, _ = cKDTree(self.vertices).query(probes)
        return float(distances.max())

    def _incident_triangles(self) -> List[np.ndarray]:
        if self._incident is None:
            order = np.argsort(self.triangles.ravel(), kind='stable')
            owners = order // 3
            counts = np.bincount(self.triangles.ravel(), minlength=len(self.vertices))
            self._incident = np.split(owners, np.cumsum(counts)[:-1])
        return self._incident

    def barycentric(self, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Locate points and compute their barycentric coordinates.

        Returns:
            (triangle index (M,) with OUTSIDE for misses,
             vertex indices (M, 3), weights (M, 3)); rows of misses are zero
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        simplex = self._delaunay.find_simplex(points, tol=self._tol).astype(np.int64)
        found = simplex >= 0
        verts = np.zeros((len(points), 3), dtype=np.int64)
        weights = np.zeros((len(points), 3))
        if np.any(found):
            s = simplex[found]
            transform = self._delaunay.transform[s]
            b = np.einsum('ijk,ik->ij', transform[:, :2, :], points[found] - transform[:, 2, :])
            w = np.column_stack([b, 1.0 - b.sum(axis=1)])
            np.clip(w, 0.0, None, out=w)
            w /= w.sum(axis=1, keepdims=True)
            verts[found] = self.triangles[s]
            weights[found] = w
        return simplex, verts, weights

    def locate(self, p) -> int:
        """
        Triangle containing p (boundary-inclusive, lowest index on ties) or OUTSIDE.
        """
        p = np.asarray(p, dtype=float)
        simplex = int(self._delaunay.find_simplex(p[None, :], tol=self._tol)[0])
        if simplex < 0:
            return OUTSIDE
        if self._coordinates(simplex, p).min() > self._tol:
            return simplex
        incident = self._incident_triangles()
        candidates = np.unique(np.concatenate([incident[v] for v in self.triangles[simplex]]))
        for candidate in candidates:
            if self._coordinates(int(candidate), p).min() >= -self._tol:
                return int(candidate)
        return simplex

    def _coordinates(self, simplex: int, p: np.ndarray) -> np.ndarray:
        transform = self._delaunay.transform[simplex]
        b = transform[:2] @ (p - transform[2])
        return np.array([b[0], b[1], 1.0 - b[0] - b[1]])

    def interpolate_many(self, values: np.ndarray, points) -> np.ndarray:
        """Linear interpolation of per-vertex values; 1 outside the hull."""
        values = np.asarray(values, dtype=float)
        simplex, verts, weights = self.barycentric(points)
        corner_values = values[verts]
        result = np.einsum('ij,ij->i', weights, corner_values)
        np.clip(result, corner_values.min(axis=1), corner_values.max(axis=1), out=result)
        result[simplex < 0] = 1.0
        return result

    def interpolate(self, values: np.ndarray, p) -> float:
        if len(values) != len(self.vertices):
            raise ValueError("values length does not match vertex count")
        return float(self.interpolate_many(values, np.asarray(p, dtype=float)[None, :])[0])

    def delaunay_violations(self, tolerance: Optional[float] = None) -> int:
        """
        Brute-force count of (vertex, triangle) pairs with the vertex strictly
        inside the triangle's circumcircle.
        """
        tol = (1e-9 * self.diameter) if tolerance is None else tolerance
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        d = 2.0 * (a[:, 0] * (b[:, 1] - c[:, 1]) + b[:, 0] * (c[:, 1] - a[:, 1]) + c[:, 0] * (a[:, 1] - b[:, 1]))
        a2, b2, c2 = (a ** 2).sum(1), (b ** 2).sum(1), (c ** 2).sum(1)
        ux = (a2 * (b[:, 1] - c[:, 1]) + b2 * (c[:, 1] - a[:, 1]) + c2 * (a[:, 1] - b[:, 1])) / d
        uy = (a2 * (c[:, 0] - b[:, 0]) + b2 * (a[:, 0] - c[:, 0]) + c2 * (b[:, 0] - a[:, 0])) / d
        centers = np.column_stack([ux, uy])
        radii = np.linalg.norm(a - centers, axis=1)
        violations = 0
        for center, radius in zip(centers, radii):
            distances = np.linalg.norm(self.vertices - center, axis=1)
            violations += int(np.sum(distances < radius - tol))
        return violations


def triangulate(vertices, vertex_class=None, domain: Optional[Domain] = None) -> SpatialGrid:
    """
    Delaunay-triangulate sampled vertices into a SpatialGrid.

    Args:
        vertices: (V, 2) coordinates
        vertex_class: Per-vertex VertexClass (all Free if None)
        domain: Domain for the max-gap estimate

    Raises:
        DegenerateInput: Collinear, duplicated or too few vertices
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertex_class is None:
        vertex_class = np.full(len(vertices), VertexClass.FREE, dtype=np.int8)
    return SpatialGrid(vertices, vertex_class, domain)


def build_grid(domain: Domain, field: IntensityField, goal, sources, config: GridConfig) -> SpatialGrid:
    """sample_grid followed by triangulate."""
    vertices, vertex_class = sample_grid(domain, field, goal, sources, config)
    return triangulate(vertices, vertex_class, domain)


def locate(grid: SpatialGrid, p) -> int:
    return grid.locate(p)


def interpolate(grid: SpatialGrid, values, p) -> float:
    return grid.interpolate(values, p)
