"""Rectangular domain with polygonal obstacles."""

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from shapely.geometry import LinearRing, Polygon, box
from shapely.geometry.polygon import orient

# segment/obstacle tests are done in chunks of this many segments
SEGMENT_CHUNK = 8192


class GeometryError(Exception):
    """Base exception for geometry errors."""
    pass


class GoalInObstacle(GeometryError):
    """Goal lies inside an obstacle or outside the domain."""
    pass


class SourceInObstacle(GeometryError):
    """A source lies inside an obstacle or outside the domain."""
    pass


class DegenerateInput(GeometryError):
    """Point set cannot be triangulated."""
    pass


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@dataclass(frozen=True)
class Domain:
    """
    Axis-aligned rectangle with simple polygonal obstacles.

    Args:
        lower: (x_min, y_min)
        upper: (x_max, y_max)
        obstacles: Polygons as vertex sequences; stored counterclockwise
    """
    lower: Tuple[float, float]
    upper: Tuple[float, float]
    obstacles: Tuple[Tuple[Tuple[float, float], ...], ...] = ()
    _edge_a: np.ndarray = field(init=False, repr=False, compare=False)
    _edge_b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lower = tuple(float(c) for c in self.lower)
        upper = tuple(float(c) for c in self.upper)
        if len(lower) != 2 or len(upper) != 2:
            raise ValueError("domain corners must be 2-vectors")
        if not (upper[0] > lower[0] and upper[1] > lower[1]):
            raise ValueError(f"domain must have positive width and height (got {lower} .. {upper})")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

        rect = box(lower[0], lower[1], upper[0], upper[1])
        polygons = []
        for index, vertices in enumerate(self.obstacles):
            coords = [tuple(float(c) for c in v) for v in vertices]
            if len(coords) >= 2 and coords[0] == coords[-1]:
                coords = coords[:-1]
            if len(coords) < 3:
                raise ValueError(f"obstacle {index} needs at least 3 vertices")
            if not LinearRing(coords).is_simple:
                raise ValueError(f"obstacle {index} is not a simple polygon")
            polygon = Polygon(coords)
            if polygon.area <= 0:
                raise ValueError(f"obstacle {index} has zero area")
            if not rect.covers(polygon):
                raise ValueError(f"obstacle {index} does not lie within the domain bounds")
            ccw = orient(polygon, sign=1.0)
            polygons.append(tuple(tuple(c) for c in list(ccw.exterior.coords)[:-1]))
        object.__setattr__(self, 'obstacles', tuple(polygons))

        starts, ends = [], []
        for polygon in self.obstacles:
            vertices = np.asarray(polygon, dtype=float)
            starts.append(vertices)
            ends.append(np.roll(vertices, -1, axis=0))
        if starts:
            object.__setattr__(self, '_edge_a', np.vstack(starts))
            object.__setattr__(self, '_edge_b', np.vstack(ends))
        else:
            object.__setattr__(self, '_edge_a', np.zeros((0, 2)))
            object.__setattr__(self, '_edge_b', np.zeros((0, 2)))

    @property
    def width(self) -> float:
        return self.upper[0] - self.lower[0]

    @property
    def height(self) -> float:
        return self.upper[1] - self.lower[1]

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def tolerance(self) -> float:
        """Absolute tolerance for on-boundary decisions."""
        return 1e-12 * self.diameter

    def corners(self) -> np.ndarray:
        (x0, y0), (x1, y1) = self.lower, self.upper
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)

    def contains(self, points) -> np.ndarray:
        """Closed containment in the bounding rectangle (with tolerance)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        tol = self.tolerance
        return ((points[:, 0] >= self.lower[0] - tol) & (points[:, 0] <= self.upper[0] + tol)
                & (points[:, 1] >= self.lower[1] - tol) & (points[:, 1] <= self.upper[1] + tol))

    def points_in_obstacles(self, points) -> np.ndarray:
        """
        Strict interior test against every obstacle (even-odd rule).

        Points on an obstacle boundary count as outside.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        result = np.zeros(len(points), dtype=bool)
        if not self.obstacles:
            return result
        px, py = points[:, 0], points[:, 1]
        tol = self.tolerance
        for polygon in self.obstacles:
            vertices = np.asarray(polygon, dtype=float)
            inside = np.zeros(len(points), dtype=bool)
            on_edge = np.zeros(len(points), dtype=bool)
            for a, b in zip(vertices, np.roll(vertices, -1, axis=0)):
                straddles = (a[1] > py) != (b[1] > py)
                with np.errstate(divide='ignore', invalid='ignore'):
                    x_cross = a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                inside ^= straddles & (px < x_cross)
                on_edge |= _point_segment_distance(points, a, b) <= tol
            result |= inside & ~on_edge
        return result

    def segments_clear(self, starts, ends) -> np.ndarray:
        """
        Admissibility of straight moves start -> end.

        A move is clear when both endpoints are inside the bounds, neither
        endpoint is inside an obstacle and the segment touches no obstacle edge.
        """
        starts = np.atleast_2d(np.asarray(starts, dtype=float))
        ends = np.atleast_2d(np.asarray(ends, dtype=float))
        clear = self.contains(starts) & self.contains(ends)
        if not self.obstacles:
            return clear
        clear &= ~self.points_in_obstacles(starts) & ~self.points_in_obstacles(ends)
        for lo in range(0, len(starts), SEGMENT_CHUNK):
            hi = min(lo + SEGMENT_CHUNK, len(starts))
            hits = self._crosses_edges(starts[lo:hi], ends[lo:hi])
            clear[lo:hi] &= ~hits
        return clear

    def _crosses_edges(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Closed segment intersection of each a->b against all obstacle edges."""
        c, d = self._edge_a[None, :, :], self._edge_b[None, :, :]
        a, b = a[:, None, :], b[:, None, :]
        abx, aby = b[..., 0] - a[..., 0], b[..., 1] - a[..., 1]
        cdx, cdy = d[..., 0] - c[..., 0], d[..., 1] - c[..., 1]
        d1 = _cross(abx, aby, c[..., 0] - a[..., 0], c[..., 1] - a[..., 1])
        d2 = _cross(abx, aby, d[..., 0] - a[..., 0], d[..., 1] - a[..., 1])
        d3 = _cross(cdx, cdy, a[..., 0] - c[..., 0], a[..., 1] - c[..., 1])
        d4 = _cross(cdx, cdy, b[..., 0] - c[..., 0], b[..., 1] - c[..., 1])
        general = (d1 * d2 <= 0) & (d3 * d4 <= 0)
        collinear = (d1 == 0) & (d2 == 0)
        overlap = ((np.minimum(a[..., 0], b[..., 0]) <= np.maximum(c[..., 0], d[..., 0]))
                   & (np.minimum(c[..., 0], d[..., 0]) <= np.maximum(a[..., 0], b[..., 0]))
                   & (np.minimum(a[..., 1], b[..., 1]) <= np.maximum(c[..., 1], d[..., 1]))
                   & (np.minimum(c[..., 1], d[..., 1]) <= np.maximum(a[..., 1], b[..., 1])))
        return np.any(general & (~collinear | overlap), axis=1)

    def boundary_distance(self, points) -> np.ndarray:
        """Distance from each point to the nearest obstacle edge (inf without obstacles)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(points), np.inf)
        for a, b in zip(self._edge_a, self._edge_b):
            np.minimum(best, _point_segment_distance(points, a, b), out=best)
        return best

    def to_dict(self) -> dict:
        return {
            'min': list(self.lower),
            'max': list(self.upper),
        }


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    length_sq = float(ab @ ab)
    if length_sq == 0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / length_sq, 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)


def build_domain(lower: Sequence[float], upper: Sequence[float], obstacles=()) -> Domain:
    """Construct a Domain from plain coordinate lists."""
    return Domain(
        lower=tuple(lower),
        upper=tuple(upper),
        obstacles=tuple(tuple(tuple(v) for v in polygon) for polygon in obstacles)
    )


def point_in_obstacle(domain: Domain, p) -> bool:
    """True iff p is strictly inside some obstacle."""
    return bool(domain.points_in_obstacles(p)[0])


def segment_clear(domain: Domain, a, b) -> bool:
    """True iff the straight move a -> b is admissible."""
    return bool(domain.segments_clear(a, b)[0])
