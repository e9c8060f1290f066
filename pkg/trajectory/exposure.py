"""Exposure of polylines: composite trapezoid rule on the raw intensity."""

import numpy as np

from sensing import IntensityField
from .path import Path


def segment_exposures(field: IntensityField, starts, ends, h_eval: float) -> np.ndarray:
    """
    Raw exposure of each straight segment start -> end.

    Each segment is cut into ceil(length / h_eval) equal pieces (at least one)
    and integrated with the trapezoid rule.

    Returns:
        (M,) non-negative exposures
    """
    if not h_eval > 0:
        raise ValueError(f"h_eval must be > 0 (got {h_eval})")
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    lengths = np.linalg.norm(ends - starts, axis=1)
    pieces = np.maximum(1, np.ceil(lengths / h_eval).astype(np.int64))

    # pieces[i] + 1 nodes per segment, laid out back to back
    nodes = pieces + 1
    offsets = np.concatenate([[0], np.cumsum(nodes)[:-1]])
    owner = np.repeat(np.arange(len(starts)), nodes)
    t = (np.arange(int(nodes.sum())) - offsets[owner]) / pieces[owner]
    points = starts[owner] + t[:, None] * (ends[owner] - starts[owner])
    values = np.asarray(field.intensity(points)).reshape(-1)

    # trapezoid weights: 1/2 at both ends of a segment, 1 inside
    weights = np.ones(len(values))
    weights[offsets] = 0.5
    weights[offsets + pieces] = 0.5
    sums = np.add.reduceat(values * weights, offsets)
    return np.maximum(sums * lengths / pieces, 0.0)


def evaluate_exposure(field: IntensityField, path: Path, h_eval: float) -> float:
    """Raw exposure of a path (sum of its segment exposures)."""
    waypoints = path.waypoints
    return float(segment_exposures(field, waypoints[:-1], waypoints[1:], h_eval).sum())
