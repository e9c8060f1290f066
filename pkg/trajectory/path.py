"""Path and result types."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class Unreachable(Exception):
    """No admissible path from a source to the goal."""

    def __init__(self, message: str, source=None):
        super().__init__(message)
        self.source = None if source is None else tuple(float(c) for c in source)


class ExposureSaturated(Exception):
    """
    The goal is reachable but exp(-V) underflows along the way, so the
    transformed values carry no direction. A larger omega fixes it.
    """

    def __init__(self, message: str, omega: float, source=None):
        super().__init__(message)
        self.omega = omega
        self.source = None if source is None else tuple(float(c) for c in source)


@dataclass(frozen=True)
class Path:
    """
    Time-stamped waypoint sequence; waypoint k is reached at t = k * dt.

    Args:
        waypoints: (N, 2) coordinates, N >= 2, first = source, last = goal
        dt: Nominal step between waypoints
    """
    waypoints: np.ndarray
    dt: float

    def __post_init__(self):
        waypoints = np.array(self.waypoints, dtype=float)
        if waypoints.ndim != 2 or waypoints.shape[1] != 2 or len(waypoints) < 2:
            raise ValueError("a path needs at least 2 two-dimensional waypoints")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0 (got {self.dt})")
        waypoints.setflags(write=False)
        object.__setattr__(self, 'waypoints', waypoints)

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def source(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.waypoints))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())

    def with_waypoints(self, waypoints) -> 'Path':
        return Path(waypoints=waypoints, dt=self.dt)


def concat(first: Path, second: Path) -> Path:
    """Join two paths where `first` ends at the start of `second`."""
    if not np.allclose(first.goal, second.source, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(first.goal).max()))):
        raise ValueError("paths do not meet")
    return Path(waypoints=np.vstack([first.waypoints, second.waypoints[1:]]), dt=first.dt)


@dataclass
class PathResult:
    """
    Planned path for one source with its statistics.

    exposure is the raw exposure of the optimized path; exposure_unoptimized
    is the raw exposure of the path before local optimization. value_at_source
    is the recovered value function at the source, in scaled units.
    """
    path: Path
    exposure: float
    value_at_source: float
    outer_iters: int
    wall_time: float
    exposure_unoptimized: Optional[float] = None
    source_index: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.exposure < 0:
            raise ValueError(f"exposure must be >= 0 (got {self.exposure})")

    def to_dict(self) -> dict:
        return {
            'source_index': self.source_index,
            'source': [float(c) for c in self.path.source],
            'exposure': float(self.exposure),
            'exposure_unoptimized': None if self.exposure_unoptimized is None else float(self.exposure_unoptimized),
            'value_at_source': float(self.value_at_source),
            'outer_iters': int(self.outer_iters),
            'wall_time': float(self.wall_time),
            'waypoints': len(self.path),
            'length': self.path.length,
        }
