"""Data models for benchmark runs and their per-instance records."""

from dataclasses import dataclass
from datetime import datetime
from typing import Optional

STATUS_OK = 'ok'
STATUS_UNREACHABLE = 'unreachable'
STATUS_NONCONVERGENCE = 'nonconvergence'
STATUS_INVALID = 'invalid'
STATUS_ERROR = 'error'
STATUS_SATURATED = 'saturated'


@dataclass
class BenchmarkRun:
    """One invocation of the benchmark harness."""
    id: Optional[int] = None
    started_at: Optional[datetime] = None
    manifest: Optional[str] = None
    jobs: int = 1


@dataclass
class BenchmarkRecord:
    """Outcome of one benchmark instance (distribution, n, ordinal)."""
    distribution: str
    n_nodes: int
    ordinal: int
    exposure: Optional[float] = None
    wall_time: Optional[float] = None
    reference_exposure: Optional[float] = None
    improvement: Optional[float] = None
    status: str = STATUS_OK
    error: Optional[str] = None
    scenario: Optional[str] = None
    id: Optional[int] = None
    run_id: Optional[int] = None
    recorded_at: Optional[datetime] = None

    def __post_init__(self):
        if self.exposure is not None and self.exposure < 0:
            raise ValueError(f"exposure must be >= 0 (got {self.exposure})")

    @property
    def label(self) -> str:
        return f"{self.distribution}/{self.n_nodes}/ord-{self.ordinal}"

    @property
    def group(self) -> str:
        return f"{self.distribution}/{self.n_nodes}"

    def to_dict(self):
        """Convert to dictionary."""
        return {
            'label': self.label,
            'distribution': self.distribution,
            'n_nodes': self.n_nodes,
            'ordinal': self.ordinal,
            'status': self.status,
            'exposure': self.exposure,
            'wall_time': self.wall_time,
            'reference_exposure': self.reference_exposure,
            'improvement': self.improvement,
            'error': self.error,
            'scenario': self.scenario,
        }
