"""Path extraction, exposure evaluation and local path optimization."""

from .path import ExposureSaturated, Path, PathResult, Unreachable, concat
from .exposure import evaluate_exposure, segment_exposures
from .planner import extract_path, local_optimize, plan_path, default_h_eval

__all__ = [
    'ExposureSaturated', 'Path', 'PathResult', 'Unreachable', 'concat',
    'evaluate_exposure', 'segment_exposures',
    'extract_path', 'local_optimize', 'plan_path', 'default_h_eval',
]
