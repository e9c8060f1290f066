"""Domain geometry and the unstructured grid."""

from .domain import (
    Domain,
    GeometryError,
    GoalInObstacle,
    SourceInObstacle,
    DegenerateInput,
    build_domain,
    point_in_obstacle,
    segment_clear,
)
from .grid import (
    GridConfig,
    SpatialGrid,
    VertexClass,
    OUTSIDE,
    sample_grid,
    triangulate,
    build_grid,
    locate,
    interpolate,
)

__all__ = [
    'Domain', 'GeometryError', 'GoalInObstacle', 'SourceInObstacle', 'DegenerateInput',
    'build_domain', 'point_in_obstacle', 'segment_clear',
    'GridConfig', 'SpatialGrid', 'VertexClass', 'OUTSIDE',
    'sample_grid', 'triangulate', 'build_grid', 'locate', 'interpolate',
]
