"""Sensor sensing functions and field intensity."""

from .models import (
    SensingModel,
    BooleanDisk,
    AttenuatedDisk,
    ProbabilityExp,
    NoisyProbability,
    SensorNode,
    MODEL_KINDS,
    model_from_params,
    q_function,
    sense,
)
from .intensity import (
    IntensityField,
    ALL_SENSOR,
    DEFAULT_EPS_FLOOR,
    DEFAULT_OMEGA,
    MAX_SENSOR,
    build_field,
    intensity,
    scaled_intensity,
)

__all__ = [
    'SensingModel', 'BooleanDisk', 'AttenuatedDisk', 'ProbabilityExp', 'NoisyProbability',
    'SensorNode', 'MODEL_KINDS', 'model_from_params', 'q_function', 'sense',
    'IntensityField', 'ALL_SENSOR', 'DEFAULT_EPS_FLOOR', 'DEFAULT_OMEGA', 'MAX_SENSOR', 'build_field', 'intensity', 'scaled_intensity',
]
