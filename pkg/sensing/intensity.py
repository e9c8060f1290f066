"""Composite field intensity over a node set."""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .models import SensorNode

ALL_SENSOR = "all"
MAX_SENSOR = "max"
INTENSITY_MODES = (ALL_SENSOR, MAX_SENSOR)

DEFAULT_OMEGA = 100.0
DEFAULT_EPS_FLOOR = 1.0e-9


@dataclass(frozen=True)
class IntensityField:
    """
    Sensor field: nodes, combination mode, rescaling divisor and floor.

    Args:
        nodes: Sensor nodes (at least one)
        mode: 'all' (sum of node energies) or 'max' (largest node energy)
        omega: Rescaling divisor applied inside the solver (>= 1)
        eps_floor: Minimum scaled intensity (> 0)
    """
    nodes: Tuple[SensorNode, ...]
    mode: str = MAX_SENSOR
    omega: float = DEFAULT_OMEGA
    eps_floor: float = DEFAULT_EPS_FLOOR

    def __post_init__(self):
        object.__setattr__(self, 'nodes', tuple(self.nodes))
        if len(self.nodes) < 1:
            raise ValueError("intensity field needs at least one node")
        if self.mode not in INTENSITY_MODES:
            raise ValueError(f"intensity mode must be one of {INTENSITY_MODES} (got '{self.mode}')")
        if not self.omega >= 1:
            raise ValueError(f"omega must be >= 1 (got {self.omega})")
        if not self.eps_floor > 0:
            raise ValueError(f"eps_floor must be > 0 (got {self.eps_floor})")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def positions(self) -> np.ndarray:
        return np.array([node.position for node in self.nodes], dtype=float)

    def intensity(self, p) -> np.ndarray:
        """Raw intensity at point(s) p; no rescaling, no floor."""
        p = np.asarray(p, dtype=float)
        points = np.atleast_2d(p)
        total = np.zeros(len(points))
        for node in self.nodes:
            energy = node.model.energy(np.linalg.norm(points - node.position, axis=1))
            if self.mode == ALL_SENSOR:
                total += energy
            else:
                np.maximum(total, energy, out=total)
        if p.ndim == 1:
            return float(total[0])
        return total

    def scaled_intensity(self, p) -> np.ndarray:
        """Intensity divided by omega, floored at eps_floor."""
        value = np.maximum(np.asarray(self.intensity(p)) / self.omega, self.eps_floor)
        if np.ndim(value) == 0:
            return float(value)
        return value


def intensity(field: IntensityField, p):
    """Raw field intensity at p (sum or max of node energies)."""
    return field.intensity(p)


def scaled_intensity(field: IntensityField, p):
    """max(intensity(p) / omega, eps_floor)."""
    return field.scaled_intensity(p)


def build_field(
    nodes: Sequence[SensorNode],
    mode: str = MAX_SENSOR,
    omega: float = DEFAULT_OMEGA,
    eps_floor: float = DEFAULT_EPS_FLOOR
) -> IntensityField:
    """Convenience constructor taking any node sequence."""
    return IntensityField(nodes=tuple(nodes), mode=mode, omega=omega, eps_floor=eps_floor)
