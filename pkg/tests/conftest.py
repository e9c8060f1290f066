"""Shared fixtures."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import numpy as np
import pytest

from geometry import VertexClass, build_domain, triangulate
from sensing import AttenuatedDisk, BooleanDisk, SensorNode, build_field


def uniform_field(omega: float = 1.0, eps_floor: float = 1e-9, center=(0.0, 0.0)):
    """Raw intensity 1 everywhere within 1000 of center (scaled: 1 / omega)."""
    node = SensorNode(position=center, model=BooleanDisk(r=1000.0, delta=0.0))
    return build_field([node], omega=omega, eps_floor=eps_floor)


def faint_field(eps_floor: float = 1e-3, corner=(1.0, 1.0)):
    """A single tiny hard disk in a corner: the floor governs everywhere else."""
    node = SensorNode(position=corner, model=BooleanDisk(r=0.01, delta=0.0))
    return build_field([node], omega=100.0, eps_floor=eps_floor)


@pytest.fixture
def unit_domain():
    return build_domain((0.0, 0.0), (1.0, 1.0))


@pytest.fixture
def ten_domain():
    return build_domain((0.0, 0.0), (10.0, 10.0))


@pytest.fixture
def single_node_field():
    node = SensorNode(position=(5.0, 5.0), model=AttenuatedDisk(lam=4.0, mu=2.0))
    return build_field([node])


@pytest.fixture
def toy_grid(unit_domain):
    """Unit square corners plus its center; goal at the origin."""
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
    classes = np.array([VertexClass.GOAL] + [VertexClass.DOMAIN_BOUNDARY] * 3 + [VertexClass.FREE])
    return triangulate(vertices, classes, unit_domain)


@pytest.fixture
def random_grid(unit_domain):
    """About 250 vertices: goal, square corners and seeded uniform points."""
    rng = np.random.default_rng(7)
    interior = rng.uniform(0.02, 0.98, size=(245, 2))
    vertices = np.vstack([[[0.3, 0.4]], unit_domain.corners(), interior])
    classes = np.full(len(vertices), VertexClass.FREE)
    classes[0] = VertexClass.GOAL
    classes[1:5] = VertexClass.DOMAIN_BOUNDARY
    return triangulate(vertices, classes, unit_domain)
