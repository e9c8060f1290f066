"""Tests for sensing models and field intensity."""

import math

import numpy as np
import pytest
from scipy import integrate

from sensing import (
    ALL_SENSOR,
    MAX_SENSOR,
    AttenuatedDisk,
    BooleanDisk,
    IntensityField,
    NoisyProbability,
    ProbabilityExp,
    SensorNode,
    build_field,
    model_from_params,
    q_function,
    sense,
)

ALL_MODELS = [
    BooleanDisk(r=2.0),
    AttenuatedDisk(lam=4.0, mu=2.0),
    ProbabilityExp(alpha=0.5, beta=2.0),
    NoisyProbability(lam=100.0, mu=1.0, sigma=1.0, a_threshold=6.0),
]


def test_attenuated_disk_at_distance_two():
    assert sense(AttenuatedDisk(lam=4.0, mu=2.0), (0.0, 0.0), (2.0, 0.0)) == pytest.approx(1.0)


def test_attenuated_disk_is_capped_at_the_sensor():
    model = AttenuatedDisk(lam=4.0, mu=2.0, s_max=50.0)
    assert sense(model, (1.0, 1.0), (1.0, 1.0)) == 50.0
    assert model.saturation_distance() == pytest.approx(math.sqrt(4.0 / 50.0))


def test_noisy_probability_half_detection():
    # lambda / d = A exactly: Q(0) = 1/2, energy = ln 2
    model = NoisyProbability(lam=100.0, mu=1.0, sigma=1.0, a_threshold=6.0)
    assert sense(model, (0.0, 0.0), (100.0 / 6.0, 0.0)) == pytest.approx(math.log(2.0), rel=1e-12)


def test_noisy_probability_far_away():
    model = NoisyProbability(lam=100.0, mu=1.0, sigma=1.0, a_threshold=6.0)
    # Q(5) = 2.8665e-7 and -ln(1 - Q) ~= Q
    assert sense(model, (0.0, 0.0), (100.0, 0.0)) == pytest.approx(2.8665e-7, rel=1e-3)


def test_boolean_disk_inside_and_outside():
    model = BooleanDisk(r=1.0, delta=0.1)
    assert sense(model, (0.0, 0.0), (0.5, 0.0)) == 1.0
    assert sense(model, (0.0, 0.0), (1.5, 0.0)) == 0.0
    assert sense(model, (0.0, 0.0), (1.0, 0.0)) == pytest.approx(0.5)


def test_boolean_disk_default_band():
    assert BooleanDisk(r=2.0).delta == pytest.approx(0.1)


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert q_function(40.0) == pytest.approx(0.0, abs=1e-300)
    assert q_function(1.0) == pytest.approx(0.1586553, rel=1e-6)


def test_q_function_matches_gaussian_tail_integral():
    for x in (-2.0, -0.3, 0.7, 2.5):
        tail, _ = integrate.quad(lambda z: math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi), x, math.inf)
        assert q_function(x) == pytest.approx(tail, rel=1e-9)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.KIND)
def test_models_are_radially_symmetric(model):
    s = (1.0, -2.0)
    d = 1.7
    angles = np.linspace(0.0, 2.0 * math.pi, 12, endpoint=False)
    points = np.column_stack([s[0] + d * np.cos(angles), s[1] + d * np.sin(angles)])
    values = sense(model, s, points)
    assert np.allclose(values, values[0], rtol=1e-12, atol=0.0)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.KIND)
def test_models_are_non_increasing_and_bounded(model):
    d = np.linspace(0.0, 50.0, 5001)
    e = model.energy(d)
    assert np.all(np.diff(e) <= 1e-15)
    assert np.all(e >= 0.0)
    assert np.all(e <= model.cap())


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.KIND)
def test_models_respect_their_slope_bound(model):
    d = np.linspace(0.0, 30.0, 30001)
    e = model.energy(d)
    slopes = np.abs(np.diff(e)) / np.diff(d)
    assert np.all(slopes <= model.slope_bound() * (1.0 + 1e-6))


def test_hard_boolean_disk_has_no_slope_bound():
    assert math.isinf(BooleanDisk(r=1.0, delta=0.0).slope_bound())


@pytest.mark.parametrize("params", [
    ('boolean_disk', {'r': 0.0}),
    ('boolean_disk', {'r': 1.0, 'delta': -0.1}),
    ('attenuated_disk', {'lambda': -1.0, 'mu': 2.0}),
    ('probability_exp', {'alpha': 1.0, 'beta': 0.0}),
    ('noisy_probability', {'lambda': 1.0, 'mu': 1.0, 'sigma': 0.0, 'A': 1.0}),
    ('magnetic', {'r': 1.0}),
])
def test_invalid_models_are_rejected(params):
    kind, values = params
    with pytest.raises(ValueError):
        model_from_params(kind, values)


def test_model_params_round_trip():
    for model in ALL_MODELS:
        assert model_from_params(model.KIND, model.params()) == model


def test_noisy_probability_accepts_threshold_alias():
    model = model_from_params('noisy_probability', {'lambda': 100, 'mu': 1, 'sigma': 1, 'A': 6})
    assert model.a_threshold == 6.0


def _two_nodes(mode):
    nodes = [
        SensorNode(position=(0.0, 0.0), model=AttenuatedDisk(lam=4.0, mu=2.0)),
        SensorNode(position=(4.0, 0.0), model=AttenuatedDisk(lam=1.0, mu=2.0)),
    ]
    return build_field(nodes, mode=mode)


def test_all_sensor_sums_node_energies():
    field = _two_nodes(ALL_SENSOR)
    assert field.intensity((2.0, 0.0)) == pytest.approx(1.0 + 0.25)


def test_max_sensor_takes_largest_node_energy():
    field = _two_nodes(MAX_SENSOR)
    assert field.intensity((2.0, 0.0)) == pytest.approx(1.0)


def test_max_never_exceeds_all():
    rng = np.random.default_rng(3)
    points = rng.uniform(-2.0, 6.0, size=(500, 2))
    assert np.all(_two_nodes(MAX_SENSOR).intensity(points) <= _two_nodes(ALL_SENSOR).intensity(points))


def test_scaled_intensity_divides_and_floors():
    node = SensorNode(position=(0.0, 0.0), model=AttenuatedDisk(lam=4.0, mu=2.0))
    field = build_field([node], omega=100.0, eps_floor=1e-6)
    assert field.scaled_intensity((2.0, 0.0)) == pytest.approx(0.01)
    assert field.scaled_intensity((1e5, 0.0)) == 1e-6


def test_intensity_shapes():
    field = _two_nodes(MAX_SENSOR)
    assert isinstance(field.intensity((1.0, 1.0)), float)
    assert field.intensity(np.zeros((7, 2))).shape == (7,)


@pytest.mark.parametrize("kwargs", [
    {'nodes': ()},
    {'mode': 'median'},
    {'omega': 0.5},
    {'eps_floor': 0.0},
])
def test_invalid_fields_are_rejected(kwargs):
    base = {'nodes': (SensorNode(position=(0.0, 0.0), model=BooleanDisk(r=1.0)),)}
    base.update(kwargs)
    with pytest.raises(ValueError):
        IntensityField(**base)
