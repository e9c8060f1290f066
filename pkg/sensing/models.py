"""Sensor node models: the four sensing-function variants and the node record."""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import optimize, special

DEFAULT_S_MAX = 1.0e6
DEFAULT_DELTA_FRACTION = 0.05


def q_function(x):
    """
    Gaussian tail probability Q(x) = P(Z > x) for Z ~ N(0, 1).

    Accepts scalars or arrays; uses the complementary error function identity
    Q(x) = erfc(x / sqrt(2)) / 2.
    """
    result = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    if np.ndim(result) == 0:
        return float(result)
    return result


def _power_energy(lam: float, mu: float, d: np.ndarray) -> np.ndarray:
    """lambda / d^mu with d = 0 mapped to +inf."""
    with np.errstate(divide='ignore', over='ignore'):
        return lam / np.power(d, mu)


class SensingModel:
    """
    Base class for node sensing functions.

    Subclasses implement `energy(d)` over an array of target-to-sensor
    distances. Every model is monotone non-increasing in distance and bounded.
    """

    KIND = ""

    def energy(self, d: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cap(self) -> float:
        """Upper bound of the energy over all distances."""
        raise NotImplementedError

    def slope_bound(self) -> float:
        """Upper bound on |dS/dd| over all distances (Lipschitz constant)."""
        raise NotImplementedError

    def params(self) -> Dict[str, float]:
        """Serializable parameter dict (inverse of `model_from_params`)."""
        raise NotImplementedError


@dataclass(frozen=True)
class BooleanDisk(SensingModel):
    """
    Boolean disk coverage, smoothed with a cubic smoothstep on [r - delta, r + delta].

    Args:
        r: Critical sensing range
        delta: Half-width of the smoothing band (None -> 5% of r)
    """
    r: float
    delta: Optional[float] = None

    KIND = "boolean_disk"

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, 'delta', DEFAULT_DELTA_FRACTION * self.r)
        if not self.r > 0:
            raise ValueError(f"BooleanDisk requires r > 0 (got {self.r})")
        if not self.delta >= 0:
            raise ValueError(f"BooleanDisk requires delta >= 0 (got {self.delta})")

    def energy(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.delta == 0:
            return np.where(d <= self.r, 1.0, 0.0)
        t = np.clip((d - (self.r - self.delta)) / (2.0 * self.delta), 0.0, 1.0)
        return 1.0 - t * t * (3.0 - 2.0 * t)

    def cap(self) -> float:
        return 1.0

    def slope_bound(self) -> float:
        if self.delta == 0:
            return math.inf
        # smoothstep peaks at 1.5 / width
        return 1.5 / (2.0 * self.delta)

    def params(self) -> Dict[str, float]:
        return {'r': self.r, 'delta': self.delta}


@dataclass(frozen=True)
class AttenuatedDisk(SensingModel):
    """
    Attenuated disk coverage: min(lambda / d^mu, s_max).

    Args:
        lam: Propagation constant
        mu: Attenuation exponent
        s_max: Energy cap (keeps the model finite and Lipschitz at d = 0)
    """
    lam: float
    mu: float
    s_max: float = DEFAULT_S_MAX

    KIND = "attenuated_disk"

    def __post_init__(self):
        for name in ('lam', 'mu', 's_max'):
            if not getattr(self, name) > 0:
                raise ValueError(f"AttenuatedDisk requires {name} > 0 (got {getattr(self, name)})")

    def energy(self, d: np.ndarray) -> np.ndarray:
        return np.minimum(_power_energy(self.lam, self.mu, np.asarray(d, dtype=float)), self.s_max)

    def cap(self) -> float:
        return self.s_max

    def saturation_distance(self) -> float:
        """Distance below which the cap is active."""
        return (self.lam / self.s_max) ** (1.0 / self.mu)

    def slope_bound(self) -> float:
        d_c = self.saturation_distance()
        return self.mu * self.lam / d_c ** (self.mu + 1.0)

    def params(self) -> Dict[str, float]:
        return {'lambda': self.lam, 'mu': self.mu, 's_max': self.s_max}


@dataclass(frozen=True)
class ProbabilityExp(SensingModel):
    """
    Sensing probability model: exp(-alpha * d^beta).

    Args:
        alpha: Attenuation constant
        beta: Exponent
    """
    alpha: float
    beta: float

    KIND = "probability_exp"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"ProbabilityExp requires alpha > 0 (got {self.alpha})")
        if not self.beta > 0:
            raise ValueError(f"ProbabilityExp requires beta > 0 (got {self.beta})")

    def energy(self, d: np.ndarray) -> np.ndarray:
        return np.exp(-self.alpha * np.power(np.asarray(d, dtype=float), self.beta))

    def cap(self) -> float:
        return 1.0

    def slope_bound(self) -> float:
        if self.beta < 1:
            return math.inf
        if self.beta == 1:
            return self.alpha
        # maximum of alpha*beta*d^(beta-1)*exp(-alpha*d^beta)
        d_star = ((self.beta - 1.0) / (self.alpha * self.beta)) ** (1.0 / self.beta)
        return (self.alpha * self.beta * d_star ** (self.beta - 1.0)
                * math.exp(-self.alpha * d_star ** self.beta))

    def params(self) -> Dict[str, float]:
        return {'alpha': self.alpha, 'beta': self.beta}


@dataclass(frozen=True)
class NoisyProbability(SensingModel):
    """
    Probability coverage with Gaussian noise, deterministic form:
    min(-ln(1 - Q((A - lambda/d^mu) / sigma)), s_max).

    Args:
        lam: Propagation constant
        mu: Attenuation exponent
        sigma: Noise standard deviation
        a_threshold: Detection threshold A
        s_max: Energy cap
    """
    lam: float
    mu: float
    sigma: float
    a_threshold: float
    s_max: float = DEFAULT_S_MAX

    KIND = "noisy_probability"

    def __post_init__(self):
        for name in ('lam', 'mu', 'sigma', 's_max'):
            if not getattr(self, name) > 0:
                raise ValueError(f"NoisyProbability requires {name} > 0 (got {getattr(self, name)})")

    def energy(self, d: np.ndarray) -> np.ndarray:
        # 1 - Q(x) = Phi(x); log_ndtr keeps the tail finite where Q rounds to 1
        signal = _power_energy(self.lam, self.mu, np.asarray(d, dtype=float))
        with np.errstate(invalid='ignore'):
            x = (self.a_threshold - signal) / self.sigma
        return np.minimum(-special.log_ndtr(x), self.s_max)

    def cap(self) -> float:
        return self.s_max

    def _cap_argument(self) -> Optional[float]:
        """Noise argument x at which the energy reaches s_max (None if it never does)."""
        x_far = self.a_threshold / self.sigma
        if -special.log_ndtr(x_far) >= self.s_max:
            return None
        x_low = -math.sqrt(2.0 * self.s_max) - 10.0
        return optimize.brentq(lambda x: -special.log_ndtr(x) - self.s_max, x_low, x_far, xtol=1e-14)

    def slope_bound(self) -> float:
        # |dS/dd| = phi(x)/Phi(x) * lambda*mu / (sigma * d^(mu+1)) shrinks with d,
        # so the bound is its value where the cap stops
        x_c = self._cap_argument()
        if x_c is None:
            return 0.0
        d_c = (self.lam / (self.a_threshold - self.sigma * x_c)) ** (1.0 / self.mu)
        log_pdf = -0.5 * x_c * x_c - 0.5 * math.log(2.0 * math.pi)
        hazard = math.exp(log_pdf - special.log_ndtr(x_c))
        return hazard * self.lam * self.mu / (self.sigma * d_c ** (self.mu + 1.0)) * (1.0 + 1e-9)

    def params(self) -> Dict[str, float]:
        return {'lambda': self.lam, 'mu': self.mu, 'sigma': self.sigma,
                'a_threshold': self.a_threshold, 's_max': self.s_max}


MODEL_KINDS = {
    BooleanDisk.KIND: BooleanDisk,
    AttenuatedDisk.KIND: AttenuatedDisk,
    ProbabilityExp.KIND: ProbabilityExp,
    NoisyProbability.KIND: NoisyProbability,
}

# scenario-file parameter names -> constructor arguments
_PARAM_ALIASES = {
    'lambda': 'lam',
    'A': 'a_threshold',
}


def model_from_params(kind: str, params: Dict[str, float]) -> SensingModel:
    """
    Build a sensing model from its scenario-file tag and parameter dict.

    Raises:
        ValueError: Unknown kind, unknown parameter or invalid value
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown sensing model '{kind}' (expected one of {sorted(MODEL_KINDS)})")
    cls = MODEL_KINDS[kind]
    kwargs = {_PARAM_ALIASES.get(key, key): float(value) for key, value in params.items()}
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ValueError(f"bad parameters for {kind}: {e}")


@dataclass(frozen=True)
class SensorNode:
    """A sensor position with its own sensing model."""
    position: Tuple[float, float]
    model: SensingModel

    def __post_init__(self):
        position = tuple(float(c) for c in self.position)
        if len(position) != 2 or not all(math.isfinite(c) for c in position):
            raise ValueError(f"node position must be a finite 2-vector (got {self.position})")
        object.__setattr__(self, 'position', position)

    def sense(self, p) -> np.ndarray:
        """Energy perceived from target point(s) p."""
        return sense(self.model, self.position, p)

    def to_dict(self) -> dict:
        """Convert to the scenario-file node entry."""
        return {
            'x': self.position[0],
            'y': self.position[1],
            'model': self.model.KIND,
            'params': self.model.params(),
        }


def sense(model: SensingModel, s, p):
    """
    Energy a sensor at s perceives from a target at p.

    Args:
        model: Sensing model
        s: Sensor position, shape (2,)
        p: Target position(s), shape (2,) or (M, 2)

    Returns:
        Scalar for a single point, array of shape (M,) otherwise
    """
    p = np.asarray(p, dtype=float)
    d = np.linalg.norm(p - np.asarray(s, dtype=float), axis=-1)
    value = model.energy(d)
    if p.ndim == 1:
        return float(value)
    return value
