import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from widthlab.exceptions import DomainMismatchError, EmptySetError

logger = logging.getLogger(__name__)

PROBABILITY_TOL = 1e-12


class MeasureKind(str, Enum):
    PROBABILITY = "probability"
    LEBESGUE = "lebesgue"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Weighted grid carrying the measure of an L_p space."""

    points: np.ndarray
    weights: np.ndarray
    measure_kind: MeasureKind = MeasureKind.PROBABILITY
    seed: int | None = None

    def __post_init__(self):
        points = _frozen(self.points)
        if points.ndim == 1:
            points = _frozen(points.reshape(-1, 1))
        weights = _frozen(self.weights)
        if weights.ndim != 1 or len(weights) != len(points):
            raise DomainMismatchError(
                f"Expected {len(points)} weights, got shape {weights.shape}"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise DomainMismatchError("Weights must be finite and nonnegative")
        kind = MeasureKind(self.measure_kind)
        if kind is MeasureKind.PROBABILITY and abs(weights.sum() - 1.0) > PROBABILITY_TOL:
            raise DomainMismatchError(f"Probability weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "measure_kind", kind)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def torus(cls, size: int) -> "GridDomain":
        """Uniform grid on [0, 2π) with Lebesgue weights 2π/size."""
        t = 2.0 * math.pi * np.arange(size) / size
        return cls(t.reshape(-1, 1), np.full(size, 2.0 * math.pi / size), MeasureKind.LEBESGUE)

    @classmethod
    def monte_carlo(cls, dim: int, size: int, seed: int, half_width: float = 1.0) -> "GridDomain":
        """Uniform samples on [-half_width, half_width]^dim with weights 1/size."""
        rng = np.random.default_rng(seed)
        points = rng.uniform(-half_width, half_width, size=(size, dim))
        return cls(points, np.full(size, 1.0 / size), MeasureKind.PROBABILITY, seed)

    @classmethod
    def from_points(cls, points, weights=None, measure_kind=MeasureKind.PROBABILITY) -> "GridDomain":
        points = np.asarray(points, dtype=float)
        n = len(points)
        if weights is None:
            weights = np.full(n, 1.0 / n) if MeasureKind(measure_kind) is MeasureKind.PROBABILITY else np.ones(n)
        return cls(points, weights, measure_kind)

    def same_as(self, other: "GridDomain") -> bool:
        if self is other:
            return True
        return (
            self.measure_kind is other.measure_kind
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True, eq=False)
class NormSpec:
    p: float
    domain: GridDomain

    def __post_init__(self):
        if not math.isfinite(self.p) or self.p < 1:
            raise ValueError(f"Norm exponent must satisfy 1 <= p < inf, got {self.p}")


@dataclass(frozen=True, eq=False)
class FunctionVector:
    """A function sampled on the points of a GridDomain."""

    values: np.ndarray
    domain: GridDomain

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.domain.size,):
            raise DomainMismatchError(
                f"Expected {self.domain.size} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DomainMismatchError("Function values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, domain: GridDomain) -> "FunctionVector":
        return cls(np.zeros(domain.size), domain)

    @classmethod
    def constant(cls, value: float, domain: GridDomain) -> "FunctionVector":
        return cls(np.full(domain.size, float(value)), domain)

    def _check(self, other: "FunctionVector"):
        if not self.domain.same_as(other.domain):
            raise DomainMismatchError("Functions live on different domains")

    def __add__(self, other: "FunctionVector") -> "FunctionVector":
        self._check(other)
        return FunctionVector(self.values + other.values, self.domain)

    def __sub__(self, other: "FunctionVector") -> "FunctionVector":
        self._check(other)
        return FunctionVector(self.values - other.values, self.domain)

    def __mul__(self, scalar: float) -> "FunctionVector":
        return FunctionVector(float(scalar) * self.values, self.domain)

    __rmul__ = __mul__

    def __neg__(self) -> "FunctionVector":
        return FunctionVector(-self.values, self.domain)


def _check_domain(domain: GridDomain, spec: NormSpec):
    if not domain.same_as(spec.domain):
        raise DomainMismatchError("Function domain differs from the norm's domain")


def weighted_norm(values: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    """(Σ_i w_i |v_i|^p)^(1/p) along the last axis."""
    values = np.asarray(values, dtype=float)
    if p == 2:
        return np.sqrt(np.sum(weights * values * values, axis=-1))
    if p == 1:
        return np.sum(weights * np.abs(values), axis=-1)
    return np.sum(weights * np.abs(values) ** p, axis=-1) ** (1.0 / p)


def norm(f: FunctionVector, spec: NormSpec) -> float:
    _check_domain(f.domain, spec)
    if not np.all(np.isfinite(f.values)):
        raise DomainMismatchError("Function values must be finite")
    return float(weighted_norm(f.values, spec.domain.weights, spec.p))


def stack(vectors: Sequence[FunctionVector], spec: NormSpec | None = None) -> np.ndarray:
    """Rows of sampled values, checking every vector shares one domain."""
    if len(vectors) == 0:
        raise EmptySetError("Cannot stack an empty set of functions")
    domain = spec.domain if spec is not None else vectors[0].domain
    for v in vectors:
        if not v.domain.same_as(domain):
            raise DomainMismatchError("Functions live on different domains")
    return np.vstack([v.values for v in vectors])


def pairwise_distances(a: np.ndarray, b: np.ndarray, spec: NormSpec) -> np.ndarray:
    """Matrix of weighted L_p distances between the rows of a and b."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return cdist(a, b, metric="minkowski", p=spec.p, w=spec.domain.weights)


def distances_to(values: np.ndarray, members: np.ndarray, spec: NormSpec) -> np.ndarray:
    """Distances from one sampled function to every row of members."""
    return weighted_norm(members - np.asarray(values)[None, :], spec.domain.weights, spec.p)


def dist_to_set(f: FunctionVector, members: Sequence[FunctionVector], spec: NormSpec) -> tuple[float, int]:
    """‖f − S‖ and the index attaining it; ties go to the lowest index."""
    if len(members) == 0:
        raise EmptySetError("Distance to an empty set is undefined")
    _check_domain(f.domain, spec)
    matrix = stack(members, spec)
    distances = distances_to(f.values, matrix, spec)
    index = int(np.argmin(distances))
    return float(distances[index]), index


def combine(members: Sequence[FunctionVector], coefficients: Sequence[float]) -> FunctionVector:
    """Pointwise Σ λ_i s_i."""
    coefficients = np.asarray(coefficients, dtype=float)
    if len(members) != len(coefficients):
        raise DomainMismatchError(
            f"{len(members)} members but {len(coefficients)} coefficients"
        )
    if len(members) == 0:
        raise EmptySetError("Cannot combine an empty set of functions")
    matrix = stack(members)
    return FunctionVector(coefficients @ matrix, members[0].domain)
