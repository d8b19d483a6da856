import itertools
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit

from widthlab.config import settings
from widthlab.exceptions import DomainMismatchError, EmptySetError, WidthLabError
from widthlab.services.function_space import FunctionVector, GridDomain, NormSpec, weighted_norm

logger = logging.getLogger(__name__)


class NodeKind(str, Enum):
    LINEAR_THRESHOLD = "linear_threshold"
    SMOOTH_MOTHER = "smooth_mother"
    FOURIER_ATOM = "fourier_atom"


class UnknownMotherError(WidthLabError, KeyError):
    pass


@dataclass(frozen=True)
class Mother:
    """A parameterized template f(x, y), y ∈ [0,1]^k, with values in [0, 1]."""

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    # parameter count for input dimension d; None accepts any k
    parameter_count: Callable[[int], int | None]


def _logistic(points: np.ndarray, params: np.ndarray) -> np.ndarray:
    d = points.shape[1]
    w = -1.0 + 2.0 * params[:, :d]
    b = -1.0 + 2.0 * params[:, d]
    slope = 1.0 + 3.0 * params[:, d + 1]
    return expit(slope[:, None] * (w @ points.T + b[:, None]))


def _logistic_ridge(points: np.ndarray, params: np.ndarray) -> np.ndarray:
    d = points.shape[1]
    w = -1.0 + 2.0 * params[:, :d]
    b = -1.0 + 2.0 * params[:, d]
    return expit(2.0 * (w @ points.T + b[:, None]))


def _constant(points: np.ndarray, params: np.ndarray) -> np.ndarray:
    return np.full((len(params), len(points)), 0.5)


def _coordinate(points: np.ndarray, params: np.ndarray) -> np.ndarray:
    return np.repeat(params[:, :1], len(points), axis=1)


MOTHERS: dict[str, Mother] = {
    "logistic": Mother("logistic", _logistic, lambda d: d + 2),
    "logistic_ridge": Mother("logistic_ridge", _logistic_ridge, lambda d: d + 1),
    "constant": Mother("constant", _constant, lambda d: None),
    "coordinate": Mother("coordinate", _coordinate, lambda d: None),
}


def get_mother(mother_id: str) -> Mother:
    try:
        return MOTHERS[mother_id]
    except KeyError:
        raise UnknownMotherError(f"Unknown mother function {mother_id!r}; known: {sorted(MOTHERS)}")


@dataclass(frozen=True)
class NodeFamily:
    kind: NodeKind
    d: int = 1
    k: int = 1
    lipschitz_constant: float = 1.0
    mother_id: str = "logistic"
    max_frequency: int = 0
    parameter_box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        kind = NodeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.d < 1:
            raise ValueError(f"Input dimension must be >= 1, got {self.d}")
        if kind is NodeKind.SMOOTH_MOTHER:
            if self.k < 1:
                raise ValueError(f"Parameter count must be >= 1, got {self.k}")
            if self.lipschitz_constant <= 0:
                raise ValueError("Lipschitz constant must be positive")
            expected = get_mother(self.mother_id).parameter_count(self.d)
            if expected is not None and expected != self.k:
                raise ValueError(
                    f"Mother {self.mother_id!r} on R^{self.d} takes {expected} parameters, not {self.k}"
                )
        if kind is NodeKind.FOURIER_ATOM and self.max_frequency < 0:
            raise ValueError("Maximum frequency must be nonnegative")

        box = tuple(tuple(map(float, r)) for r in self.parameter_box) or self._default_box(kind)
        if len(box) != self.parameter_count:
            raise ValueError(f"Parameter box has {len(box)} ranges, expected {self.parameter_count}")
        for low, high in box:
            if not low <= high:
                raise ValueError(f"Empty parameter range [{low}, {high}]")
            if kind is NodeKind.SMOOTH_MOTHER and (low < 0 or high > 1):
                raise ValueError("Mother parameters live in [0, 1]^k")
        object.__setattr__(self, "parameter_box", box)

    def _default_box(self, kind: NodeKind) -> tuple[tuple[float, float], ...]:
        if kind is NodeKind.LINEAR_THRESHOLD:
            return ((-1.0, 1.0),) * (self.d + 1)
        if kind is NodeKind.SMOOTH_MOTHER:
            return ((0.0, 1.0),) * self.k
        return ((0.0, float(self.max_frequency)), (0.0, 1.0))

    @property
    def parameter_count(self) -> int:
        if self.kind is NodeKind.LINEAR_THRESHOLD:
            return self.d + 1
        if self.kind is NodeKind.SMOOTH_MOTHER:
            return self.k
        return 2

    @classmethod
    def linear_threshold(cls, d: int, parameter_box=()) -> "NodeFamily":
        return cls(NodeKind.LINEAR_THRESHOLD, d=d, parameter_box=parameter_box)

    @classmethod
    def smooth_mother(cls, k: int, d: int = 1, lipschitz_constant: float = 1.0,
                      mother_id: str = "logistic", parameter_box=()) -> "NodeFamily":
        return cls(NodeKind.SMOOTH_MOTHER, d=d, k=k, lipschitz_constant=lipschitz_constant,
                   mother_id=mother_id, parameter_box=parameter_box)

    @classmethod
    def fourier_atom(cls, max_frequency: int) -> "NodeFamily":
        return cls(NodeKind.FOURIER_ATOM, max_frequency=max_frequency)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "d": self.d,
            "k": self.k,
            "lipschitz_constant": self.lipschitz_constant,
            "mother_id": self.mother_id,
            "max_frequency": self.max_frequency,
            "parameter_box": [list(r) for r in self.parameter_box],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NodeFamily":
        data = dict(data)
        data["parameter_box"] = tuple(tuple(r) for r in data.get("parameter_box", ()))
        return cls(**data)


@dataclass(frozen=True, eq=False)
class Dictionary:
    """A finite sampled node class Λ·S evaluated on a grid."""

    family: NodeFamily | None
    parameters: np.ndarray
    members: tuple[FunctionVector, ...]
    scale: float = 1.0
    seed: int | None = None
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.members) == 0:
            raise EmptySetError("A dictionary needs at least one member")
        if len(self.parameters) != len(self.members):
            raise DomainMismatchError(
                f"{len(self.parameters)} parameter vectors for {len(self.members)} members"
            )
        if self.scale <= 0:
            raise ValueError(f"Scale must be positive, got {self.scale}")
        domain = self.members[0].domain
        if any(not m.domain.same_as(domain) for m in self.members):
            raise DomainMismatchError("Dictionary members live on different domains")
        matrix = np.vstack([m.values for m in self.members])
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

        kind = self.family.kind if self.family is not None else None
        if kind is NodeKind.SMOOTH_MOTHER and (matrix.min() < 0 or matrix.max() > self.scale):
            raise ValueError("Smooth-mother members must take values in [0, Λ]")
        if kind is NodeKind.LINEAR_THRESHOLD and not np.all((matrix == 0) | (matrix == self.scale)):
            raise ValueError("Threshold members must take values in {0, Λ}")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def domain(self) -> GridDomain:
        return self.members[0].domain

    @classmethod
    def from_members(cls, members, scale: float = 1.0) -> "Dictionary":
        """Hand-built dictionary with no generating family."""
        members = tuple(members)
        return cls(None, np.arange(len(members), dtype=float).reshape(-1, 1), members, scale)

    def scaled(self, scale: float) -> "Dictionary":
        if self.family is None:
            unit = self.matrix / self.scale
            return Dictionary(None, self.parameters,
                              tuple(FunctionVector(scale * row, self.domain) for row in unit), scale)
        return build_dictionary(self.family, self.parameters, self.domain, scale, self.seed)


def _normalize_thresholds(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1)
    raw = raw[norms > 0] / norms[norms > 0, None]
    # equal directions collapse to one node; keep first occurrence
    _, first = np.unique(np.round(raw, 12), axis=0, return_index=True)
    return raw[np.sort(first)]


def _fourier_parameters(max_frequency: int) -> np.ndarray:
    rows = [(0.0, 0.0)]
    for k in range(1, max_frequency + 1):
        rows.append((float(k), 1.0))
        rows.append((float(k), 0.0))
    return np.array(rows)


def evaluate_nodes(family: NodeFamily, parameters: np.ndarray, domain: GridDomain) -> np.ndarray:
    """Unit-scale node values, one row per parameter vector."""
    parameters = np.atleast_2d(np.asarray(parameters, dtype=float))
    points = domain.points

    if family.kind is NodeKind.FOURIER_ATOM:
        if domain.dim != 1:
            raise DomainMismatchError("Fourier atoms need a one-dimensional torus domain")
        t = points[:, 0]
        freq = parameters[:, :1]
        is_sin = parameters[:, 1:2] == 1.0
        return np.where(is_sin, np.sin(freq * t), np.cos(freq * t))

    if domain.dim != family.d:
        raise DomainMismatchError(f"Family on R^{family.d} evaluated on a {domain.dim}-dimensional grid")

    if family.kind is NodeKind.LINEAR_THRESHOLD:
        w, b = parameters[:, :-1], parameters[:, -1]
        # ties 1[0 >= 0] = 1
        return (w @ points.T + b[:, None] >= 0).astype(float)

    return get_mother(family.mother_id).evaluate(points, parameters)


def build_dictionary(family: NodeFamily, parameters: np.ndarray, domain: GridDomain,
                     scale: float = 1.0, seed: int | None = None) -> Dictionary:
    """Members are reproducible from (family, parameters, domain) alone."""
    parameters = np.atleast_2d(np.asarray(parameters, dtype=float))
    values = scale * evaluate_nodes(family, parameters, domain)
    members = tuple(FunctionVector(row, domain) for row in values)
    return Dictionary(family, parameters, members, scale, seed)


def parameter_lattice(box, resolution: int) -> np.ndarray:
    axes = [np.linspace(low, high, resolution) if high > low else np.array([low]) for low, high in box]
    return np.array(list(itertools.product(*axes)), dtype=float)


def sample_dictionary(family: NodeFamily, domain: GridDomain, *, count: int | None = None,
                      resolution: int | None = None, seed: int = 0, scale: float = 1.0) -> Dictionary:
    """Sample a finite node dictionary on a lattice (resolution) or at random (count)."""
    if family.kind is NodeKind.FOURIER_ATOM:
        parameters = _fourier_parameters(family.max_frequency)
    elif resolution is not None:
        if resolution < 1:
            raise ValueError("Lattice resolution must be >= 1")
        parameters = parameter_lattice(family.parameter_box, resolution)
    else:
        if count is None or count < 1:
            raise ValueError("Random sampling needs count >= 1")
        rng = np.random.default_rng(seed)
        low = np.array([r[0] for r in family.parameter_box])
        high = np.array([r[1] for r in family.parameter_box])
        parameters = rng.uniform(low, high, size=(count, len(low)))

    if family.kind is NodeKind.LINEAR_THRESHOLD:
        parameters = _normalize_thresholds(parameters)

    dictionary = build_dictionary(family, parameters, domain, scale, seed)
    logger.info(f"Sampled {len(dictionary)} {family.kind.value} nodes on {domain.size} points")
    return dictionary


def lipschitz_check(dictionary: Dictionary, spec: NormSpec, trials: int | None = None,
                    seed: int = 0, batch: int = 1000) -> float:
    """Largest observed ‖f(·,y) − f(·,y')‖ / ‖y − y'‖ over sampled member pairs."""
    if dictionary.family is None or dictionary.family.kind is not NodeKind.SMOOTH_MOTHER:
        raise ValueError("Lipschitz check applies to smooth-mother dictionaries only")
    if len(dictionary) < 2:
        raise EmptySetError("Lipschitz check needs at least two members")
    trials = trials or settings.lipschitz_trials

    rng = np.random.default_rng(seed)
    pairs = rng.integers(0, len(dictionary), size=(trials, 2))
    param_gap = np.linalg.norm(dictionary.parameters[pairs[:, 0]] - dictionary.parameters[pairs[:, 1]], axis=1)
    pairs, param_gap = pairs[param_gap > 0], param_gap[param_gap > 0]
    if len(pairs) == 0:
        raise EmptySetError("No sampled pair has distinct parameters")

    ratio = 0.0
    for start in range(0, len(pairs), batch):
        chunk = pairs[start:start + batch]
        diffs = dictionary.matrix[chunk[:, 0]] - dictionary.matrix[chunk[:, 1]]
        gaps = weighted_norm(diffs, spec.domain.weights, spec.p) / dictionary.scale
        ratio = max(ratio, float(np.max(gaps / param_gap[start:start + batch])))

    if ratio > dictionary.family.lipschitz_constant:
        logger.warning(
            f"Observed Lipschitz ratio {ratio:.4g} exceeds assumed constant "
            f"{dictionary.family.lipschitz_constant}"
        )
    return ratio


def save_dictionary(dictionary: Dictionary, path: str | Path) -> None:
    if dictionary.family is None:
        raise ValueError("Only family-generated dictionaries can be saved")
    data = {
        "family": dictionary.family.to_dict(),
        "seed": dictionary.seed,
        "scale": dictionary.scale,
        "parameters": dictionary.parameters.tolist(),
    }
    Path(path).write_text(json.dumps(data, indent=2))


def load_dictionary(path: str | Path, domain: GridDomain) -> Dictionary:
    data = json.loads(Path(path).read_text())
    family = NodeFamily.from_dict(data["family"])
    return build_dictionary(family, np.array(data["parameters"]), domain, data["scale"], data["seed"])
