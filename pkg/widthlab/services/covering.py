import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from widthlab.config import settings
from widthlab.exceptions import EmptySetError, UnsupportedError
from widthlab.services.function_space import NormSpec, distances_to, pairwise_distances
from widthlab.services.node_classes import Dictionary, NodeFamily, NodeKind

logger = logging.getLogger(__name__)

COMPARISON_TOL = 1e-12
EXACT_COVER_LIMIT = 12


@dataclass(frozen=True)
class EpsCover:
    epsilon: float
    center_indices: tuple[int, ...]
    certified: bool
    max_residual: float

    def __post_init__(self):
        if len(set(self.center_indices)) != len(self.center_indices):
            raise ValueError("Cover centers must be distinct")
        if self.epsilon < 0:
            raise ValueError(f"Cover radius must be nonnegative, got {self.epsilon}")

    @property
    def size(self) -> int:
        return len(self.center_indices)


@dataclass(frozen=True)
class EpsPacking:
    epsilon: float
    point_indices: tuple[int, ...]
    min_pairwise: float

    def __post_init__(self):
        if len(set(self.point_indices)) != len(self.point_indices):
            raise ValueError("Packing points must be distinct")
        if not self.min_pairwise > self.epsilon:
            raise ValueError(f"Packing separation {self.min_pairwise} does not exceed {self.epsilon}")

    @property
    def size(self) -> int:
        return len(self.point_indices)


@dataclass(frozen=True)
class GreedyOrder:
    """Farthest-point ordering; radii[i] is the covering radius of order[:i + 1]."""

    order: tuple[int, ...]
    radii: tuple[float, ...]

    def prefix_for(self, epsilon: float) -> int:
        """Length of the shortest prefix whose radius is within epsilon."""
        for i, radius in enumerate(self.radii):
            if radius <= epsilon + COMPARISON_TOL:
                return i + 1
        return len(self.order)


def greedy_order(dictionary: Dictionary, spec: NormSpec, max_centers: int | None = None,
                 stop_radius: float = -math.inf) -> GreedyOrder:
    """Start at member 0, then repeatedly take the member farthest from the chosen ones."""
    matrix = dictionary.matrix
    limit = len(dictionary) if max_centers is None else min(max_centers, len(dictionary))

    order = [0]
    min_dist = distances_to(matrix[0], matrix, spec)
    radii = [float(min_dist.max())]
    while len(order) < limit and radii[-1] > stop_radius and radii[-1] > 0:
        # argmax returns the lowest index on ties
        j = int(np.argmax(min_dist))
        order.append(j)
        min_dist = np.minimum(min_dist, distances_to(matrix[j], matrix, spec))
        radii.append(float(min_dist.max()))
    return GreedyOrder(tuple(order), tuple(radii))


def greedy_cover(dictionary: Dictionary, epsilon: float, spec: NormSpec) -> EpsCover:
    if epsilon <= 0:
        raise ValueError(f"Cover radius must be positive, got {epsilon}")
    ordering = greedy_order(dictionary, spec, stop_radius=epsilon + COMPARISON_TOL)
    size = ordering.prefix_for(epsilon)
    residual = ordering.radii[size - 1]
    logger.info(f"Greedy {epsilon:g}-cover of {len(dictionary)} members has {size} centers")
    return EpsCover(epsilon, ordering.order[:size], residual <= epsilon + COMPARISON_TOL, residual)


def cover_of_size(dictionary: Dictionary, n: int, spec: NormSpec,
                  ordering: GreedyOrder | None = None) -> EpsCover:
    """The greedy prefix cover with at most n centers, certified at its own radius."""
    if n < 1:
        raise ValueError(f"Cover size must be >= 1, got {n}")
    ordering = ordering or greedy_order(dictionary, spec, max_centers=n)
    size = min(n, len(ordering.order))
    radius = ordering.radii[size - 1]
    return EpsCover(radius, ordering.order[:size], True, radius)


def cover_from_centers(dictionary: Dictionary, center_indices, epsilon: float, spec: NormSpec) -> EpsCover:
    center_indices = tuple(int(i) for i in center_indices)
    if not center_indices:
        raise EmptySetError("A cover needs at least one center")
    distances = pairwise_distances(dictionary.matrix[list(center_indices)], dictionary.matrix, spec)
    residual = float(distances.min(axis=0).max())
    return EpsCover(epsilon, center_indices, residual <= epsilon + COMPARISON_TOL, residual)


def greedy_packing(dictionary: Dictionary, epsilon: float, spec: NormSpec) -> EpsPacking:
    """Maximal ε-separated subset built in farthest-point order."""
    if epsilon <= 0:
        raise ValueError(f"Packing radius must be positive, got {epsilon}")
    ordering = greedy_order(dictionary, spec, stop_radius=epsilon + COMPARISON_TOL)
    # order[i] joined at distance radii[i - 1] from all earlier points
    size = 1
    while size < len(ordering.order) and ordering.radii[size - 1] > epsilon + COMPARISON_TOL:
        size += 1
    points = ordering.order[:size]
    if size == 1:
        return EpsPacking(epsilon, points, math.inf)
    distances = pairwise_distances(dictionary.matrix[list(points)], dictionary.matrix[list(points)], spec)
    min_pairwise = float(distances[np.triu_indices(size, k=1)].min())
    return EpsPacking(epsilon, points, min_pairwise)


def exact_cover_size(dictionary: Dictionary, epsilon: float, spec: NormSpec) -> int:
    """Minimum internal ε-cover by exhaustive search; tiny dictionaries only."""
    if len(dictionary) > EXACT_COVER_LIMIT:
        raise ValueError(f"Exhaustive cover search is limited to {EXACT_COVER_LIMIT} members")
    within = pairwise_distances(dictionary.matrix, dictionary.matrix, spec) <= epsilon + COMPARISON_TOL
    n = len(dictionary)
    for size in range(1, n + 1):
        for centers in itertools.combinations(range(n), size):
            if within[list(centers)].any(axis=0).all():
                return size
    return n


def haussler_bound(V: int, p: float, epsilon: float, K_const: float | None = None) -> float:
    """K·V·(4e)^V·(1/ε)^(p(V−1))."""
    K_const = settings.haussler_constant if K_const is None else K_const
    if V < 2:
        raise ValueError(f"VC dimension must be >= 2, got {V}")
    if p < 1:
        raise ValueError(f"Norm exponent must be >= 1, got {p}")
    if epsilon <= 0:
        raise ValueError(f"Radius must be positive, got {epsilon}")
    if K_const <= 0:
        raise ValueError(f"Haussler constant must be positive, got {K_const}")
    if epsilon > 1:
        logger.warning(f"Haussler bound at epsilon={epsilon} > 1 is in its vacuous regime")
    return K_const * V * (4 * math.e) ** V * (1.0 / epsilon) ** (p * (V - 1))


def haussler_rate(n: int, V: int, p: float, K_const: float | None = None) -> float:
    """The Haussler bound inverted to error-at-n form: C / n^(1/(p(V−1)))."""
    K_const = settings.haussler_constant if K_const is None else K_const
    exponent = 1.0 / (p * (V - 1))
    constant = (K_const * V * (4 * math.e) ** V) ** exponent
    return constant / n ** exponent


def lipschitz_bound(k: int, epsilon: float) -> float:
    """(1/ε)^k."""
    if k < 1:
        raise ValueError(f"Parameter count must be >= 1, got {k}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"Radius must lie in (0, 1], got {epsilon}")
    return (1.0 / epsilon) ** k


def lipschitz_rate(n: int, k: int) -> float:
    return n ** (-1.0 / k)


@dataclass(frozen=True)
class LatticeCover:
    per_axis: int
    centers: np.ndarray
    radius: float

    @property
    def size(self) -> int:
        return len(self.centers)


def parameter_lattice_cover(k: int, epsilon: float) -> LatticeCover:
    """Cell-center lattice of [0,1]^k with parameter-space radius ≤ ε."""
    if epsilon <= 0:
        raise ValueError(f"Radius must be positive, got {epsilon}")
    m = max(1, math.ceil(math.sqrt(k) / (2 * epsilon)))
    axis = (2 * np.arange(m) + 1) / (2 * m)
    centers = np.array(list(itertools.product(axis, repeat=k)))
    return LatticeCover(m, centers, math.sqrt(k) / (2 * m))


@dataclass(frozen=True)
class BoundReport:
    family: str
    epsilon: float
    empirical_size: int
    bound_value: float
    satisfied: bool
    certified: bool
    max_residual: float
    scaled_bound_value: float | None = None
    lattice_size: int | None = None
    label: str = "empirical, on the sampled subclass"


def bound_consistency(dictionary: Dictionary, epsilon: float, spec: NormSpec,
                      family: NodeFamily | None = None, K_const: float | None = None,
                      cover: EpsCover | None = None) -> BoundReport:
    """Greedy cover size against the closed-form covering bound of the node family."""
    family = family or dictionary.family
    if family is None or family.kind is NodeKind.FOURIER_ATOM:
        kind = family.kind.value if family else "explicit"
        raise UnsupportedError(f"No covering bound applies to {kind} dictionaries")

    cover = cover or greedy_cover(dictionary, epsilon, spec)
    # bounds are stated for the unit-scale class S, not Λ·S
    unit_eps = epsilon / dictionary.scale
    scaled = None
    lattice_size = None
    if family.kind is NodeKind.LINEAR_THRESHOLD:
        bound = haussler_bound(family.d + 1, spec.p, unit_eps, K_const)
    else:
        bound = lipschitz_bound(family.k, min(unit_eps, 1.0))
        scaled = max(1.0, (family.lipschitz_constant / unit_eps) ** family.k)
        lattice_size = parameter_lattice_cover(family.k, unit_eps).size

    report = BoundReport(
        family=family.kind.value,
        epsilon=epsilon,
        empirical_size=cover.size,
        bound_value=bound,
        satisfied=cover.size <= bound,
        certified=cover.certified,
        max_residual=cover.max_residual,
        scaled_bound_value=scaled,
        lattice_size=lattice_size,
    )
    if not report.satisfied:
        logger.warning(f"Cover of size {cover.size} exceeds bound {bound:.6g} at epsilon={epsilon}")
    return report
