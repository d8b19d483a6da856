"""Sobolev balls on the torus and their trigonometric widths.

All width values are computed exactly in coefficient space; grid quadrature only
serves as an independent cross-check.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from widthlab.config import settings
from widthlab.exceptions import InvariantViolation, UnsupportedError
from widthlab.services.convex_approx import convex_fit, linear_fit
from widthlab.services.function_space import FunctionVector, GridDomain, NormSpec, norm
from widthlab.services.node_classes import NodeFamily, sample_dictionary

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-12
ORACLE_TOL = 1e-6
COMPARISON_SLACK = 1e-9

# Coefficients and mass stated for the extremal series; they violate the seminorm constraint
STATED_COEFFICIENT = math.sqrt(3.0) / math.pi
STATED_MASS = math.pi / math.sqrt(3.0)
LIMIT_MASS = math.sqrt(math.pi / 3.0)


@dataclass(frozen=True, eq=False)
class FourierFunction:
    """a0 + Σ_k (a_k cos kt + b_k sin kt) for k = 1..M."""

    a0: float
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.cos_coeffs, dtype=float))
        b = np.atleast_1d(np.asarray(self.sin_coeffs, dtype=float))
        size = max(len(a), len(b))
        a = np.pad(a, (0, size - len(a)))
        b = np.pad(b, (0, size - len(b)))
        if not (math.isfinite(self.a0) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("Fourier coefficients must be finite")
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "cos_coeffs", a)
        object.__setattr__(self, "sin_coeffs", b)

    @property
    def cutoff(self) -> int:
        return len(self.cos_coeffs)

    @classmethod
    def single(cls, frequency: int, kind: str, amplitude: float = 1.0) -> "FourierFunction":
        if frequency == 0:
            return cls(amplitude, [], [])
        coeffs = np.zeros(frequency)
        coeffs[-1] = amplitude
        zeros = np.zeros(frequency)
        if kind == "sin":
            return cls(0.0, zeros, coeffs)
        return cls(0.0, coeffs, zeros)

    def evaluate(self, domain: GridDomain) -> FunctionVector:
        t = domain.points[:, 0]
        k = np.arange(1, self.cutoff + 1)
        phase = np.outer(t, k)
        values = self.a0 + np.cos(phase) @ self.cos_coeffs + np.sin(phase) @ self.sin_coeffs
        return FunctionVector(values, domain)

    def l2_norm(self) -> float:
        """Parseval: √(2π a0² + π Σ (a_k² + b_k²))."""
        tail = np.sum(self.cos_coeffs ** 2 + self.sin_coeffs ** 2)
        return math.sqrt(2 * math.pi * self.a0 ** 2 + math.pi * tail)

    def scaled(self, factor: float) -> "FourierFunction":
        return FourierFunction(factor * self.a0, factor * self.cos_coeffs, factor * self.sin_coeffs)


@dataclass(frozen=True)
class SobolevBallSpec:
    r: int
    C: float

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"Smoothness must be >= 1, got {self.r}")
        if not self.C > 2 * math.pi:
            raise ValueError(f"Mean bound must exceed 2π, got {self.C}")


def sobolev_seminorm(f: FourierFunction, r: int) -> float:
    """‖f^(r)‖₂ = √(π Σ k^(2r) (a_k² + b_k²))."""
    if r < 1:
        raise ValueError(f"Derivative order must be >= 1, got {r}")
    k = np.arange(1, f.cutoff + 1, dtype=float)
    return math.sqrt(math.pi * np.sum(k ** (2 * r) * (f.cos_coeffs ** 2 + f.sin_coeffs ** 2)))


def finite_difference_seminorm(f: FourierFunction, r: int, domain: GridDomain) -> float:
    """r-fold periodic central differences, then grid quadrature."""
    values = f.evaluate(domain).values
    h = 2 * math.pi / domain.size
    for _ in range(r):
        values = (np.roll(values, -1) - np.roll(values, 1)) / (2 * h)
    return math.sqrt(float(np.sum(domain.weights * values ** 2)))


def ball_membership(f: FourierFunction, spec: SobolevBallSpec, domain: GridDomain | None = None) -> bool:
    """Seminorm ≤ 1 and |∫f| ≤ C; the integral is 2π·a0 unless a grid is supplied."""
    if domain is not None:
        integral = float(np.sum(domain.weights * f.evaluate(domain).values))
    else:
        integral = 2 * math.pi * f.a0
    return (
        sobolev_seminorm(f, spec.r) <= 1 + MEMBERSHIP_TOL
        and abs(integral) <= spec.C * (1 + MEMBERSHIP_TOL)
    )


def trig_atoms(count: int, domain: GridDomain, scale: float = 1.0) -> list[FunctionVector]:
    """The first count atoms of 1, sin t, cos t, sin 2t, cos 2t, …"""
    if count < 1:
        raise ValueError(f"Need at least one atom, got {count}")
    family = NodeFamily.fourier_atom(count // 2)
    return list(sample_dictionary(family, domain, scale=scale).members[:count])


def witness(spec: SobolevBallSpec, count: int) -> FourierFunction:
    """First trigonometric atom missing from trig_atoms(count), scaled to seminorm 1."""
    frequency = (count + 1) // 2
    kind = "sin" if count % 2 == 1 else "cos"
    return FourierFunction.single(frequency, kind, 1.0 / (math.sqrt(math.pi) * frequency ** spec.r))


@dataclass(frozen=True, eq=False)
class TruncationWidth:
    n: int
    r: int
    dimension: int
    error: float
    coefficient_error: float
    worst_case: FourierFunction
    quadrature_error: float | None = None


def truncation_width(spec: SobolevBallSpec, n: int, domain: GridDomain | None = None) -> TruncationWidth:
    """Worst-case L2 error of projecting the ball onto span{1, …, sin(n−1)t, cos(n−1)t}."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    dimension = 2 * n - 1
    worst = witness(spec, dimension)
    # the witness lies entirely outside the subspace, so its error is its own norm
    coefficient_error = worst.l2_norm()
    quadrature_error = None
    if domain is not None:
        spec2 = NormSpec(2, domain)
        quadrature_error = linear_fit(worst.evaluate(domain), trig_atoms(dimension, domain), spec2).error
    return TruncationWidth(n, spec.r, dimension, float(n) ** -spec.r, coefficient_error, worst, quadrature_error)


def staircase_error(spec: SobolevBallSpec, n: int, domain: GridDomain) -> float:
    """Error of cos(nt)/(√π n^r) against the 2n-dimensional span that adds sin nt."""
    target = witness(spec, 2 * n)
    return linear_fit(target.evaluate(domain), trig_atoms(2 * n, domain), NormSpec(2, domain)).error


@dataclass(frozen=True)
class GapExample:
    """K = {φ ≠ 0}: one center covers K at every radius, yet c_0(K) = ‖φ‖."""

    cover_size: int
    width_at_zero: float


def single_element_gap(phi: FunctionVector, spec: NormSpec) -> GapExample:
    width = norm(phi, spec)
    if width == 0:
        raise ValueError("The gap example needs a nonzero element")
    return GapExample(1, width)


@dataclass(frozen=True, eq=False)
class ExtremalMass:
    r: int
    cutoff: int
    t: float
    mass: float
    oracle_mass: float
    extremal: FourierFunction
    limit_mass: float = LIMIT_MASS
    stated_mass: float = STATED_MASS
    stated_constraint_value: float = field(default=math.pi)

    @property
    def discrepancy(self) -> float:
        """Stated mass minus the mass the constrained maximization actually attains."""
        return self.stated_mass - self.limit_mass


def _inverse_square_sum(cutoff: int) -> float:
    k = np.arange(cutoff, 0, -1, dtype=float)
    return float(np.sum(1.0 / k ** 2))


def _projected_gradient_mass(cutoff: int, max_iter: int = 1000) -> float:
    """Maximize Σ|a_k| + |b_k| over π Σ k²(a_k² + b_k²) ≤ 1 by projected ascent.

    With u_k = √π k a_k the feasible set is the unit ball and the objective is linear.
    """
    k = np.arange(1, cutoff + 1, dtype=float)
    gradient = np.concatenate([1.0 / (math.sqrt(math.pi) * k)] * 2)
    u = np.zeros_like(gradient)
    step = 1.0 / np.linalg.norm(gradient)
    for _ in range(max_iter):
        moved = u + step * gradient
        u_new = moved / max(1.0, np.linalg.norm(moved))
        if np.linalg.norm(u_new - u) <= 1e-15:
            u = u_new
            break
        u = u_new
    return float(gradient @ u)


def extremal_l1_mass(r: int = 1, cutoff: int | None = None) -> ExtremalMass:
    """Largest Σ|a_k| + |b_k| over the r = 1 seminorm ball, frequencies ≤ cutoff.

    Stationarity gives a_k = b_k = t/k² with t = 1/√(2π Σ 1/k²).
    """
    if r != 1:
        raise UnsupportedError(f"Extremal coefficient mass is derived for r = 1 only, got r = {r}")
    cutoff = settings.extremal_mass_cutoff if cutoff is None else cutoff
    if cutoff < 1:
        raise ValueError(f"Cutoff must be >= 1, got {cutoff}")

    harmonic = _inverse_square_sum(cutoff)
    t = 1.0 / math.sqrt(2 * math.pi * harmonic)
    k = np.arange(1, cutoff + 1, dtype=float)
    coeffs = t / k ** 2
    extremal = FourierFunction(0.0, coeffs, coeffs)
    mass = float(np.sum(2 * coeffs[::-1]))
    oracle = _projected_gradient_mass(cutoff)

    if abs(mass - oracle) > ORACLE_TOL:
        raise InvariantViolation(f"Lagrange mass {mass!r} disagrees with projected-gradient mass {oracle!r}")
    stated_constraint = 2 * math.pi * STATED_COEFFICIENT ** 2 * harmonic
    logger.info(
        f"Extremal l1 mass at M={cutoff}: {mass:.9f} (oracle {oracle:.9f}); "
        f"stated value {STATED_MASS:.6f} needs seminorm² {stated_constraint:.6f}, not 1"
    )
    return ExtremalMass(r, cutoff, t, mass, oracle, extremal, stated_constraint_value=stated_constraint)


def required_scale(spec: SobolevBallSpec, cutoff: int | None = None) -> float:
    """Smallest Λ for which the Λ-scaled atoms can carry every optimal linear approximant."""
    return extremal_l1_mass(1, cutoff).mass + spec.C / (2 * math.pi)


def _extremal_shape(spec: SobolevBallSpec, cutoff: int) -> FourierFunction:
    k = np.arange(1, cutoff + 1, dtype=float)
    shape = FourierFunction(0.0, k ** (-2.0 * spec.r), k ** (-2.0 * spec.r))
    return shape.scaled(1.0 / sobolev_seminorm(shape, spec.r))


def sample_ball(spec: SobolevBallSpec, count: int, seed: int, cutoff: int | None = None) -> list[FourierFunction]:
    """Random ball members with decaying spectra, random seminorm and mean."""
    cutoff = settings.fourier_cutoff if cutoff is None else cutoff
    rng = np.random.default_rng(seed)
    k = np.arange(1, cutoff + 1, dtype=float)
    mean_bound = spec.C / (2 * math.pi)
    members = []
    for _ in range(count):
        decay = k ** -(spec.r + rng.uniform(0.5, 2.0))
        raw = FourierFunction(0.0, rng.normal(size=cutoff) * decay, rng.normal(size=cutoff) * decay)
        shaped = raw.scaled(rng.uniform(0.0, 1.0) / sobolev_seminorm(raw, spec.r))
        members.append(FourierFunction(rng.uniform(-mean_bound, mean_bound), shaped.cos_coeffs, shaped.sin_coeffs))
    return members


def default_targets(spec: SobolevBallSpec, count: int, random_count: int = 4, seed: int = 0,
                    cutoff: int | None = None) -> list[tuple[str, FourierFunction]]:
    """Witness, mean-saturating constant, extremal-plus-mean, and random ball members."""
    cutoff = settings.fourier_cutoff if cutoff is None else cutoff
    mean = spec.C / (2 * math.pi)
    extremal = _extremal_shape(spec, cutoff)
    targets = [
        ("witness", witness(spec, count)),
        ("mean", FourierFunction(mean, [], [])),
        ("extremal", FourierFunction(mean, extremal.cos_coeffs, extremal.sin_coeffs)),
    ]
    targets += [(f"random{i}", f) for i, f in enumerate(sample_ball(spec, random_count, seed, cutoff))]
    return targets


@dataclass(frozen=True)
class WidthComparison:
    n: int
    scale: float
    adequate: bool
    labels: tuple[str, ...]
    convex_errors: tuple[float, ...]
    linear_errors: tuple[float, ...]

    @property
    def convex_error(self) -> float:
        return max(self.convex_errors)

    @property
    def linear_error(self) -> float:
        return max(self.linear_errors)

    @property
    def gaps(self) -> tuple[float, ...]:
        return tuple(c - l for c, l in zip(self.convex_errors, self.linear_errors))


def width_comparison(spec: SobolevBallSpec, n: int, scale: float, domain: GridDomain,
                     targets: list[tuple[str, FourierFunction]] | None = None,
                     seed: int = 0, tol: float | None = None) -> WidthComparison:
    """Convex fit over Λ-scaled trigonometric atoms against the unconstrained projection."""
    if scale <= 0:
        raise ValueError(f"Scale must be positive, got {scale}")
    for_targets = targets if targets is not None else default_targets(spec, n, seed=seed)
    norm_spec = NormSpec(2, domain)
    atoms = trig_atoms(n, domain)
    scaled_atoms = trig_atoms(n, domain, scale=scale)

    convex_errors, linear_errors = [], []
    for label, target in for_targets:
        f = target.evaluate(domain)
        linear = linear_fit(f, atoms, norm_spec).error
        convex = convex_fit(f, scaled_atoms, norm_spec, tol=tol).error
        if convex < linear - COMPARISON_SLACK:
            raise InvariantViolation(f"Convex error {convex!r} below linear error {linear!r} on {label}")
        convex_errors.append(convex)
        linear_errors.append(linear)

    adequate = scale >= required_scale(spec)
    logger.info(
        f"Width comparison n={n}, scale={scale:.4f}: convex {max(convex_errors):.6f}, "
        f"linear {max(linear_errors):.6f}"
    )
    return WidthComparison(n, scale, adequate, tuple(l for l, _ in for_targets),
                           tuple(convex_errors), tuple(linear_errors))
