"""Experiment driver: sweeps, rate fits, construction checks and per-command reports.

Every quantity produced here is an upper estimate measured on a sampled subclass.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from widthlab.config import settings
from widthlab.exceptions import ConfigError, InvariantViolation, UnsupportedError
from widthlab.models import ExperimentConfig
from widthlab.services.convex_approx import (
    convex_fit,
    linear_fit,
    part1_shifted_core,
    part2_collapse,
    width_upper_estimate,
)
from widthlab.services.covering import (
    EXACT_COVER_LIMIT,
    EpsCover,
    GreedyOrder,
    bound_consistency,
    cover_of_size,
    exact_cover_size,
    greedy_cover,
    greedy_order,
    greedy_packing,
    haussler_rate,
    lipschitz_rate,
)
from widthlab.services.function_space import FunctionVector, GridDomain, MeasureKind, NormSpec
from widthlab.services.node_classes import (
    Dictionary,
    NodeFamily,
    NodeKind,
    lipschitz_check,
    sample_dictionary,
)
from widthlab.services.sobolev import (
    ExtremalMass,
    SobolevBallSpec,
    default_targets,
    extremal_l1_mass,
    required_scale,
    staircase_error,
    truncation_width,
    width_comparison,
)

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
PLATEAU_FACTOR = 10.0
RECORD_SLACK = 1e-8
RESIDUAL_TOL = 1e-10
SHIFT_TOL = 1e-12
MASS_TOL = 1e-12
LINEAR_SLACK = 1e-9


@dataclass(frozen=True)
class RateRecord:
    n: int
    epsilon_used: float
    measured_error: float
    bound_error: float
    cover_size: int
    wall_time: float | None = None

    def __post_init__(self):
        if self.measured_error < 0:
            raise ValueError(f"Measured error must be nonnegative, got {self.measured_error}")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    theoretical_exponent: float
    points_used: int
    excluded: tuple[str, ...] = ()

    @property
    def slope_gap(self) -> float:
        return self.slope - self.theoretical_exponent


# Domain and dictionary from a config

def build_domain(config: ExperimentConfig) -> GridDomain:
    family = config.family
    if config.sobolev is not None or (family is not None and family.kind == NodeKind.FOURIER_ATOM.value):
        return GridDomain.torus(config.norm.domain_size or settings.torus_grid_size)
    if family is None:
        raise ConfigError(f"Config {config.name!r} needs a family or sobolev section")
    seed = config.seed if config.norm.domain_seed is None else config.norm.domain_seed
    return GridDomain.monte_carlo(
        family.d, config.norm.domain_size or settings.monte_carlo_size, seed, settings.monte_carlo_half_width
    )


def build_dictionary(config: ExperimentConfig, domain: GridDomain) -> Dictionary:
    family = config.require_family()
    options = config.dictionary
    if options.mode == "grid":
        return sample_dictionary(family, domain, resolution=options.resolution, seed=config.seed, scale=options.scale)
    return sample_dictionary(family, domain, count=options.count, seed=config.seed, scale=options.scale)


def rate_for(family: NodeFamily, n: int, p: float, scale: float, K_const: float | None = None) -> float:
    """The covering bound of the family inverted to error-at-n form."""
    if family.kind is NodeKind.LINEAR_THRESHOLD:
        return scale * haussler_rate(n, family.d + 1, p, K_const)
    if family.kind is NodeKind.SMOOTH_MOTHER:
        return scale * family.lipschitz_constant * lipschitz_rate(n, family.k)
    return math.nan


def theoretical_exponent(family: NodeFamily, p: float) -> float:
    if family.kind is NodeKind.LINEAR_THRESHOLD:
        return -1.0 / (p * family.d)
    if family.kind is NodeKind.SMOOTH_MOTHER:
        return -1.0 / family.k
    return math.nan


def sample_knn_target(dictionary: Dictionary, rng: np.random.Generator,
                      members: int = 32) -> tuple[FunctionVector, np.ndarray, np.ndarray]:
    """Random element of the absolutely convex hull over a few dictionary members.

    Magnitudes are uniform on the simplex, signs are fair coins and the total mass is U[0,1].
    """
    count = min(members, len(dictionary))
    indices = rng.choice(len(dictionary), size=count, replace=False)
    magnitudes = rng.dirichlet(np.ones(count))
    signs = rng.choice([-1.0, 1.0], size=count)
    coefficients = signs * magnitudes * rng.uniform(0.0, 1.0)
    values = coefficients @ dictionary.matrix[indices]
    return FunctionVector(values, dictionary.domain), indices, coefficients


def _target_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def noise_floor(tol: float) -> float:
    """Smallest error the fits resolve: they minimize the squared norm to about tol."""
    return max(PLATEAU_FACTOR * tol, math.sqrt(tol))


# Sweep

@dataclass(frozen=True, eq=False)
class SweepCell:
    n: int
    dictionary: Dictionary
    spec: NormSpec
    ordering: GreedyOrder
    seed: int
    trials: int
    members: int
    tol: float
    max_iter: int
    bound_error: float
    timing: bool = False


def run_cell(cell: SweepCell) -> RateRecord:
    """One sweep point: greedy prefix cover of size ≤ n as the basis, K_nn targets fitted on it."""
    started = time.perf_counter()
    cover = cover_of_size(cell.dictionary, cell.n, cell.spec, cell.ordering)
    basis = [cell.dictionary.members[i] for i in cover.center_indices]

    def sampler(rng):
        return sample_knn_target(cell.dictionary, rng, cell.members)[0]

    fitted = width_upper_estimate(sampler, basis, cell.n, cell.spec, cell.trials, cell.seed,
                                  tol=cell.tol, max_iter=cell.max_iter)
    collapsed, worst_delta = 0.0, 0.0
    for trial in range(cell.trials):
        f, indices, coefficients = sample_knn_target(cell.dictionary, _target_rng(cell.seed, trial), cell.members)
        collapse = part2_collapse(f, cell.dictionary, indices, coefficients, cover, cell.spec)
        collapsed = max(collapsed, collapse.result.error)
        worst_delta = max(worst_delta, collapse.delta)

    measured = min(fitted, collapsed)
    if measured > cover.epsilon + worst_delta + RECORD_SLACK:
        raise InvariantViolation(
            f"n={cell.n}: measured error {measured!r} exceeds cover radius {cover.epsilon!r} + {worst_delta!r}"
        )
    wall = time.perf_counter() - started if cell.timing else None
    logger.info(f"Sweep cell n={cell.n}: eps_used={cover.epsilon:.6g}, error={measured:.6g}")
    return RateRecord(cell.n, cover.epsilon, measured, cell.bound_error, cover.size, wall)


def run_sweep(config: ExperimentConfig, jobs: int | None = None, timing: bool = False) -> list[RateRecord]:
    """One record per n over nested greedy covers; identical for any number of workers."""
    if not config.sweep.n_values:
        raise ConfigError(f"Config {config.name!r} has no n_values to sweep")
    jobs = settings.jobs if jobs is None else jobs
    family = config.require_family()
    domain = build_domain(config)
    spec = NormSpec(config.norm.p, domain)
    dictionary = build_dictionary(config, domain)
    ordering = greedy_order(dictionary, spec, max_centers=max(config.sweep.n_values))
    solver = config.solver

    cells = [
        SweepCell(
            n=n, dictionary=dictionary, spec=spec, ordering=ordering, seed=config.seed,
            trials=solver.trials, members=solver.members_per_target, tol=solver.tol,
            max_iter=solver.max_iter,
            bound_error=rate_for(family, n, spec.p, dictionary.scale, config.bounds.k_const),
            timing=timing,
        )
        for n in config.sweep.n_values
    ]
    logger.info(f"Sweeping {len(cells)} cells over {len(dictionary)} members with {jobs} worker(s)")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_cell, cells))
    else:
        records = [run_cell(cell) for cell in cells]

    records.sort(key=lambda record: record.n)
    floor = noise_floor(solver.tol)
    for previous, current in zip(records, records[1:]):
        if current.measured_error > previous.measured_error + floor:
            raise InvariantViolation(
                f"Error grew from {previous.measured_error!r} at n={previous.n} "
                f"to {current.measured_error!r} at n={current.n} over nested covers"
            )
    return records


# Rate fits

def fit_rate(records, column: str = "measured_error", theoretical: float = math.nan,
             tol: float | None = None) -> RateFit:
    """Least squares on (log n, log value); zero values and the solver plateau are left out."""
    floor = noise_floor(settings.solver_tol if tol is None else tol)
    ns, values, excluded = [], [], []
    for record in records:
        value = getattr(record, column)
        if value is None or not math.isfinite(value) or value <= 0:
            excluded.append(f"n={record.n}: {column} is {value}")
        elif value < floor:
            excluded.append(f"n={record.n}: {column}={value:.3g} sits in the solver plateau")
        else:
            ns.append(record.n)
            values.append(value)
    for note in excluded:
        logger.warning(f"Excluded from rate fit: {note}")
    if len(ns) < MIN_FIT_POINTS:
        raise ValueError(f"Rate fit needs at least {MIN_FIT_POINTS} usable points, got {len(ns)}")

    result = linregress(np.log(ns), np.log(values))
    r_squared = float(np.clip(result.rvalue ** 2, 0.0, 1.0))
    return RateFit(float(result.slope), float(result.intercept), r_squared, theoretical, len(ns), tuple(excluded))


# Construction checks

@dataclass
class Theorem1Report:
    instances: int = 0
    part1_passes: int = 0
    part2_passes: int = 0
    max_reconstruction_residual: float = 0.0
    max_shift_excess: float = -math.inf
    max_mass_deviation: float = 0.0
    max_collapse_excess: float = -math.inf
    max_mass_increase: float = -math.inf
    certificates: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.part1_passes == self.instances and self.part2_passes == self.instances


def _random_combination(rng: np.random.Generator, count: int, case: int) -> np.ndarray:
    magnitudes = rng.dirichlet(np.ones(count))
    if case == 1 and count > 1:
        magnitudes[rng.choice(count, size=count // 2, replace=False)] = 0.0
    mass = 1.0 if case == 0 else rng.uniform(0.0, 1.0)
    return rng.choice([-1.0, 1.0], size=count) * magnitudes * mass


def _random_domain(rng: np.random.Generator, dimension: int) -> GridDomain:
    weights = rng.uniform(0.5, 1.5, size=dimension)
    return GridDomain.from_points(np.arange(dimension, dtype=float), weights, MeasureKind.LEBESGUE)


def verify_theorem1(config: ExperimentConfig) -> Theorem1Report:
    """Run both cover constructions on random instances and aggregate the checks."""
    options = config.verify
    report = Theorem1Report()

    for instance in range(options.instances):
        rng = _target_rng(config.seed, instance)
        # mass exactly one, some zero coefficients, or generic
        case = instance % 10
        dimension = int(rng.integers(1, options.max_dimension + 1))
        domain = _random_domain(rng, dimension)
        spec = NormSpec(config.norm.p, domain)
        report.instances += 1

        n = int(rng.integers(1, options.max_atoms + 1))
        basis = [FunctionVector(row, domain) for row in rng.normal(size=(n, dimension))]
        target = FunctionVector(rng.normal(size=dimension), domain)
        core = part1_shifted_core(target, basis, _random_combination(rng, n, case), spec)
        shift_excess = core.max_shift - core.alpha
        mass_deviation = abs(float(np.abs(core.coefficients).sum()) - 1.0)
        report.max_reconstruction_residual = max(report.max_reconstruction_residual, core.reconstruction_residual)
        report.max_shift_excess = max(report.max_shift_excess, shift_excess)
        report.max_mass_deviation = max(report.max_mass_deviation, mass_deviation)
        if core.reconstruction_residual <= RESIDUAL_TOL and shift_excess <= SHIFT_TOL and mass_deviation <= MASS_TOL:
            report.part1_passes += 1
            # K is the single target f, covered by the n + 1 shifted atoms
            report.certificates.append({
                "instance": instance,
                "n": n,
                "epsilon": core.alpha,
                "statement": f"N_co({core.alpha:.6g}, {{f}}) <= {n + 1}",
                "conditional": True,
            })

        size = int(rng.integers(2, options.max_atoms + 1))
        members = rng.normal(size=(size, dimension))
        if case == 2:
            # repeated atoms
            members[size // 2:] = members[: size - size // 2]
        dictionary = Dictionary.from_members([FunctionVector(row, domain) for row in members])
        first = cover_of_size(dictionary, 1, spec)
        epsilon = max(first.epsilon * rng.uniform(0.2, 1.0), 1e-6)
        cover = greedy_cover(dictionary, epsilon, spec)
        picks = rng.integers(0, size, size=int(rng.integers(1, 2 * size + 1)))
        coefficients = _random_combination(rng, len(picks), case)
        noise = rng.normal(size=dimension) * rng.uniform(0.0, 0.1)
        f = FunctionVector(coefficients @ members[picks] + noise, domain)
        collapse = part2_collapse(f, dictionary, picks, coefficients, cover, spec, strict=False)
        mass_increase = collapse.result.combination.l1_mass - float(np.abs(coefficients).sum())
        report.max_collapse_excess = max(report.max_collapse_excess, collapse.excess)
        report.max_mass_increase = max(report.max_mass_increase, mass_increase)
        if collapse.excess <= RESIDUAL_TOL and mass_increase <= MASS_TOL:
            report.part2_passes += 1
        else:
            logger.error(f"Instance {instance}: collapse excess {collapse.excess!r}, mass increase {mass_increase!r}")

    logger.info(
        f"Verified {report.instances} instances: part 1 {report.part1_passes}, part 2 {report.part2_passes}"
    )
    return report


# Per-command reports

@dataclass(frozen=True)
class CoverRow:
    epsilon: float
    cover_size: int
    certified: bool
    max_residual: float
    packing_size: int
    packing_2eps_size: int
    sandwich_holds: bool
    bound_value: float | None = None
    satisfied: bool | None = None
    scaled_bound_value: float | None = None
    lattice_size: int | None = None
    exact_size: int | None = None
    label: str = "empirical, on the sampled subclass"


@dataclass(frozen=True)
class CoverReport:
    family: str
    dictionary_size: int
    rows: tuple[CoverRow, ...]
    lipschitz_ratio: float | None = None


def cover_report(config: ExperimentConfig) -> CoverReport:
    """Greedy cover, packing sandwich and covering bound at every configured ε."""
    if not config.sweep.epsilons:
        raise ConfigError(f"Config {config.name!r} has no epsilons for a cover report")
    family = config.require_family()
    domain = build_domain(config)
    spec = NormSpec(config.norm.p, domain)
    dictionary = build_dictionary(config, domain)

    rows = []
    for epsilon in config.sweep.epsilons:
        cover = greedy_cover(dictionary, epsilon, spec)
        packing = greedy_packing(dictionary, epsilon, spec)
        wide = greedy_packing(dictionary, 2 * epsilon, spec)
        # a 2ε-separated set needs distinct centers in any ε-cover
        exact = exact_cover_size(dictionary, epsilon, spec) if len(dictionary) <= EXACT_COVER_LIMIT else None
        smallest = cover.size if exact is None else exact
        sandwich = wide.size <= smallest <= cover.size <= packing.size
        if not (sandwich and cover.certified):
            raise InvariantViolation(
                f"At epsilon={epsilon}: packing(2eps)={wide.size}, exact cover={exact}, cover={cover.size}, "
                f"packing(eps)={packing.size}, certified={cover.certified}"
            )
        bound = {}
        try:
            checked = bound_consistency(dictionary, epsilon, spec, family, config.bounds.k_const, cover)
            bound = dict(bound_value=checked.bound_value, satisfied=checked.satisfied,
                         scaled_bound_value=checked.scaled_bound_value, lattice_size=checked.lattice_size)
        except UnsupportedError as e:
            logger.info(f"No bound at epsilon={epsilon}: {e}")
        rows.append(CoverRow(epsilon, cover.size, cover.certified, cover.max_residual,
                             packing.size, wide.size, sandwich, exact_size=exact, **bound))

    ratio = None
    if family.kind is NodeKind.SMOOTH_MOTHER and len(dictionary) > 1:
        ratio = lipschitz_check(dictionary, spec, seed=config.seed)
    return CoverReport(family.kind.value, len(dictionary), tuple(rows), ratio)


@dataclass(frozen=True)
class ApproxRow:
    n: int
    epsilon_used: float
    target: int
    convex_error: float
    linear_error: float
    collapse_error: float
    delta: float
    l1_mass: float
    iterations: int
    converged: bool


def approx_report(config: ExperimentConfig) -> list[ApproxRow]:
    """Convex fit, linear fit and the collapse on K_nn targets over each greedy-cover basis."""
    if not config.sweep.n_values:
        raise ConfigError(f"Config {config.name!r} has no n_values for an approximation report")
    domain = build_domain(config)
    spec = NormSpec(config.norm.p, domain)
    dictionary = build_dictionary(config, domain)
    ordering = greedy_order(dictionary, spec, max_centers=max(config.sweep.n_values))
    solver = config.solver

    rows = []
    for n in config.sweep.n_values:
        cover: EpsCover = cover_of_size(dictionary, n, spec, ordering)
        basis = [dictionary.members[i] for i in cover.center_indices]
        for trial in range(solver.trials):
            f, indices, coefficients = sample_knn_target(
                dictionary, _target_rng(config.seed, trial), solver.members_per_target
            )
            fit = convex_fit(f, basis, spec, n_budget=n, tol=solver.tol, max_iter=solver.max_iter)
            linear = linear_fit(f, basis, spec).error if spec.p == 2 else math.nan
            if linear > fit.error + LINEAR_SLACK:
                raise InvariantViolation(f"Linear error {linear!r} above convex error {fit.error!r} at n={n}")
            collapse = part2_collapse(f, dictionary, indices, coefficients, cover, spec)
            rows.append(ApproxRow(n, cover.epsilon, trial, fit.error, linear, collapse.result.error,
                                  collapse.delta, fit.combination.l1_mass, fit.iterations, fit.converged))
    return rows


@dataclass(frozen=True)
class SobolevRow:
    n: int
    r: int
    dimension: int
    analytic: float
    coefficient_error: float
    quadrature_error: float
    linear_error: float
    convex_error: float
    halved_gap: float
    staircase_error: float
    scale: float


@dataclass(frozen=True, eq=False)
class SobolevTable:
    rows: tuple[SobolevRow, ...]
    extremal: ExtremalMass
    fit: RateFit | None = None


def sobolev_table(spec: SobolevBallSpec, n_values, domain: GridDomain, tol: float | None = None,
                  seed: int = 0, random_targets: int = 4) -> SobolevTable:
    """Exact widths n^-r against measured linear and convex errors over trigonometric atoms."""
    extremal = extremal_l1_mass(1)
    scale = required_scale(spec)
    rows = []
    for n in n_values:
        truncation = truncation_width(spec, n, domain)
        targets = default_targets(spec, truncation.dimension, random_targets, seed)
        adequate = width_comparison(spec, truncation.dimension, scale, domain, targets, seed, tol)
        halved = width_comparison(spec, truncation.dimension, scale / 2, domain, targets, seed, tol)
        rows.append(SobolevRow(
            n=n, r=spec.r, dimension=truncation.dimension, analytic=truncation.error,
            coefficient_error=truncation.coefficient_error, quadrature_error=truncation.quadrature_error,
            linear_error=adequate.linear_error, convex_error=adequate.convex_error,
            halved_gap=max(halved.gaps), staircase_error=staircase_error(spec, n, domain), scale=scale,
        ))

    fit = None
    if len(rows) >= MIN_FIT_POINTS:
        fit = fit_rate(rows, column="linear_error", theoretical=-float(spec.r), tol=tol)
    return SobolevTable(tuple(rows), extremal, fit)
