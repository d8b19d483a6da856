import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize

from widthlab.config import settings
from widthlab.exceptions import DomainMismatchError, EmptySetError, InvariantViolation, UnsupportedError
from widthlab.services.covering import EpsCover
from widthlab.services.function_space import (
    FunctionVector,
    NormSpec,
    pairwise_distances,
    stack,
    weighted_norm,
)
from widthlab.services.node_classes import Dictionary

logger = logging.getLogger(__name__)

L1_TOL = 1e-12
IDENTITY_TOL = 1e-10
REFIT_MAX_ITER = 5000


@dataclass(frozen=True, eq=False)
class Combination:
    indices: tuple[int, ...]
    coefficients: np.ndarray
    l1_mass: float = field(init=False)

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float)
        coefficients.setflags(write=False)
        if len(coefficients) != len(self.indices):
            raise DomainMismatchError(f"{len(self.indices)} indices for {len(coefficients)} coefficients")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("Combination indices must be distinct")
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "l1_mass", float(np.abs(coefficients).sum()))


@dataclass(frozen=True, eq=False)
class ConvexCombination(Combination):
    """Signed coefficients with Σ|λ_i| ≤ 1 (the absolutely convex hull)."""

    def __post_init__(self):
        super().__post_init__()
        if self.l1_mass > 1 + L1_TOL:
            raise ValueError(f"Coefficient l1 mass {self.l1_mass!r} exceeds 1")


@dataclass(frozen=True, eq=False)
class ApproxResult:
    combination: Combination
    error: float
    iterations: int
    converged: bool


def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x: Σ|x_i| ≤ radius} by sort-and-threshold."""
    v = np.asarray(v, dtype=float)
    magnitude = np.abs(v)
    if magnitude.sum() <= radius:
        return v.copy()
    u = np.sort(magnitude)[::-1]
    cssv = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(u) + 1) > cssv - radius)[0][-1]
    theta = (cssv[rho] - radius) / (rho + 1.0)
    projected = np.sign(v) * np.maximum(magnitude - theta, 0.0)
    mass = np.abs(projected).sum()
    if mass > radius:
        projected *= radius / mass
    return projected


def _basis_matrix(f: FunctionVector, basis: Sequence[FunctionVector], spec: NormSpec) -> np.ndarray:
    if len(basis) == 0:
        raise EmptySetError("Approximation needs a nonempty basis")
    if not f.domain.same_as(spec.domain):
        raise DomainMismatchError("Target lives on a different domain than the norm")
    return stack(basis, spec)


def _refit_l1(gram: np.ndarray, c: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Minimize ½λᵀGλ − cᵀλ over the unit ℓ1 ball."""
    unconstrained = np.linalg.lstsq(gram, c, rcond=None)[0]
    if np.abs(unconstrained).sum() <= 1.0:
        return unconstrained

    lipschitz = float(np.linalg.eigvalsh(gram)[-1])
    x = project_l1_ball(start)
    if lipschitz <= 0:
        return x
    y, t = x.copy(), 1.0
    for _ in range(REFIT_MAX_ITER):
        grad = gram @ y - c
        x_new = project_l1_ball(y - grad / lipschitz)
        if np.dot(grad, x_new - x) > 0:
            # momentum pushed uphill; restart from the last iterate
            y, t = x.copy(), 1.0
            continue
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        step = np.linalg.norm(x_new - x)
        x, t = x_new, t_new
        if step <= 1e-14 * (1.0 + np.linalg.norm(x)):
            break
    return x


def _fit_l2(f, phi, weights, n_budget, tol, max_iter):
    weighted = phi * weights
    gram = weighted @ phi.T
    c = weighted @ f
    lam = np.zeros(len(phi))
    active: list[int] = []
    error = float(weighted_norm(f, weights, 2))
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        scores = np.abs(weighted @ (f - lam @ phi))
        candidates = np.array(active) if len(active) >= n_budget else np.arange(len(phi))
        j = int(candidates[np.argmax(scores[candidates])])
        if j not in active:
            active.append(j)

        idx = np.array(active)
        trial = np.zeros_like(lam)
        trial[idx] = _refit_l1(gram[np.ix_(idx, idx)], c[idx], lam[idx])
        trial_error = float(weighted_norm(f - trial @ phi, weights, 2))

        improvement = 0.0
        if trial_error <= error:
            improvement = error - trial_error
            lam, error = trial, trial_error
        if improvement < tol:
            converged = True
            break
    return lam, active, error, iterations, converged


def _refit_lp(f, phi, weights, p, start):
    """Best coefficients over the unit ℓ1 ball for the rows of phi, in the weighted p-norm.

    p = 1 is the linear program over (u, v, t) with λ = u − v and t ≥ |r|;
    other p minimize Σ w|r|^p with SLSQP on the same split.
    """
    a = len(phi)
    if p == 1:
        n = len(f)
        identity = sparse.identity(n, format="csr")
        block = sparse.csr_matrix(phi.T)
        ones = sparse.csr_matrix(np.ones((1, a)))
        A_ub = sparse.bmat([
            [block, -block, -identity],
            [-block, block, -identity],
            [ones, ones, None],
        ], format="csr")
        b_ub = np.concatenate([f, -f, [1.0]])
        c = np.concatenate([np.zeros(2 * a), weights])
        result = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs")
        if not result.success:
            logger.warning(f"l1 refit did not solve: {result.message}")
            return start
        return project_l1_ball(result.x[:a] - result.x[a:2 * a])

    def objective(x):
        residual = f - (x[:a] - x[a:]) @ phi
        return float(weights @ np.abs(residual) ** p)

    def gradient(x):
        residual = f - (x[:a] - x[a:]) @ phi
        g = -p * (phi @ (weights * np.abs(residual) ** (p - 1) * np.sign(residual)))
        return np.concatenate([g, -g])

    x0 = np.concatenate([np.maximum(start, 0.0), np.maximum(-start, 0.0)])
    result = minimize(
        objective, x0, jac=gradient, method="SLSQP",
        bounds=[(0.0, None)] * (2 * a),
        constraints=[{"type": "ineq", "fun": lambda x: 1.0 - x.sum(), "jac": lambda x: -np.ones_like(x)}],
        options={"ftol": 1e-15, "maxiter": REFIT_MAX_ITER},
    )
    lam = project_l1_ball(result.x[:a] - result.x[a:])
    if objective(np.concatenate([np.maximum(lam, 0), np.maximum(-lam, 0)])) > objective(x0):
        return start
    return lam


def _fit_lp(f, phi, weights, p, n_budget, tol, max_iter):
    if n_budget >= len(phi):
        # no budget to respect: one refit over every atom is the optimum
        lam = _refit_lp(f, phi, weights, p, np.zeros(len(phi)))
        active = [int(i) for i in np.flatnonzero(lam)] or [0]
        return lam, active, float(weighted_norm(f - lam @ phi, weights, p)), 1, True

    lam = np.zeros(len(phi))
    active: list[int] = []
    error = float(weighted_norm(f, weights, p))
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        if len(active) >= n_budget:
            converged = True
            break
        residual = f - lam @ phi
        alignment = np.abs(phi @ (weights * np.abs(residual) ** (p - 1) * np.sign(residual)))
        alignment[active] = -np.inf
        j = int(np.argmax(alignment))

        idx = np.array(active + [j])
        trial = np.zeros_like(lam)
        trial[idx] = _refit_lp(f, phi[idx], weights, p, lam[idx])
        trial_error = float(weighted_norm(f - trial @ phi, weights, p))
        if error - trial_error < tol:
            converged = True
            break
        active.append(j)
        lam, error = trial, trial_error
    return lam, active, error, iterations, converged


def convex_fit(f: FunctionVector, basis: Sequence[FunctionVector], spec: NormSpec,
               n_budget: int | None = None, tol: float | None = None,
               max_iter: int | None = None) -> ApproxResult:
    """Greedy active-set fit of f over the symmetric hull of at most n_budget basis atoms.

    Each added atom triggers an exact refit over the active set; with no binding budget
    and p != 2 the refit runs once over every atom.
    """
    tol = settings.solver_tol if tol is None else tol
    max_iter = settings.solver_max_iter if max_iter is None else max_iter
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    phi = _basis_matrix(f, basis, spec)
    n_budget = len(phi) if n_budget is None else max(1, min(n_budget, len(phi)))
    weights = spec.domain.weights

    if spec.p == 2:
        lam, active, _, iterations, converged = _fit_l2(f.values, phi, weights, n_budget, tol, max_iter)
    else:
        lam, active, _, iterations, converged = _fit_lp(f.values, phi, weights, spec.p, n_budget, tol, max_iter)

    active = sorted(active)
    combination = ConvexCombination(tuple(active), lam[active])
    error = float(weighted_norm(f.values - combination.coefficients @ phi[active], weights, spec.p))
    return ApproxResult(combination, error, iterations, converged)


def linear_fit(f: FunctionVector, basis: Sequence[FunctionVector], spec: NormSpec) -> ApproxResult:
    """Weighted least squares over span(basis)."""
    if spec.p != 2:
        raise UnsupportedError(f"Linear fit is implemented for p = 2 only, got p = {spec.p}")
    phi = _basis_matrix(f, basis, spec)
    root = np.sqrt(spec.domain.weights)
    coefficients = np.linalg.lstsq((phi * root).T, f.values * root, rcond=None)[0]
    error = float(weighted_norm(f.values - coefficients @ phi, spec.domain.weights, 2))
    return ApproxResult(Combination(tuple(range(len(phi))), coefficients), error, 1, True)


@dataclass(frozen=True, eq=False)
class ShiftedCore:
    core: tuple[FunctionVector, ...]
    coefficients: np.ndarray
    alpha: float
    reconstruction_residual: float
    max_shift: float


def part1_shifted_core(f: FunctionVector, basis: Sequence[FunctionVector], coefficients,
                       spec: NormSpec) -> ShiftedCore:
    """Absorb the residual of Σλφ into shifted atoms so that f is reproduced exactly."""
    lam = np.asarray(coefficients, dtype=float)
    phi = _basis_matrix(f, basis, spec)
    if len(lam) != len(phi):
        raise DomainMismatchError(f"{len(phi)} atoms but {len(lam)} coefficients")
    mass = float(np.abs(lam).sum())
    if mass > 1 + L1_TOL:
        raise ValueError(f"Coefficient l1 mass {mass!r} exceeds 1")

    residual = f.values - lam @ phi
    alpha = float(weighted_norm(residual, spec.domain.weights, spec.p))
    full = np.concatenate([[max(0.0, 1.0 - mass)], lam])
    atoms = np.vstack([np.zeros(f.domain.size), phi])
    # np.sign(0) == 0, so zero coefficients leave their atom in place
    shifted = atoms + np.sign(full)[:, None] * residual

    reconstruction = float(weighted_norm(f.values - full @ shifted, spec.domain.weights, spec.p))
    max_shift = float(weighted_norm(shifted - atoms, spec.domain.weights, spec.p).max())
    core = tuple(FunctionVector(row, f.domain) for row in shifted)
    return ShiftedCore(core, full, alpha, reconstruction, max_shift)


@dataclass(frozen=True, eq=False)
class CollapseResult:
    result: ApproxResult
    delta: float
    epsilon: float
    approximant: FunctionVector

    @property
    def excess(self) -> float:
        """How far the error sits above δ + ε; nonpositive when the chain holds."""
        return self.result.error - (self.delta + self.epsilon)


def part2_collapse(f: FunctionVector, dictionary: Dictionary, member_indices, coefficients,
                   cover: EpsCover, spec: NormSpec, strict: bool = True) -> CollapseResult:
    """Replace every member by its nearest cover center and pool the coefficients per center.

    With strict=False an error above δ + ε is returned in `excess` instead of raised.
    """
    if not cover.certified:
        raise ValueError("Collapse needs a certified cover")
    lam = np.asarray(coefficients, dtype=float)
    member_indices = np.asarray(member_indices, dtype=int)
    if len(lam) != len(member_indices):
        raise DomainMismatchError(f"{len(member_indices)} members but {len(lam)} coefficients")
    mass = float(np.abs(lam).sum())
    if mass > 1 + L1_TOL:
        raise ValueError(f"Coefficient l1 mass {mass!r} exceeds 1")
    if not f.domain.same_as(spec.domain) or not dictionary.domain.same_as(spec.domain):
        raise DomainMismatchError("Target, dictionary and norm must share one domain")

    weights = spec.domain.weights
    members = dictionary.matrix[member_indices]
    centers = dictionary.matrix[list(cover.center_indices)]
    delta = float(weighted_norm(f.values - lam @ members, weights, spec.p))

    nearest = np.argmin(pairwise_distances(members, centers, spec), axis=1)
    pooled = np.zeros(len(centers))
    np.add.at(pooled, nearest, lam)

    approximant = pooled @ centers
    error = float(weighted_norm(f.values - approximant, weights, spec.p))
    used = np.flatnonzero(pooled)
    combination = ConvexCombination(tuple(cover.center_indices[i] for i in used), pooled[used])
    collapse = CollapseResult(
        ApproxResult(combination, error, 1, True), delta, cover.epsilon,
        FunctionVector(approximant, f.domain),
    )
    if strict and collapse.excess > IDENTITY_TOL:
        raise InvariantViolation(
            f"Collapse error {error!r} exceeds delta + epsilon = {delta + cover.epsilon!r}"
        )
    return collapse


def width_upper_estimate(class_sampler: Callable[[np.random.Generator], FunctionVector],
                         basis: Sequence[FunctionVector], n: int, spec: NormSpec,
                         trials: int, seed: int, tol: float | None = None,
                         max_iter: int | None = None) -> float:
    """Max over sampled f ∈ K of the best error from at most n atoms of the fixed basis."""
    if trials < 1:
        raise ValueError(f"Need at least one trial, got {trials}")
    worst = 0.0
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        result = convex_fit(class_sampler(rng), basis, spec, n_budget=n, tol=tol, max_iter=max_iter)
        worst = max(worst, result.error)
    return worst
