import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from widthlab.exceptions import EmptySetError, InvariantViolation, UnsupportedError
from widthlab.services.convex_approx import (
    ConvexCombination,
    convex_fit,
    linear_fit,
    part1_shifted_core,
    part2_collapse,
    project_l1_ball,
    width_upper_estimate,
)
from widthlab.services.covering import EpsCover, cover_from_centers, greedy_cover
from widthlab.services.function_space import FunctionVector, GridDomain, MeasureKind, NormSpec
from widthlab.services.node_classes import Dictionary
from widthlab.services.sobolev import trig_atoms

small = st.integers(-4000, 4000).map(lambda i: i / 1000)


def test_target_in_basis(half_domain, vec):
    basis = [vec([1, 0], half_domain), vec([0, 1], half_domain)]
    result = convex_fit(basis[0], basis, NormSpec(2, half_domain))
    assert result.error == pytest.approx(0, abs=1e-12)
    assert result.combination.indices == (0,)
    assert result.combination.coefficients[0] == pytest.approx(1.0)


def test_projection_onto_the_simplex(half_domain, vec):
    basis = [vec([1, 0], half_domain), vec([0, 1], half_domain)]
    result = convex_fit(vec([0.6, 0.8], half_domain), basis, NormSpec(2, half_domain))
    assert result.combination.indices == (0, 1)
    np.testing.assert_allclose(result.combination.coefficients, [0.4, 0.6], atol=1e-8)
    assert result.error == pytest.approx(0.2, abs=1e-8)
    assert result.combination.l1_mass <= 1 + 1e-12


def test_negated_atom(half_domain, vec):
    basis = [vec([1, 2], half_domain), vec([0, 1], half_domain)]
    result = convex_fit(-basis[0], basis, NormSpec(2, half_domain))
    assert result.error == pytest.approx(0, abs=1e-12)
    assert result.combination.coefficients[0] == pytest.approx(-1.0)


def test_budget_limits_atoms(torus):
    atoms = trig_atoms(5, torus)
    f = FunctionVector(0.2 * atoms[1].values + 0.2 * atoms[2].values + 0.2 * atoms[3].values, torus)
    result = convex_fit(f, atoms, NormSpec(2, torus), n_budget=2)
    assert len(result.combination.indices) <= 2
    assert result.error > 0.1


def test_lp_fit_respects_the_ball(half_domain, vec):
    basis = [vec([1, 0], half_domain), vec([0, 1], half_domain)]
    result = convex_fit(vec([0.3, -0.2], half_domain), basis, NormSpec(1, half_domain))
    assert result.combination.l1_mass <= 1 + 1e-12
    assert result.error == pytest.approx(0, abs=1e-6)
    np.testing.assert_allclose(result.combination.coefficients, [0.3, -0.2], atol=1e-6)


def test_lp_fit_with_one_atom(half_domain, vec):
    basis = [vec([1, 0], half_domain), vec([0, 1], half_domain)]
    result = convex_fit(vec([0.3, -0.2], half_domain), basis, NormSpec(1, half_domain), n_budget=1)
    assert result.combination.indices == (0,)
    assert result.error == pytest.approx(0.1, abs=1e-6)


def test_empty_basis(half_domain, vec):
    with pytest.raises(EmptySetError):
        convex_fit(vec([1, 0], half_domain), [], NormSpec(2, half_domain))


def test_convex_combination_mass_checked():
    with pytest.raises(ValueError):
        ConvexCombination((0, 1), np.array([0.7, -0.4]))


def test_linear_fit_in_span(half_domain, vec):
    basis = [vec([1, 1], half_domain), vec([1, -1], half_domain)]
    assert linear_fit(vec([3, 7], half_domain), basis, NormSpec(2, half_domain)).error == pytest.approx(0, abs=1e-12)


def test_linear_fit_orthogonality(torus):
    t = torus.points[:, 0]
    error = linear_fit(FunctionVector(np.sin(2 * t), torus), trig_atoms(3, torus), NormSpec(2, torus)).error
    assert error == pytest.approx(math.sqrt(math.pi), abs=1e-9)


def test_linear_fit_needs_p2(half_domain, vec):
    with pytest.raises(UnsupportedError):
        linear_fit(vec([1, 0], half_domain), [vec([1, 1], half_domain)], NormSpec(1, half_domain))


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 4), elements=small), arrays(float, 4, elements=small))
def test_linear_never_worse_than_convex(rows, f):
    domain = GridDomain.from_points(np.arange(4.0))
    spec = NormSpec(2, domain)
    basis = [FunctionVector(row, domain) for row in rows]
    target = FunctionVector(f, domain)
    assert linear_fit(target, basis, spec).error <= convex_fit(target, basis, spec).error + 1e-9


def test_shifted_core_absorbs_residual(pair_domain, vec):
    core = part1_shifted_core(vec([1, 0], pair_domain), [vec([0.5, 0], pair_domain)], [1.0], NormSpec(2, pair_domain))
    assert core.coefficients[0] == 0.0
    np.testing.assert_allclose(core.core[1].values, [1, 0])
    assert core.alpha == pytest.approx(0.5)
    assert core.reconstruction_residual <= 1e-12


def test_shifted_core_with_free_mass(pair_domain, vec):
    core = part1_shifted_core(vec([1, 0], pair_domain), [vec([0, 1], pair_domain)], [0.5], NormSpec(2, pair_domain))
    np.testing.assert_allclose(core.coefficients, [0.5, 0.5])
    np.testing.assert_allclose(core.core[0].values, [1, -0.5])
    np.testing.assert_allclose(core.core[1].values, [1, 0.5])
    assert core.alpha == pytest.approx(math.sqrt(1.25))
    assert core.reconstruction_residual <= 1e-12


def test_shifted_core_fixed_point(half_domain, vec):
    basis = [vec([1, 2], half_domain), vec([-1, 0.5], half_domain)]
    f = FunctionVector(0.3 * basis[0].values - 0.2 * basis[1].values, half_domain)
    core = part1_shifted_core(f, basis, [0.3, -0.2], NormSpec(2, half_domain))
    assert core.alpha == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(core.core[1].values, basis[0].values)


def test_shifted_core_rejects_heavy_coefficients(half_domain, vec):
    with pytest.raises(ValueError):
        part1_shifted_core(vec([1, 0], half_domain), [vec([0, 1], half_domain)] * 2, [0.8, 0.8],
                           NormSpec(2, half_domain))


@pytest.mark.parametrize("seed", range(5))
def test_shifted_core_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        m, n = rng.integers(1, 65), rng.integers(1, 17)
        domain = GridDomain.from_points(np.arange(float(m)), rng.uniform(0.5, 1.5, m), MeasureKind.LEBESGUE)
        spec = NormSpec(rng.choice([1.0, 2.0, 3.0]), domain)
        basis = [FunctionVector(row, domain) for row in rng.normal(size=(n, m))]
        lam = rng.choice([-1, 1], n) * rng.dirichlet(np.ones(n)) * rng.uniform()
        core = part1_shifted_core(FunctionVector(rng.normal(size=m), domain), basis, lam, spec)
        assert core.reconstruction_residual <= 1e-10
        assert core.max_shift <= core.alpha + 1e-12
        assert abs(np.abs(core.coefficients).sum() - 1) <= 1e-12


def test_collapse_hand_example(pair_domain, vec):
    members = [vec([0.1, 0], pair_domain), vec([0.9, 1.0], pair_domain), vec([0, 0], pair_domain), vec([1, 1], pair_domain)]
    dictionary = Dictionary.from_members(members)
    spec = NormSpec(2, pair_domain)
    cover = cover_from_centers(dictionary, [2, 3], 0.15, spec)
    collapse = part2_collapse(vec([0.5, 0.5], pair_domain), dictionary, [0, 1], [0.5, 0.5], cover, spec)
    np.testing.assert_allclose(collapse.result.combination.coefficients, [0.5, 0.5])
    np.testing.assert_allclose(collapse.approximant.values, [0.5, 0.5])
    assert collapse.result.error == pytest.approx(0, abs=1e-12)
    assert collapse.excess <= 0


def test_collapse_onto_one_center(pair_domain, vec):
    members = [vec([1, 1], pair_domain), vec([3, 3], pair_domain)]
    dictionary = Dictionary.from_members(members)
    spec = NormSpec(2, pair_domain)
    cover = cover_from_centers(dictionary, [0, 1], 0.5, spec)
    f = vec([0.2, 0.4], pair_domain)
    collapse = part2_collapse(f, dictionary, [0, 0, 0], [0.2, 0.3, -0.1], cover, spec)
    assert collapse.result.combination.indices == (0,)
    np.testing.assert_allclose(collapse.result.combination.coefficients, [0.4])
    assert collapse.result.error == pytest.approx(collapse.delta)


def test_collapse_reports_excess_when_not_strict(pair_domain, vec):
    dictionary = Dictionary.from_members([vec([0, 0], pair_domain), vec([3, 4], pair_domain)])
    spec = NormSpec(2, pair_domain)
    # certified by hand at a radius it does not have
    cover = EpsCover(0.1, (0,), True, 0.1)
    f = vec([3, 4], pair_domain)
    with pytest.raises(InvariantViolation):
        part2_collapse(f, dictionary, [1], [1.0], cover, spec)
    collapse = part2_collapse(f, dictionary, [1], [1.0], cover, spec, strict=False)
    assert collapse.excess == pytest.approx(5.0 - 0.1)
    assert collapse.result.combination.indices == (0,)


def test_collapse_needs_certified_cover(pair_domain, vec):
    dictionary = Dictionary.from_members([vec([0, 0], pair_domain), vec([1, 1], pair_domain)])
    spec = NormSpec(2, pair_domain)
    cover = cover_from_centers(dictionary, [0], 0.5, spec)
    with pytest.raises(ValueError):
        part2_collapse(vec([0, 0], pair_domain), dictionary, [1], [1.0], cover, spec)


def _collapse_trials(seed: int, trials: int):
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        m, size = rng.integers(1, 9), rng.integers(2, 25)
        domain = GridDomain.from_points(np.arange(float(m)))
        spec = NormSpec(rng.choice([1.0, 2.0]), domain)
        rows = rng.normal(size=(size, m))
        dictionary = Dictionary.from_members([FunctionVector(row, domain) for row in rows])
        cover = greedy_cover(dictionary, rng.uniform(0.1, 2.0), spec)
        picks = rng.integers(0, size, rng.integers(1, 30))
        lam = rng.choice([-1, 1], len(picks)) * rng.dirichlet(np.ones(len(picks))) * rng.uniform()
        f = FunctionVector(lam @ rows[picks] + 0.05 * rng.normal(size=m), domain)
        collapse = part2_collapse(f, dictionary, picks, lam, cover, spec)
        assert collapse.result.error <= collapse.delta + cover.epsilon + 1e-10
        assert collapse.result.combination.l1_mass <= np.abs(lam).sum() + 1e-12


def test_collapse_on_random_instances():
    _collapse_trials(0, 200)


@pytest.mark.slow
def test_collapse_on_many_random_instances():
    _collapse_trials(1, 1000)


def test_width_of_a_segment(pair_domain, vec):
    basis = [vec([1, 0], pair_domain)]

    def segment(rng):
        return vec([rng.uniform(-1, 1), 0], pair_domain)

    assert width_upper_estimate(segment, basis, 1, NormSpec(2, pair_domain), trials=20, seed=0) == pytest.approx(0, abs=1e-12)


def test_width_of_the_circle(pair_domain, vec):
    basis = [vec(v, pair_domain) for v in ([1, 0], [0, 1], [-1, 0], [0, -1])]

    def circle(rng):
        angle = rng.uniform(0, 2 * math.pi)
        return vec([math.cos(angle), math.sin(angle)], pair_domain)

    width = width_upper_estimate(circle, basis, 4, NormSpec(2, pair_domain), trials=400, seed=0)
    assert width == pytest.approx(1 - math.sqrt(2) / 2, abs=2e-3)


def test_larger_basis_never_hurts(half_domain, vec):
    rng = np.random.default_rng(3)
    atoms = [vec(row, half_domain) for row in rng.normal(size=(6, 2))]

    def sampler(rng):
        return vec(rng.normal(size=2), half_domain)

    spec = NormSpec(2, half_domain)
    small_width = width_upper_estimate(sampler, atoms[:3], 3, spec, trials=30, seed=1)
    large_width = width_upper_estimate(sampler, atoms, 6, spec, trials=30, seed=1)
    assert large_width <= small_width + 1e-9


@settings(max_examples=60, deadline=None)
@given(arrays(float, 6, elements=small), st.floats(0.1, 3.0))
def test_projection_onto_l1_ball(v, radius):
    projected = project_l1_ball(v, radius)
    assert np.abs(projected).sum() <= radius + 1e-12
    if np.abs(v).sum() <= radius:
        np.testing.assert_array_equal(projected, v)
    # no feasible point on the segment towards a random feasible point is closer
    other = project_l1_ball(np.random.default_rng(0).normal(size=6), radius)
    for t in np.linspace(0, 1, 11):
        candidate = projected + t * (other - projected)
        assert np.linalg.norm(v - projected) <= np.linalg.norm(v - candidate) + 1e-9


def _grid_oracle(f, phi, weights, step=1e-3):
    """Dense search over λ1, λ2 on the ℓ1 ball with λ3 solved exactly and clipped."""
    axis = np.arange(-1.0, 1.0 + step / 2, step)
    l1, l2 = np.meshgrid(axis, axis, indexing="ij")
    l1, l2 = l1.ravel(), l2.ravel()
    room = 1.0 - np.abs(l1) - np.abs(l2)
    keep = room >= -1e-12
    l1, l2, room = l1[keep], l2[keep], np.maximum(room[keep], 0.0)
    residual = f[None, :] - l1[:, None] * phi[0] - l2[:, None] * phi[1]
    gram3 = float(np.sum(weights * phi[2] ** 2))
    l3 = np.clip((residual * weights) @ phi[2] / gram3, -room, room)
    residual -= l3[:, None] * phi[2]
    return float(np.sqrt(np.min(residual ** 2 @ weights)))


@pytest.mark.parametrize("seed", range(50))
def test_matches_dense_grid_search(seed):
    rng = np.random.default_rng(seed)
    domain = GridDomain.from_points(np.arange(3.0))
    phi = rng.normal(size=(3, 3))
    phi /= np.sqrt(phi ** 2 @ domain.weights)[:, None]
    f = 1.5 * rng.normal(size=3)
    result = convex_fit(FunctionVector(f, domain), [FunctionVector(row, domain) for row in phi], NormSpec(2, domain))
    assert result.error == pytest.approx(_grid_oracle(f, phi, domain.weights), abs=2e-3)
    assert result.combination.l1_mass <= 1 + 1e-12


@pytest.mark.parametrize("p, tol", [(1, 1e-6), (1.5, 1e-4), (3, 1e-4)])
@pytest.mark.parametrize("seed", range(20))
def test_interior_targets_are_reached(seed, p, tol):
    rng = np.random.default_rng(seed)
    domain = GridDomain.from_points(np.arange(4.0))
    atoms = [FunctionVector(row, domain) for row in np.eye(4)]
    f = FunctionVector(0.5 * rng.dirichlet(np.ones(4)) * rng.choice([-1.0, 1.0], 4), domain)
    result = convex_fit(f, atoms, NormSpec(p, domain))
    assert result.error <= tol
    assert result.combination.l1_mass <= 1 + 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_lp_fit_on_the_boundary(seed):
    rng = np.random.default_rng(seed)
    domain = GridDomain.from_points(np.arange(4.0))
    atoms = [FunctionVector(row, domain) for row in np.eye(4)]
    f = 2.0 * rng.dirichlet(np.ones(4))
    result = convex_fit(FunctionVector(f, domain), atoms, NormSpec(1, domain))
    # any nonnegative λ ≤ f with mass 1 is optimal, leaving (Σf − 1)/4
    assert result.error == pytest.approx((f.sum() - 1.0) / 4, abs=1e-6)
    assert result.combination.l1_mass == pytest.approx(1.0, abs=1e-6)
