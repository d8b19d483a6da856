import math

import numpy as np
import pytest

from widthlab.exceptions import DomainMismatchError
from widthlab.services.function_space import GridDomain, NormSpec
from widthlab.services.node_classes import (
    Dictionary,
    NodeFamily,
    NodeKind,
    UnknownMotherError,
    _normalize_thresholds,
    build_dictionary,
    lipschitz_check,
    load_dictionary,
    sample_dictionary,
    save_dictionary,
)


@pytest.fixture(scope="module")
def line():
    return GridDomain.monte_carlo(1, 400, seed=3)


@pytest.fixture(scope="module")
def plane():
    return GridDomain.monte_carlo(2, 400, seed=4)


def test_threshold_lattice_gives_three_steps(line):
    family = NodeFamily.linear_threshold(1, parameter_box=((1.0, 1.0), (-1.0, 1.0)))
    dictionary = sample_dictionary(family, line, resolution=3)
    assert len(dictionary) == 3
    assert len({tuple(row) for row in dictionary.matrix}) == 3
    np.testing.assert_allclose(np.linalg.norm(dictionary.parameters, axis=1), 1.0)


def test_threshold_tie_counts_as_one():
    domain = GridDomain.from_points([0.0, 1.0])
    family = NodeFamily.linear_threshold(1)
    dictionary = build_dictionary(family, np.array([[1.0, 0.0]]), domain)
    np.testing.assert_array_equal(dictionary.matrix[0], [1.0, 1.0])


def test_threshold_members_take_two_values(plane):
    dictionary = sample_dictionary(NodeFamily.linear_threshold(2), plane, count=50, seed=1, scale=2.5)
    assert set(np.unique(dictionary.matrix)) <= {0.0, 2.5}


def test_threshold_duplicates_collapse():
    parameters = np.array([[1.0, 0.5], [2.0, 1.0], [0.0, 0.0], [-1.0, 0.5]])
    normalized = _normalize_thresholds(parameters)
    assert len(normalized) == 2
    np.testing.assert_allclose(normalized[0], np.array([1.0, 0.5]) / math.sqrt(1.25))


def test_fourier_atoms(torus):
    dictionary = sample_dictionary(NodeFamily.fourier_atom(2), torus)
    t = torus.points[:, 0]
    expected = [np.ones_like(t), np.sin(t), np.cos(t), np.sin(2 * t), np.cos(2 * t)]
    assert len(dictionary) == 5
    for row, values in zip(dictionary.matrix, expected):
        np.testing.assert_allclose(row, values, atol=1e-12)


def test_fourier_atoms_need_a_line(plane):
    with pytest.raises(DomainMismatchError):
        sample_dictionary(NodeFamily.fourier_atom(1), plane)


def test_same_seed_same_parameters(plane):
    family = NodeFamily.smooth_mother(4, d=2)
    first = sample_dictionary(family, plane, count=30, seed=11)
    second = sample_dictionary(family, plane, count=30, seed=11)
    assert first.parameters.tobytes() == second.parameters.tobytes()
    assert first.matrix.tobytes() == second.matrix.tobytes()


def test_scaling_is_exact(plane):
    family = NodeFamily.smooth_mother(4, d=2)
    unit = sample_dictionary(family, plane, count=20, seed=5)
    scaled = unit.scaled(3.0)
    np.testing.assert_array_equal(scaled.matrix, 3.0 * unit.matrix)


def test_smooth_members_in_range(plane):
    dictionary = sample_dictionary(NodeFamily.smooth_mother(4, d=2), plane, count=40, seed=2, scale=0.5)
    assert dictionary.matrix.min() >= 0
    assert dictionary.matrix.max() <= 0.5


def test_mother_parameter_count_checked():
    with pytest.raises(ValueError):
        NodeFamily.smooth_mother(3, d=2)
    with pytest.raises(ValueError):
        NodeFamily.smooth_mother(2, d=1, mother_id="logistic_ridge", parameter_box=((0, 2), (0, 1)))


def test_unknown_mother():
    with pytest.raises(UnknownMotherError):
        NodeFamily.smooth_mother(2, mother_id="nope")


def test_constant_mother_has_zero_ratio(line):
    family = NodeFamily.smooth_mother(2, mother_id="constant")
    dictionary = sample_dictionary(family, line, count=50, seed=0)
    assert lipschitz_check(dictionary, NormSpec(2, line), trials=2000) == 0.0


def test_coordinate_mother_has_unit_ratio(line):
    family = NodeFamily.smooth_mother(1, mother_id="coordinate")
    dictionary = sample_dictionary(family, line, count=50, seed=0)
    assert lipschitz_check(dictionary, NormSpec(2, line), trials=2000) == pytest.approx(1.0, abs=1e-9)


def test_logistic_ratio_is_finite(plane):
    dictionary = sample_dictionary(NodeFamily.smooth_mother(4, d=2), plane, count=200, seed=0)
    ratio = lipschitz_check(dictionary, NormSpec(2, plane), trials=10_000)
    assert 0 < ratio < math.inf


def test_lipschitz_check_needs_smooth_family(line):
    dictionary = sample_dictionary(NodeFamily.linear_threshold(1), line, count=10)
    with pytest.raises(ValueError):
        lipschitz_check(dictionary, NormSpec(2, line))


def test_explicit_dictionary(half_domain, vec):
    dictionary = Dictionary.from_members([vec([0, 0], half_domain), vec([1, 1], half_domain)])
    assert dictionary.family is None
    assert len(dictionary) == 2
    np.testing.assert_array_equal(dictionary.scaled(2).matrix, [[0, 0], [2, 2]])


def test_save_and_load(tmp_path, plane):
    dictionary = sample_dictionary(NodeFamily.smooth_mother(4, d=2), plane, count=10, seed=9, scale=1.5)
    path = tmp_path / "dictionary.json"
    save_dictionary(dictionary, path)
    loaded = load_dictionary(path, plane)
    assert loaded.family == dictionary.family
    assert loaded.family.kind is NodeKind.SMOOTH_MOTHER
    np.testing.assert_array_equal(loaded.matrix, dictionary.matrix)
