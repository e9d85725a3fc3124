import itertools

import numpy as np
import pytest

from rotafactor.extraction import offdiag_objective, uls_extract
from rotafactor.model import LoadingLevel, build_population_loadings, build_population_model, build_uniform_phi
from rotafactor.simulation import RngState, sample_correlation

from conftest import random_orthogonal


def population(q, per_factor, level, rho):
    return build_population_model(build_population_loadings(q, per_factor, level), build_uniform_phi(q, rho))


def test_orthogonal_recovery():
    model = population(3, 5, LoadingLevel.LOW, 0.0)
    res = uls_extract(model.sigma, 3)
    assert res.converged
    assert res.objective < 1e-10
    assert np.max(np.abs(res.l_u @ res.l_u.T - model.lambda_ @ model.lambda_.T)) < 1e-5


def test_oblique_common_part_recovery():
    model = population(3, 5, LoadingLevel.LOW, 0.5)
    res = uls_extract(model.sigma, 3)
    assert np.max(np.abs(res.l_u @ res.l_u.T - model.common)) < 1e-5


def test_no_common_variance():
    res = uls_extract(np.eye(5), 1)
    assert np.max(np.abs(res.l_u)) < 1e-6
    assert res.objective < 1e-12


def test_communalities_on_diagonal():
    r = sample_correlation(population(3, 5, LoadingLevel.HIGH, 0.25).sigma, 300, RngState(11))
    res = uls_extract(r, 3)
    np.testing.assert_allclose(np.diag(res.l_u @ res.l_u.T), res.communalities, atol=1e-8)
    assert np.all((res.communalities >= 0) & (res.communalities <= 1))


@pytest.mark.parametrize("seed", range(5))
def test_objective_non_increasing(seed):
    r = sample_correlation(population(6, 5, LoadingLevel.LOW, 0.5).sigma, 300, RngState(seed))
    res = uls_extract(r, 6)
    trace = np.array(res.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_rotation_invariance_of_fit(rng):
    r = sample_correlation(population(3, 10, LoadingLevel.LOW, 0.25).sigma, 300, RngState(4))
    res = uls_extract(r, 3)
    for _ in range(5):
        rotated = res.l_u @ random_orthogonal(rng, 3)
        assert offdiag_objective(r, rotated) == pytest.approx(res.objective, abs=1e-10)


def test_column_signs_fixed():
    r = sample_correlation(population(3, 5, LoadingLevel.HIGH, 0.0).sigma, 300, RngState(2))
    assert np.all(uls_extract(r, 3).l_u.sum(axis=0) >= 0)


def test_singular_input_falls_back():
    # two identical variables make r singular
    r = np.full((4, 4), 0.3)
    np.fill_diagonal(r, 1.0)
    r[0, 1] = r[1, 0] = 1.0
    r[1, 2:] = r[0, 2:]
    r[2:, 1] = r[2:, 0]
    res = uls_extract(r, 1)
    assert res.smc_fallback


def test_heywood_is_clamped():
    # a single factor cannot fit this pattern without a communality above 1
    r = np.array([[1.0, 0.9, 0.9], [0.9, 1.0, 0.95], [0.9, 0.95, 1.0]])
    r[0, 1:] = r[1:, 0] = 0.99
    res = uls_extract(r, 1, max_iter=200)
    assert np.all(res.communalities <= 1.0)
    np.testing.assert_allclose(np.diag(res.l_u @ res.l_u.T), res.communalities, atol=1e-8)


@pytest.mark.parametrize("q", [0, 5, 6])
def test_bad_factor_count(q):
    with pytest.raises(ValueError):
        uls_extract(np.eye(5), q)


def test_requires_correlation_matrix():
    with pytest.raises(ValueError):
        uls_extract(2 * np.eye(3), 1)
    with pytest.raises(ValueError):
        uls_extract([[1.0, 0.2, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 1.0]], 1)


@pytest.mark.parametrize(
    "q, per_factor, level, rho",
    list(itertools.product([3, 6, 9, 12], [5, 10], list(LoadingLevel), [0.0, 0.25, 0.50])),
)
def test_noiseless_study_conditions(q, per_factor, level, rho):
    model = population(q, per_factor, level, rho)
    res = uls_extract(model.sigma, q)
    assert res.converged
    assert res.objective < 1e-8
