# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.profiles import Affine
from kmp_recipe.lib.sampling import RngStream
from kmp_recipe.lib.stats import (
    Gate,
    adjacent_covariance,
    beta_split_stationarity_test,
    bootstrap_stderr,
    gamma_marginal_test,
    hydro_comparison,
    joint_factorization_test,
    mean_stderr,
    moment_table,
    reference_moment,
)


def test_sigma_gate():
    assert Gate.sigma("close", 1.02, 1.0, 0.01).passed
    assert not Gate.sigma("far", 1.05, 1.0, 0.01).passed
    assert Gate.sigma("exact", 2.0, 2.0, 0.0).passed
    assert Gate.sigma("close", 1.02, 1.0, 0.01).tolerance == pytest.approx(0.03)


def test_bound_gates():
    assert Gate.upper_bound("u", 0.5, 1.0).passed
    assert not Gate.upper_bound("u", 1.0, 1.0).passed
    assert Gate.lower_bound("l", 0.1, 0.0).passed
    assert not Gate.lower_bound("l", 0.0, 0.0).passed
    assert Gate.interval("i", 0.99, 0.98, 1.02).passed
    assert not Gate.interval("i", 1.03, 0.98, 1.02).passed
    assert Gate.relative("r", 1.01, 1.0, 0.02).passed


def test_max_abs_z_gate():
    gate = Gate.max_abs_z("z", np.array([0.5, -2.5, 1.0]), 3.0)
    assert gate.passed
    assert gate.value == pytest.approx(2.5)
    assert not Gate.max_abs_z("z", [4.0], 3.0).passed


def test_gate_to_dict():
    assert Gate.upper_bound("u", 0.5, 1.0).to_dict() == {
        "name": "u",
        "value": 0.5,
        "reference": 1.0,
        "tolerance": 0.0,
        "passed": True,
        "detail": "upper bound",
    }


def test_mean_stderr():
    mean, stderr = mean_stderr([1.0, 2.0, 3.0, 4.0])
    assert mean == pytest.approx(2.5)
    assert stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    mean, stderr = mean_stderr([5.0])
    assert stderr == 0.0


def test_bootstrap_matches_the_analytic_stderr(rng):
    values = rng.generator.normal(size=2000)
    _, stderr = mean_stderr(values)
    assert bootstrap_stderr(values, 500, rng.child(1)) == pytest.approx(stderr, rel=0.15)


def test_reference_moment_with_a_cold_bath():
    assert reference_moment(2, 1.0, 0.0) == 0.0
    assert reference_moment(2, 1.0, 2.0) == pytest.approx(8.0)


def test_moment_table_on_gamma_samples(rng):
    samples = rng.generator.gamma(1.5, 2.0, size=20000)
    table = moment_table(samples, 1.5, 2.0, max_order=3)
    assert list(table["k"]) == [1, 2, 3]
    assert np.all(np.abs(table["z"]) < 4.5)
    with pytest.raises(exceptions.ValueError):
        moment_table(samples, 1.5, 2.0, max_order=5)


def test_gamma_marginal_test(rng):
    samples = rng.generator.gamma(1.0, 1.5, size=3000)
    report = gamma_marginal_test(samples, 2, 1.5, n_sigma=4.5)
    assert report.moments_ok
    assert report.ks_distance < 1.5 * report.ks_critical
    wrong = gamma_marginal_test(samples, 2, 3.0)
    assert not wrong.ks_ok
    assert not wrong.moments_ok


def test_gamma_marginal_test_uses_the_replica_count(rng):
    samples = rng.generator.gamma(1.0, 1.0, size=(200, 10))
    report = gamma_marginal_test(samples, 2, 1.0)
    single = gamma_marginal_test(samples[:, 0], 2, 1.0)
    assert report.ks_critical == pytest.approx(single.ks_critical)


def test_factorization(rng):
    independent = rng.generator.gamma(1.0, 1.0, size=(5000, 3))
    assert joint_factorization_test(independent, n_sigma=5.0).passed

    x = rng.generator.gamma(1.0, 1.0, size=5000)
    correlated = np.column_stack([x, x + rng.generator.gamma(1.0, 1.0, size=5000)])
    report = joint_factorization_test(correlated)
    assert not report.passed
    assert report.max_abs_correlation > 0.5


def test_factorization_against_expected_means(rng):
    shape = np.array([0.5, 1.0, 1.5])
    samples = rng.generator.gamma(shape, 2.0, size=(5000, 3))
    report = joint_factorization_test(samples, n_sigma=5.0, expected_means=2.0 * shape)
    assert report.passed
    np.testing.assert_allclose(report.table["expected_product"], [2.0, 3.0, 6.0])


def test_factorization_rejects_a_mis_scaled_sampler(rng):
    # independent sites, so only the mixed moments can catch the wrong scale
    samples = rng.generator.gamma(1.0, 1.3, size=(5000, 3))
    report = joint_factorization_test(samples, n_sigma=5.0, expected_means=[1.0, 1.0, 1.0])
    assert (report.table["z"].abs() <= 5.0).all()
    assert (report.table["mixed_z"] > 5.0).all()
    assert not report.passed


def test_factorization_needs_two_sites():
    with pytest.raises(exceptions.ValueError):
        joint_factorization_test(np.ones((10, 1)))
    with pytest.raises(exceptions.ValueError):
        joint_factorization_test(np.ones((10, 2)), expected_means=[1.0])


def test_beta_split(rng):
    gen = rng.generator
    total = gen.gamma(2.0, 1.0, size=4000)
    share = gen.beta(0.5, 1.5, size=4000)
    stationary = np.column_stack([share * total, (1 - share) * total])
    assert beta_split_stationarity_test(stationary, (1, 3), rng.child(1), alpha=1e-4).passed

    wrong = gen.beta(5.0, 5.0, size=4000)
    shifted = np.column_stack([wrong * total, (1 - wrong) * total])
    assert not beta_split_stationarity_test(shifted, (1, 3), rng.child(2)).passed


def test_adjacent_covariance():
    values = np.array([[[0.0, 0.0], [2.0, 2.0]]])
    np.testing.assert_allclose(adjacent_covariance(values, [2, 2]), [1.0])
    with pytest.raises(exceptions.ValueError):
        adjacent_covariance(np.ones((2, 3)), [2, 2, 2])


def test_adjacent_covariance_is_normalized():
    values = np.array(
        [
            [[0.0, 0.0], [2.0, 10.0]],
            [[0.0, 2.0], [2.0, 0.0]],
            [[1.0, 0.0], [1.0, 2.0]],
        ]
    )
    np.testing.assert_allclose(adjacent_covariance(values, [2, 2]), [1.0, -1.0, 0.0])
    np.testing.assert_allclose(adjacent_covariance(values, [1, 5]), [1.0, -1.0, 0.0])


def test_hydro_comparison_at_the_centre_of_a_symmetric_chain(homogeneous_chain):
    # point symmetry keeps the mean at the centre on (T(0) + T(1)) / 2
    frame = hydro_comparison(
        homogeneous_chain, Affine(1.0, (1.0,)), [[0.5]], 0.05, 800, RngStream(3), [1.5], 0.5
    )
    assert list(frame.columns) == ["x1", "mc", "stderr", "pde", "rel_error", "passed"]
    row = frame.iloc[0]
    assert abs(row["mc"] - 1.5) < 4.5 * row["stderr"]
    assert row["passed"]
