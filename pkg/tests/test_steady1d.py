# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import functools
import math

import numpy as np
import pytest

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.environment import (
    MacroscopicRateScenario,
    RandomOmegaScenario,
    build_box_domain,
    build_chain_environment,
    build_scenario,
)
from kmp_recipe.lib.profiles import Affine, Constant, Kappa
from kmp_recipe.lib.sampling import RngStream
from kmp_recipe.lib.steady1d import (
    PairConfig,
    Profile1D,
    compare_drifts,
    compute_psi,
    drift_S_T,
    drift_S_T_exact,
    lattice_index,
    limit_A_random_omega,
    limit_A_rho,
    max_limit_deviation,
    phi_martingale_increment,
    profile_A,
    steady_temperature,
)


def test_psi_of_a_homogeneous_chain(homogeneous_chain):
    np.testing.assert_allclose(compute_psi(homogeneous_chain), np.ones(10))


def test_psi_uses_the_edge_conventions(mixed_chain):
    # ω_0 := ω_1 = 1 and ω_5 := ω_4 = 2
    expected = [2 / 1.0, 3 / (0.5 * 2), 5 / (2.0 * 6), 5 / (1.0 * 6), 4 / (1.5 * 4)]
    np.testing.assert_allclose(compute_psi(mixed_chain), expected)


def test_lattice_index():
    assert lattice_index(0.3, 10) == 3
    np.testing.assert_array_equal(lattice_index([0.0, 0.55, 1.0], 10), [0, 5, 10])
    with pytest.raises(exceptions.DomainError):
        lattice_index(1.5, 10)


def test_homogeneous_profile_is_linear(homogeneous_chain):
    assert profile_A(homogeneous_chain, 0.5) == pytest.approx(0.5)
    assert steady_temperature(homogeneous_chain, 0.3) == pytest.approx(1.3)
    assert profile_A(homogeneous_chain, 0.0) == 0.0
    assert profile_A(homogeneous_chain, 1.0) == 1.0


def test_profile_frame(mixed_chain):
    frame = Profile1D.from_env(mixed_chain).to_frame()
    assert list(frame.columns) == ["m", "psi", "phi_under", "A", "u"]
    assert frame.shape[0] == 5
    assert frame["A"].iloc[-1] == pytest.approx(1.0)
    assert np.all(np.diff(frame["A"]) > 0)


def test_limit_of_the_random_omega_profile():
    kappa = Kappa((1, 2), (Affine(0.0, (1.0,)), Affine(1.0, (-1.0,))))
    for x in (0.0, 0.25, 0.5, 1.0):
        assert limit_A_random_omega(kappa, x) == pytest.approx((x**2 + 2 * x) / 3)


def test_limit_of_the_macroscopic_rate_profile():
    rho = Affine(1.0, (1.0,))
    for x in (0.0, 0.3, 1.0):
        assert limit_A_rho(rho, x) == pytest.approx(math.log(1 + x) / math.log(2))


def test_macroscopic_rate_chain_approaches_its_limit():
    rho = Affine(1.0, (1.0,))
    scenario = MacroscopicRateScenario(rho, 2, Constant(1.0))
    env = build_scenario(scenario, build_box_domain(1, 2000), RngStream(1))
    grid = np.linspace(0.0, 1.0, 21)
    assert max_limit_deviation(env, lambda x: limit_A_rho(rho, x), grid) < 0.005


def test_random_omega_chain_approaches_its_limit():
    kappa = Kappa((1, 2), (Affine(0.0, (1.0,)), Affine(1.0, (-1.0,))))
    scenario = RandomOmegaScenario(kappa, 1.0, Constant(1.0))
    env = build_scenario(scenario, build_box_domain(1, 20000), RngStream(2))
    grid = np.linspace(0.0, 1.0, 21)
    limit = functools.partial(limit_A_random_omega, kappa)
    assert max_limit_deviation(env, limit, grid) < 0.02


def test_drifts_of_a_co_located_pair(homogeneous_chain):
    config = PairConfig("same", 4)
    printed_S, printed_T = drift_S_T(homogeneous_chain, config)
    exact_S, exact_T = drift_S_T_exact(homogeneous_chain, config)
    assert printed_S == pytest.approx(2 / 3)
    assert exact_S == pytest.approx(2 / 3)
    assert printed_T == pytest.approx(1 / 2)
    assert exact_T == pytest.approx(1 / 3)


def test_drifts_of_an_adjacent_pair(homogeneous_chain):
    config = PairConfig("adjacent", 4)
    printed_S, printed_T = drift_S_T(homogeneous_chain, config)
    exact_S, exact_T = drift_S_T_exact(homogeneous_chain, config)
    assert printed_S == pytest.approx(-1 / 9)
    assert exact_S == pytest.approx(-1 / 9)
    assert printed_T == pytest.approx(2 / 9)
    assert exact_T == pytest.approx(1 / 9)


def test_compare_drifts_flags_the_T_mismatch(homogeneous_chain):
    comparison = compare_drifts(homogeneous_chain, PairConfig("same", 3))
    assert comparison.S_matches
    assert not comparison.T_matches
    row = comparison.as_row()
    assert row["kind"] == "same" and row["i"] == 3


def test_drifts_stay_off_the_boundary(homogeneous_chain):
    with pytest.raises(exceptions.DomainError):
        drift_S_T(homogeneous_chain, PairConfig("same", 1))
    with pytest.raises(exceptions.DomainError):
        drift_S_T_exact(homogeneous_chain, PairConfig("adjacent", 8))
    with pytest.raises(exceptions.ValueError):
        PairConfig("apart", 3)


def test_prefix_sums_are_harmonic_with_the_martingale_convention():
    env = build_chain_environment(
        [1, 3, 2, 2, 1, 3, 2], [0.7, 1.9, 0.5, 1.2, 1.0, 0.6, 1.4, 2.0], 1.0, 2.0
    )
    for m in range(1, 8):
        assert phi_martingale_increment(env, m, "martingale") == pytest.approx(0.0, abs=1e-12)


def test_literal_convention_breaks_harmonicity_at_the_edge(homogeneous_chain):
    # left rate 1 against right rate 1/2 at m = 1
    assert phi_martingale_increment(homogeneous_chain, 1, "literal") == pytest.approx(-1 / 3)
    assert phi_martingale_increment(homogeneous_chain, 5, "literal") == pytest.approx(0.0)
