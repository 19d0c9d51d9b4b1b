# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.environment import Environment, build_box_domain, build_chain_environment
from kmp_recipe.lib.forward import (
    EnergyState,
    SnapshotObserver,
    init_product_gamma,
    sample_steady_state,
    simulate,
    step_boundary,
    step_interior,
)
from kmp_recipe.lib.profiles import Constant
from kmp_recipe.lib.sampling import RngStream
from kmp_recipe.lib.stats import equilibrium_invariance_test


def closed_chain():
    domain = build_box_domain(1, 6, closed=True)
    return Environment(domain, [1, 2, 3, 2, 1], [1.0, 0.5, 2.0, 1.0], [])


def test_energy_state_is_validated():
    with pytest.raises(exceptions.ValueError):
        EnergyState([1.0, -0.5])
    with pytest.raises(exceptions.ValueError):
        EnergyState([1.0, float("nan")])


def test_single_steps():
    state = EnergyState([1.0, 3.0, 2.0])
    pooled = step_interior(state, (0, 1), 0.25)
    np.testing.assert_allclose(pooled.xi, [1.0, 3.0, 2.0])
    pooled = step_interior(state, (1, 2), 0.8)
    np.testing.assert_allclose(pooled.xi, [1.0, 4.0, 1.0])
    refreshed = step_boundary(state, (2, 5), 0.5)
    np.testing.assert_allclose(refreshed.xi, [1.0, 3.0, 0.5])
    np.testing.assert_allclose(state.xi, [1.0, 3.0, 2.0])


def test_closed_system_conserves_energy(rng):
    env = closed_chain()
    init = EnergyState([0.5, 1.0, 4.0, 0.0, 2.5])
    result = simulate(env, init, 50.0, rng)
    assert result.n_events > 0
    assert result.state.total_energy == pytest.approx(init.total_energy, rel=1e-12)
    assert result.state.time == 50.0
    np.testing.assert_array_equal(init.xi, [0.5, 1.0, 4.0, 0.0, 2.5])


def test_same_stream_gives_the_same_trajectory(mixed_chain):
    init = EnergyState([1.0, 1.0, 1.0, 1.0])
    first = simulate(mixed_chain, init, 5.0, RngStream(3, 1))
    second = simulate(mixed_chain, init, 5.0, RngStream(3, 1))
    np.testing.assert_array_equal(first.state.xi, second.state.xi)
    assert first.n_events == second.n_events


def test_observer_sees_the_initial_state_at_time_zero(mixed_chain, rng):
    init = EnergyState([1.0, 2.0, 3.0, 4.0])
    observer = SnapshotObserver([0.0, 1.0, 2.0], sites=[0, 3])
    simulate(mixed_chain, init, 2.0, rng, observers=[observer])
    assert observer.values.shape == (3, 2)
    np.testing.assert_array_equal(observer.values[0], [1.0, 4.0])


def test_simulate_rejects_bad_times(mixed_chain, rng):
    init = EnergyState([1.0] * 4, time=1.0)
    with pytest.raises(exceptions.ValueError):
        simulate(mixed_chain, init, 0.5, rng)
    with pytest.raises(exceptions.ValueError):
        simulate(mixed_chain, init, 2.0, rng, observers=[SnapshotObserver([3.0])])


def test_bath_refresh_drives_a_single_site_to_the_bath_law():
    env = build_chain_environment([2], [1.0, 1.0], 1.5, 1.5)
    values = np.array(
        [
            simulate(env, EnergyState([0.0]), 20.0, RngStream(9, i)).state.xi[0]
            for i in range(4000)
        ]
    )
    # Gamma(1, 1.5): mean 1.5, standard deviation 1.5
    assert abs(values.mean() - 1.5) < 4.5 * 1.5 / np.sqrt(values.size)


def test_init_product_gamma(mixed_chain, rng):
    values = np.array(
        [
            init_product_gamma(mixed_chain, Constant(2.0), rng.for_replica(i)).xi
            for i in range(4000)
        ]
    )
    expected = mixed_chain.omega / 2 * 2.0
    stderr = values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])
    assert np.all(np.abs(values.mean(axis=0) - expected) < 4.5 * stderr)


def test_steady_state_snapshots(mixed_chain, rng):
    values = sample_steady_state(mixed_chain, 1.0, 5, 0.5, rng)
    assert values.shape == (5, 4)
    assert np.all(values >= 0)


def test_product_gamma_is_invariant_at_a_common_temperature():
    env = build_chain_environment([1, 2, 3], [1.0, 0.5, 2.0, 1.0], 1.5, 1.5)
    report = equilibrium_invariance_test(
        env, [0.5, 2.0], 2000, RngStream(11), n_sigma=4.5, max_order=2
    )
    assert report.passed
    assert set(report.table["time"]) == {0.5, 2.0}
