# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Exact continuous-time simulation of the energy process.

Interior edges pool the energies of their endpoints and split the pool with a
Beta(ω_u/2, ω_v/2) share; boundary edges refresh the interior endpoint with a
Gamma(ω_u/2, T(v/L)) sample from the heat bath. Events are scheduled with one
global exponential clock and an alias table over the static edge rates.
"""

from dataclasses import dataclass, field

import numpy as np

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.sampling import sample_beta_array, sample_gamma_array

DEFAULT_CHUNK = 4096


@dataclass
class EnergyState:
    xi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.xi)) or np.any(self.xi < 0):
            raise exceptions.ValueError("Energies must be finite and nonnegative.")
        if self.time < 0:
            raise exceptions.ValueError("State time must be nonnegative.")

    @property
    def total_energy(self):
        return float(self.xi.sum())

    def copy(self):
        return EnergyState(self.xi.copy(), self.time)


def step_interior(state, edge, p):
    """Pool the energies at the endpoints of an interior edge and split them."""
    u, v = edge
    xi = state.xi.copy()
    total = xi[u] + xi[v]
    xi[u] = p * total
    xi[v] = total - xi[u]
    return EnergyState(xi, state.time)


def step_boundary(state, edge, eta):
    """Replace the energy of the interior endpoint by a bath sample."""
    u, _ = edge
    xi = state.xi.copy()
    xi[u] = eta
    return EnergyState(xi, state.time)


class SnapshotObserver:
    """Record the right-continuous state at fixed epochs.

    The value stored for epoch τ is the state after every event with time
    at most τ.
    """

    def __init__(self, epochs, sites=None):
        epochs = np.asarray(epochs, dtype=float).reshape(-1)
        if np.any(np.diff(epochs) < 0):
            raise exceptions.ValueError("Observer epochs must be sorted.")
        self.epochs = epochs
        self.sites = None if sites is None else np.asarray(sites, dtype=np.int64)
        self._rows = []

    def observe(self, time, xi):
        values = np.asarray(xi, dtype=float)
        self._rows.append(values if self.sites is None else values[self.sites])

    @property
    def values(self):
        if not self._rows:
            width = 0 if self.sites is None else self.sites.shape[0]
            return np.empty((0, width))
        return np.vstack(self._rows)


@dataclass
class SimulationResult:
    state: EnergyState
    n_events: int
    observers: list = field(default_factory=list)


def _edge_tables(env):
    domain = env.domain
    u = domain.edge_u
    v = domain.edge_v
    boundary = domain.is_boundary_edge

    omega = env.omega.astype(float)
    a = omega[u] / 2

    b = np.ones(domain.n_edges)
    b[~boundary] = omega[v[~boundary]] / 2

    bath_scale = np.zeros(domain.n_edges)
    bath_scale[boundary] = env.bath_temp[v[boundary] - domain.n_interior]
    return a, b, bath_scale


def simulate(env, init, t_end, rng, observers=(), chunk=DEFAULT_CHUNK):
    """Run the Gillespie dynamics from ``init`` up to time ``t_end``.

    Parameters
    ----------
    env : Environment
    init : EnergyState
        Left untouched; the result carries a new state.
    t_end : float
        Absolute end time, at least ``init.time``.
    rng : RngStream
    observers : sequence
        Objects with an ``epochs`` array and an ``observe(time, xi)`` method.
        Epochs outside ``[init.time, t_end]`` are rejected.

    Returns
    -------
    SimulationResult
    """
    if t_end < init.time:
        raise exceptions.ValueError(f"t_end={t_end} precedes the initial time {init.time}.")
    if init.xi.shape[0] != env.domain.n_interior:
        raise exceptions.ValueError("Initial state does not match the environment.")

    pending = sorted(
        (float(epoch), k) for k, obs in enumerate(observers) for epoch in obs.epochs
    )
    if pending and (pending[0][0] < init.time or pending[-1][0] > t_end):
        raise exceptions.ValueError("Observer epochs must lie inside [init.time, t_end].")

    if env.domain.n_edges == 0:
        for epoch, k in pending:
            observers[k].observe(epoch, init.xi)
        return SimulationResult(EnergyState(init.xi.copy(), float(t_end)), 0, list(observers))

    gen = rng.generator
    table = env.edge_table
    mean_wait = 1.0 / table.total
    a, b, bath_scale = _edge_tables(env)

    edge_u = env.domain.edge_u.tolist()
    edge_v = env.domain.edge_v.tolist()
    is_boundary = env.domain.is_boundary_edge.tolist()

    xi = init.xi.tolist()
    t = float(init.time)
    n_events = 0
    next_obs = 0

    done = False
    while not done:
        # Draw roughly the expected number of remaining events per chunk.
        expected = (t_end - t) * table.total
        size = int(min(chunk, expected + 4 * np.sqrt(expected) + 8))
        waits = gen.exponential(mean_wait, size)
        edges = table.sample(gen, size)
        splits = sample_beta_array(a[edges], b[edges], rng)
        refresh = sample_gamma_array(a[edges], bath_scale[edges], rng)

        for wait, e, p, eta in zip(
            waits.tolist(), edges.tolist(), splits.tolist(), refresh.tolist()
        ):
            t_next = t + wait
            while next_obs < len(pending) and pending[next_obs][0] < t_next:
                epoch, k = pending[next_obs]
                observers[k].observe(epoch, xi)
                next_obs += 1

            if t_next > t_end:
                done = True
                break

            t = t_next
            u = edge_u[e]
            if is_boundary[e]:
                xi[u] = eta
            else:
                v = edge_v[e]
                total = xi[u] + xi[v]
                xi[u] = p * total
                xi[v] = total - xi[u]
            n_events += 1

    for epoch, k in pending[next_obs:]:
        observers[k].observe(epoch, xi)

    return SimulationResult(EnergyState(xi, float(t_end)), n_events, list(observers))


def init_product_gamma(env, f, rng):
    """Draw independent ξ_v ~ Gamma(ω_v/2, f(v/L))."""
    scale = np.asarray(f(env.domain.interior / env.domain.L), dtype=float).reshape(-1)
    if np.any(~np.isfinite(scale)):
        raise exceptions.ValueError("Initial profile must be finite.")
    xi = sample_gamma_array(env.omega / 2, scale, rng)
    return EnergyState(xi, 0.0)


def sample_steady_state(env, burn_in, n_snapshots, spacing, rng, init=None, sites=None):
    """Burn in, then record equally spaced snapshots of one trajectory.

    Returns an array of shape (n_snapshots, n_sites). Snapshots of one
    trajectory are correlated; independence comes from separate replicas.
    """
    if burn_in < 0 or spacing <= 0 or n_snapshots < 1:
        raise exceptions.ValueError("Need burn_in >= 0, spacing > 0 and n_snapshots >= 1.")

    if init is None:
        level = float(env.bath_temp.mean()) if env.has_boundary else 1.0
        init = EnergyState(env.omega / 2 * level, 0.0)

    epochs = init.time + burn_in + spacing * np.arange(n_snapshots)
    observer = SnapshotObserver(epochs, sites)
    simulate(env, init, float(epochs[-1]), rng, observers=[observer])
    return observer.values
