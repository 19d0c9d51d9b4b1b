# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Labeled dual particle process, the duality function and moment estimates.

Particles are distinguishable. A particle sits on a node of the domain; a node
index at or above ``n_interior`` is a boundary site, which means the particle
has been dropped into the storage of that site and never moves again.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.forward import simulate
from kmp_recipe.lib.sampling import BetaParams, Purpose, sample_labeled_split


@dataclass
class OccupancyView:
    n: np.ndarray
    n_hat: np.ndarray

    @property
    def total(self):
        return int(self.n.sum() + self.n_hat.sum())


@dataclass
class DualState:
    positions: np.ndarray
    time: float = 0.0
    absorption_time: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64).reshape(-1)
        if self.absorption_time is None:
            self.absorption_time = np.full(self.positions.shape[0], np.nan)
        else:
            self.absorption_time = np.asarray(self.absorption_time, dtype=float).reshape(-1)

    @classmethod
    def from_sites(cls, domain, sites, time=0.0):
        sites = np.asarray(sites, dtype=np.int64).reshape(-1)
        if np.any(sites < 0) or np.any(sites >= domain.n_interior):
            raise exceptions.DomainError("Dual particles must start on interior sites.")
        return cls(sites, time)

    @property
    def n_particles(self):
        return self.positions.shape[0]

    def absorbed(self, domain):
        return self.positions >= domain.n_interior

    def all_absorbed(self, domain):
        return bool(np.all(self.absorbed(domain)))

    def occupancy(self, domain):
        n = np.bincount(self.positions, minlength=domain.n_interior + domain.n_boundary)
        return OccupancyView(n[: domain.n_interior], n[domain.n_interior :])

    def restrict(self, particle_ids):
        ids = np.asarray(particle_ids, dtype=np.int64)
        return DualState(self.positions[ids], self.time, self.absorption_time[ids])

    def copy(self):
        return DualState(self.positions.copy(), self.time, self.absorption_time.copy())


def _edge_endpoints(env, edge):
    domain = env.domain
    if not 0 <= edge < domain.n_edges:
        raise exceptions.ValueError(f"Edge index {edge} is out of range.")
    return int(domain.edge_u[edge]), int(domain.edge_v[edge])


def dual_step_interior(env, state, edge, rng):
    """Pool the particles at both endpoints of an interior edge and re-split them."""
    u, v = _edge_endpoints(env, edge)
    if v >= env.domain.n_interior:
        raise exceptions.ValueError(f"Edge {edge} is a boundary edge.")

    pooled = np.flatnonzero((state.positions == u) | (state.positions == v))
    if pooled.size == 0:
        return state.copy()

    p = BetaParams.from_omegas(env.omega[u], env.omega[v])
    kept, sent = sample_labeled_split(pooled.tolist(), p, rng)

    result = state.copy()
    result.positions[list(kept)] = u
    result.positions[list(sent)] = v
    return result


def dual_step_boundary(env, state, edge):
    """Drop every particle at the interior endpoint into the storage of the bath site."""
    u, v = _edge_endpoints(env, edge)
    if v < env.domain.n_interior:
        raise exceptions.ValueError(f"Edge {edge} is an interior edge.")

    result = state.copy()
    moving = result.positions == u
    result.positions[moving] = v
    result.absorption_time[moving] = state.time
    return result


def simulate_dual(env, init, t_end, rng):
    """Run the dual process up to ``t_end``, or until absorption when it is None.

    Only edges touching an occupied site are put on the clock; rings of the
    other edges leave the state unchanged.
    """
    domain = env.domain
    n_interior = domain.n_interior

    if t_end is not None and t_end < init.time:
        raise exceptions.ValueError(f"t_end={t_end} precedes the initial time {init.time}.")
    if t_end is None and domain.n_boundary == 0 and init.n_particles:
        raise exceptions.ConfigError(
            "t_end", "running until absorption needs a domain with heat-bath edges."
        )

    positions = init.positions.tolist()
    absorbed_at = init.absorption_time.tolist()
    t = float(init.time)

    gen = rng.generator
    incident = [edges.tolist() for edges in domain.incident_edges]
    rates = env.rate.tolist()
    edge_u = domain.edge_u.tolist()
    edge_v = domain.edge_v.tolist()
    omega = env.omega.tolist()

    while True:
        occupied = {}
        for pid, node in enumerate(positions):
            if node < n_interior:
                occupied.setdefault(node, []).append(pid)
        if not occupied:
            break

        candidates = sorted({e for node in occupied for e in incident[node]})
        total = sum(rates[e] for e in candidates)
        t_next = t + gen.exponential(1.0 / total)
        if t_end is not None and t_next > t_end:
            break
        t = t_next

        target = gen.random() * total
        for e in candidates:
            target -= rates[e]
            if target < 0:
                break

        u, v = edge_u[e], edge_v[e]
        if v >= n_interior:
            for pid in occupied.get(u, ()):
                positions[pid] = v
                absorbed_at[pid] = t
        else:
            pooled = sorted(occupied.get(u, []) + occupied.get(v, []))
            kept, sent = sample_labeled_split(
                pooled, BetaParams.from_omegas(omega[u], omega[v]), rng
            )
            for pid in kept:
                positions[pid] = u
            for pid in sent:
                positions[pid] = v

    final_time = t if t_end is None else float(t_end)
    return DualState(positions, final_time, absorbed_at)


def duality_F(occ, xi, env):
    """Evaluate F(n, ξ) in log space, with 0**0 = 1."""
    n = occ.n.astype(float)
    n_hat = occ.n_hat.astype(float)
    half = env.omega / 2

    energies = xi.xi
    if np.any((n > 0) & (energies == 0)) or np.any((n_hat > 0) & (env.bath_temp == 0)):
        return 0.0

    log_value = (
        special.xlogy(n, energies).sum()
        + (special.gammaln(half) - special.gammaln(n + half)).sum()
        + special.xlogy(n_hat, env.bath_temp).sum()
    )
    return float(np.exp(log_value))


def duality_samples(env, xi0, n0, t, rng):
    """One replica of both sides of the duality relation.

    Returns
    -------
    lhs, rhs : float
        F(n0, X(t)) with X(0) = ξ0, and F(Y(t), ξ0) with Y(0) = n0.
    """
    if t < 0:
        raise exceptions.ValueError("Duality time must be nonnegative.")
    forward = simulate(env, xi0, xi0.time + t, rng.child(Purpose.FORWARD))
    lhs = duality_F(n0.occupancy(env.domain), forward.state, env)

    dual = simulate_dual(env, n0, n0.time + t, rng.child(Purpose.DUAL))
    rhs = duality_F(dual.occupancy(env.domain), xi0, env)
    return lhs, rhs


def duality_sample_block(env, xi0, n0, t, rng, replica_ids):
    values = np.array(
        [duality_samples(env, xi0, n0, t, rng.for_replica(i)) for i in replica_ids]
    )
    return values.reshape(-1, 2)


@dataclass
class DualityReport:
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    replicas: int

    @property
    def combined_stderr(self):
        return float(np.hypot(self.lhs_stderr, self.rhs_stderr))

    @property
    def difference(self):
        return self.lhs - self.rhs

    def within(self, n_sigma):
        if self.combined_stderr == 0:
            return bool(np.isclose(self.lhs, self.rhs, rtol=1e-12, atol=1e-12))
        return abs(self.difference) <= n_sigma * self.combined_stderr


def summarize_duality(values):
    values = np.asarray(values, dtype=float).reshape(-1, 2)
    count = values.shape[0]
    means = values.mean(axis=0)
    stderrs = values.std(axis=0, ddof=1) / np.sqrt(count) if count > 1 else np.zeros(2)
    return DualityReport(means[0], means[1], stderrs[0], stderrs[1], count)


def verify_duality_mc(env, xi0, n0, t, replicas, rng):
    """Monte Carlo estimates of E F(n0, X(t)) and E F(Y(t), ξ0)."""
    if replicas < 1:
        raise exceptions.ValueError("Need at least one replica.")
    return summarize_duality(duality_sample_block(env, xi0, n0, t, rng, range(replicas)))


def single_particle_generator(env):
    """Rate matrix of one dual particle over all nodes; storage nodes absorb."""
    domain = env.domain
    size = domain.n_interior + domain.n_boundary
    Q = np.zeros((size, size))
    omega = env.omega.astype(float)

    for e in range(domain.n_edges):
        u, v = int(domain.edge_u[e]), int(domain.edge_v[e])
        r = env.rate[e]
        if v >= domain.n_interior:
            Q[u, v] += r
        else:
            Q[u, v] += r * omega[v] / (omega[u] + omega[v])
            Q[v, u] += r * omega[u] / (omega[u] + omega[v])

    Q[np.diag_indices(size)] = -Q.sum(axis=1)
    return Q


def exact_single_particle_law(env, start, t):
    """Law of one dual particle at time t, as a vector over all nodes."""
    Q = single_particle_generator(env)
    initial = np.zeros(Q.shape[0])
    initial[start] = 1.0
    return initial @ linalg.expm(Q * t)


def exact_duality_rhs_single(env, xi0, start, t):
    """E F(Y(t), ξ0) for a single particle, from the matrix exponential."""
    law = exact_single_particle_law(env, start, t)
    n_interior = env.domain.n_interior
    energies = np.asarray(xi0.xi, dtype=float)
    return float(
        law[:n_interior] @ (2 * energies / env.omega) + law[n_interior:] @ env.bath_temp
    )


def dual_integrand(env, state, f):
    """Product of f at active particle sites and T at storage sites."""
    domain = env.domain
    positions = state.positions
    absorbed = positions >= domain.n_interior

    value = 1.0
    if np.any(~absorbed):
        active = domain.interior[positions[~absorbed]] / domain.L
        value *= float(np.prod(f(active)))
    if np.any(absorbed):
        value *= float(np.prod(env.bath_temp[positions[absorbed] - domain.n_interior]))
    return value


@dataclass
class MomentEstimate:
    value: float
    stderr: float
    replicas: int
    prefactor: float


def _moment_sites(env, x, offsets, n_star):
    domain = env.domain
    center = np.rint(np.asarray(x, dtype=float).reshape(-1) * domain.L).astype(int)
    sites, orders = [], []
    for s in offsets:
        order = int(n_star[tuple(np.atleast_1d(s))] if isinstance(n_star, dict) else n_star)
        if order < 0:
            raise exceptions.DomainError("Moment orders must be nonnegative.")
        node = domain.site_index(center + np.asarray(s, dtype=int))
        if node >= domain.n_interior:
            raise exceptions.DomainError(f"Offset {tuple(np.atleast_1d(s))} leaves the interior.")
        sites.append(node)
        orders.append(order)
    return np.asarray(sites, dtype=np.int64), np.asarray(orders, dtype=np.int64)


def moment_prefactor(env, sites, orders):
    """prod_s Gamma(n_s + ω_s/2) / Gamma(ω_s/2)."""
    half = env.omega[sites] / 2
    return float(np.exp((special.gammaln(orders + half) - special.gammaln(half)).sum()))


def moment_start(env, x, offsets, n_star):
    """Dual start configuration of a moment and its Gamma prefactor."""
    sites, orders = _moment_sites(env, x, offsets, n_star)
    init = DualState.from_sites(env.domain, np.repeat(sites, orders))
    return init, moment_prefactor(env, sites, orders)


def dual_integrand_samples(env, init, horizon, f, rng, replica_ids):
    """dual_integrand after running the dual to ``horizon``, one value per replica."""
    return np.array(
        [
            dual_integrand(
                env,
                simulate_dual(env, init, horizon, rng.for_replica(i).child(Purpose.DUAL)),
                f,
            )
            for i in replica_ids
        ]
    )


def estimate_moment_via_dual(env, x, offsets, n_star, t, f, replicas, rng):
    """Estimate E prod_s ξ_{<xL>+s}(tL²)^{n*_s} from a product-Gamma start with scale f.

    Parameters
    ----------
    x : array_like
        Macroscopic point; ``<xL>`` is the nearest lattice point.
    offsets : sequence of tuple
        Finite offset set S.
    n_star : dict or int
        Moment order per offset, or one order for all offsets.
    t : float
        Macroscopic time; the dual runs to ``t * L**2``.
    """
    init, prefactor = moment_start(env, x, offsets, n_star)
    values = dual_integrand_samples(env, init, t * env.domain.L**2, f, rng, range(replicas))
    stderr = values.std(ddof=1) / np.sqrt(replicas) if replicas > 1 else 0.0
    return MomentEstimate(prefactor * values.mean(), prefactor * stderr, replicas, prefactor)
