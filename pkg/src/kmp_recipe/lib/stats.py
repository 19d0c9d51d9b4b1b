# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Empirical moments, local-equilibrium tests and pass/fail gates.

Standard errors are always computed across independent replicas. When a
replica contributes several correlated snapshots, they are first averaged
within the replica.
"""

from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from scipy import stats

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.forward import SnapshotObserver, init_product_gamma, simulate
from kmp_recipe.lib.profiles import Constant
from kmp_recipe.lib.sampling import GammaParams, Purpose, gamma_moment

MAX_MOMENT_ORDER = 4
KS_CONFIDENCE = 0.99


@dataclass
class Gate:
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool
    detail: str = ""

    @classmethod
    def sigma(cls, name, value, reference, stderr, n_sigma=3.0):
        tolerance = n_sigma * stderr
        if stderr > 0:
            passed = abs(value - reference) <= tolerance
        else:
            passed = bool(np.isclose(value, reference, rtol=1e-12, atol=1e-12))
        return cls(
            name,
            float(value),
            float(reference),
            float(tolerance),
            bool(passed),
            f"{n_sigma:g} sigma",
        )

    @classmethod
    def relative(cls, name, value, reference, rel_tol):
        passed = abs(value - reference) <= rel_tol * abs(reference)
        return cls(name, float(value), float(reference), float(rel_tol), bool(passed), "relative")

    @classmethod
    def interval(cls, name, value, low, high):
        return cls(
            name,
            float(value),
            float((low + high) / 2),
            float((high - low) / 2),
            bool(low <= value <= high),
            f"[{low:g}, {high:g}]",
        )

    @classmethod
    def upper_bound(cls, name, value, limit):
        return cls(name, float(value), float(limit), 0.0, bool(value < limit), "upper bound")

    @classmethod
    def lower_bound(cls, name, value, limit):
        return cls(name, float(value), float(limit), 0.0, bool(value > limit), "lower bound")

    @classmethod
    def max_abs_z(cls, name, z, n_sigma=3.0):
        """Every z-score of a table within n_sigma."""
        worst = float(np.max(np.abs(np.asarray(z, dtype=float)), initial=0.0))
        return cls(name, worst, 0.0, float(n_sigma), worst <= n_sigma, "max |z|")

    def to_dict(self):
        return asdict(self)


def mean_stderr(values, axis=0):
    values = np.asarray(values, dtype=float)
    count = values.shape[axis]
    mean = values.mean(axis=axis)
    if count < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=axis, ddof=1) / np.sqrt(count)


def bootstrap_stderr(values, n_boot, rng):
    """Bootstrap standard error of the mean, resampling whole replicas."""
    values = np.asarray(values, dtype=float)
    count = values.shape[0]
    gen = rng.generator
    means = np.array(
        [values[gen.integers(0, count, count)].mean(axis=0) for _ in range(n_boot)]
    )
    return means.std(axis=0, ddof=1)


def _replica_moments(samples, k):
    """Per-replica k-th moments: samples is (replicas,) or (replicas, snapshots)."""
    samples = np.asarray(samples, dtype=float)
    powered = samples**k
    return powered if powered.ndim == 1 else powered.mean(axis=1)


def reference_moment(k, shape, scale):
    """Gamma moment allowing a point mass at 0 for scale 0."""
    if scale == 0:
        return 0.0 if k > 0 else 1.0
    return gamma_moment(k, GammaParams(shape, scale))


def moment_table(samples, shape, scale, max_order=MAX_MOMENT_ORDER):
    """Empirical moments k=1..max_order with stderrs against Gamma(shape, scale)."""
    if not 1 <= max_order <= MAX_MOMENT_ORDER:
        raise exceptions.ValueError(f"Moment order is capped at {MAX_MOMENT_ORDER}.")
    rows = []
    for k in range(1, max_order + 1):
        mean, stderr = mean_stderr(_replica_moments(samples, k))
        reference = reference_moment(k, shape, scale)
        rows.append(
            {
                "k": k,
                "empirical": float(mean),
                "stderr": float(stderr),
                "reference": reference,
                "rel_error": (mean - reference) / reference if reference else np.nan,
                "z": (mean - reference) / stderr if stderr > 0 else 0.0,
            }
        )
    return pd.DataFrame(rows)


@dataclass
class GammaMarginalReport:
    table: pd.DataFrame
    ks_distance: float
    ks_critical: float
    ks_pvalue: float
    n_sigma: float

    @property
    def moments_ok(self):
        within = (self.table["z"].abs() <= self.n_sigma) & (
            self.table["mixed_z"].abs() <= self.n_sigma
        )
        return bool(within.all())

    @property
    def ks_ok(self):
        return self.ks_distance < self.ks_critical

    @property
    def passed(self):
        return self.moments_ok and self.ks_ok


def gamma_marginal_test(samples, omega, scale_ref, n_sigma=3.0, max_order=MAX_MOMENT_ORDER):
    """Compare site samples with Gamma(ω/2, scale_ref).

    ``samples`` is either one value per replica, or an array
    (replicas, snapshots). In the second case the KS critical value is taken
    at the replica count, since snapshots of one replica are correlated.
    """
    samples = np.asarray(samples, dtype=float)
    shape = omega / 2
    table = moment_table(samples, shape, scale_ref, max_order)

    flat = samples.reshape(-1)
    n_effective = samples.shape[0]
    if scale_ref > 0:
        ks = stats.kstest(flat, stats.gamma(a=shape, scale=scale_ref).cdf)
        distance, pvalue = float(ks.statistic), float(ks.pvalue)
    else:
        distance = float(np.mean(flat > 0))
        pvalue = 1.0 if distance == 0 else 0.0
    critical = float(stats.kstwo.ppf(KS_CONFIDENCE, n_effective))
    return GammaMarginalReport(table, distance, critical, pvalue, n_sigma)


@dataclass
class FactorizationReport:
    table: pd.DataFrame
    n_sigma: float

    @property
    def passed(self):
        within = (self.table["z"].abs() <= self.n_sigma) & (
            self.table["mixed_z"].abs() <= self.n_sigma
        )
        return bool(within.all())

    @property
    def max_abs_correlation(self):
        return float(self.table["correlation"].abs().max())


def joint_factorization_test(samples, n_sigma=3.0, expected_means=None):
    """Cross-covariances of jointly sampled site energies, one row per replica.

    Each mixed moment E[ξ_i ξ_j] is also gated against expected_means[i] *
    expected_means[j], or against the product of the sample means when no
    expectation is given.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] < 2:
        raise exceptions.ValueError("Need joint samples of shape (replicas, sites >= 2).")

    count, width = samples.shape
    means = samples.mean(axis=0)
    if expected_means is None:
        expected_means = means
    expected_means = np.asarray(expected_means, dtype=float)
    if expected_means.shape != (width,):
        raise exceptions.ValueError(
            f"Need {width} expected means, got shape {expected_means.shape}."
        )
    centered = samples - means
    scale = samples.std(axis=0, ddof=1)

    rows = []
    for i in range(width):
        for j in range(i + 1, width):
            products = centered[:, i] * centered[:, j]
            covariance = products.sum() / (count - 1)
            stderr = products.std(ddof=1) / np.sqrt(count)
            denominator = scale[i] * scale[j]
            mixed = samples[:, i] * samples[:, j]
            mixed_stderr = mixed.std(ddof=1) / np.sqrt(count)
            expected_product = expected_means[i] * expected_means[j]
            mixed_z = (mixed.mean() - expected_product) / mixed_stderr if mixed_stderr > 0 else 0.0
            rows.append(
                {
                    "i": i,
                    "j": j,
                    "covariance": covariance,
                    "stderr": stderr,
                    "correlation": covariance / denominator if denominator > 0 else 0.0,
                    "mixed_moment": float(mixed.mean()),
                    "product_of_means": float(means[i] * means[j]),
                    "expected_product": float(expected_product),
                    "z": covariance / stderr if stderr > 0 else 0.0,
                    "mixed_z": float(mixed_z),
                }
            )
    return FactorizationReport(pd.DataFrame(rows), n_sigma)


def constant_temperature(env):
    temps = np.unique(env.bath_temp)
    if temps.size != 1:
        raise exceptions.DomainError("This test needs one common bath temperature.")
    return float(temps[0])


def equilibrium_replica(env, temperature, checkpoints, rng):
    """Energies at the checkpoints, started from the product Gamma measure."""
    init = init_product_gamma(env, Constant(temperature), rng.child(Purpose.INITIAL_STATE))
    observer = SnapshotObserver(checkpoints)
    simulate(env, init, float(checkpoints[-1]), rng.child(Purpose.FORWARD), [observer])
    return observer.values


@dataclass
class InvarianceReport:
    table: pd.DataFrame
    n_sigma: float

    @property
    def passed(self):
        return bool((self.table["z"].abs() <= self.n_sigma).all())


def invariance_table(values, omega, temperature, checkpoints, max_order=3):
    """values has shape (replicas, checkpoints, sites)."""
    rows = []
    for c, epoch in enumerate(checkpoints):
        for site in range(values.shape[2]):
            table = moment_table(values[:, c, site], omega[site] / 2, temperature, max_order)
            table.insert(0, "site", site)
            table.insert(0, "time", epoch)
            rows.append(table)
    return pd.concat(rows, ignore_index=True)


def equilibrium_invariance_test(
    env, checkpoints, replicas, rng, temperature=None, n_sigma=3.0, max_order=3
):
    """Start from the product measure and check per-site moments over time."""
    temperature = constant_temperature(env) if temperature is None else temperature
    checkpoints = np.asarray(checkpoints, dtype=float)
    values = np.stack(
        [
            equilibrium_replica(env, temperature, checkpoints, rng.for_replica(i))
            for i in range(replicas)
        ]
    )
    return InvarianceReport(
        invariance_table(values, env.omega, temperature, checkpoints, max_order), n_sigma
    )


@dataclass
class SplitReport:
    statistics: tuple
    pvalues: tuple
    alpha: float

    @property
    def passed(self):
        return all(p > self.alpha for p in self.pvalues)


def beta_split_stationarity_test(samples, omega_pair, rng, alpha=0.01):
    """Two-sample test of (Z s, (1-Z) s) against (ξ_1, ξ_2), s = ξ_1 + ξ_2.

    Z ~ Beta(ω_1/2, ω_2/2) is drawn independently of the samples.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise exceptions.ValueError("Need pair samples of shape (n, 2).")
    total = samples.sum(axis=1)
    z = rng.generator.beta(omega_pair[0] / 2, omega_pair[1] / 2, size=total.shape[0])
    split = np.column_stack([z * total, (1 - z) * total])

    results = [stats.ks_2samp(samples[:, j], split[:, j]) for j in range(2)]
    return SplitReport(
        tuple(float(r.statistic) for r in results),
        tuple(float(r.pvalue) for r in results),
        alpha,
    )


def hydro_replica(env, f, sites, t, rng):
    """2ξ/ω at the sites at macroscopic time t, from a product Gamma start."""
    init = init_product_gamma(env, f, rng.child(Purpose.INITIAL_STATE))
    horizon = t * env.domain.L**2
    state = simulate(env, init, horizon, rng.child(Purpose.FORWARD)).state
    return 2 * state.xi[sites] / env.omega[sites]


def hydro_table(values, points, reference, rel_tol):
    """values: (replicas, probes); reference: PDE values at the probes."""
    mean, stderr = mean_stderr(values)
    reference = np.asarray(reference, dtype=float)
    points = np.atleast_2d(points)
    frame = pd.DataFrame({f"x{j + 1}": points[:, j] for j in range(points.shape[1])})
    frame["mc"] = mean
    frame["stderr"] = stderr
    frame["pde"] = reference
    frame["rel_error"] = np.abs(mean - reference) / np.abs(reference)
    frame["passed"] = frame["rel_error"] <= rel_tol
    return frame


def hydro_comparison(env, f, points, t, replicas, rng, reference, rel_tol=0.05):
    """Forward Monte Carlo of E 2ξ/ω at <xL> against a reference u(t, x)."""
    sites = np.array([env.domain.nearest_site(x) for x in np.atleast_2d(points)])
    values = np.stack(
        [hydro_replica(env, f, sites, t, rng.for_replica(i)) for i in range(replicas)]
    )
    return hydro_table(values, points, reference, rel_tol)


def adjacent_covariance(values, omega):
    """Per-replica mean normalized covariance of 2ξ/ω between neighbouring chain sites.

    values has shape (replicas, snapshots, sites) with the sites in chain
    order. Each covariance is taken over the snapshots of one replica and
    divided by the two marginal standard deviations; a pair with a site
    that never moves counts as 0.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 3 or values.shape[2] < 2:
        raise exceptions.ValueError("Need values of shape (replicas, snapshots, sites >= 2).")
    energy = 2 * values / np.asarray(omega, dtype=float)
    centered = energy - energy.mean(axis=1, keepdims=True)
    covariance = (centered[:, :, :-1] * centered[:, :, 1:]).mean(axis=1)
    std = np.sqrt((centered**2).mean(axis=1))
    scale = std[:, :-1] * std[:, 1:]
    normalized = np.divide(covariance, scale, out=np.zeros_like(covariance), where=scale > 0)
    return normalized.mean(axis=1)
