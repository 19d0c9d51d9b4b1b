# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Closed-form analytics of the one-dimensional chain.

ψ(m) = (ω_{m-1} + ω_m) / (r_{m-1/2} ω_{m-1} ω_m) for m = 1..L with the
conventions ω_0 := ω_1 and ω_L := ω_{L-1}. Its prefix sums Φ are harmonic for
one dual particle and give the steady-state temperature profile.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import integrate

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.absorption import one_particle_jump_rates, pair_step_outcomes
from kmp_recipe.log import logger

QUAD_TOLERANCE = 1e-10
DRIFT_MATCH_TOLERANCE = 1e-10


def _chain_view(env):
    if env.domain.d != 1:
        raise exceptions.DomainError("ψ is only defined for one-dimensional environments.")
    return env.chain()


def compute_psi(env):
    view = _chain_view(env)
    omega = view.omega_extended
    left, right = omega[:-1], omega[1:]
    return (left + right) / (view.rates * left * right)


def lattice_index(x, L):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise exceptions.DomainError("Macroscopic positions must lie in [0, 1].")
    # round first so that x = m/L is not floored to m - 1
    return np.floor(np.round(x * L, 9)).astype(np.int64)


@dataclass
class Profile1D:
    psi: np.ndarray
    t_left: float
    t_right: float

    @property
    def L(self):
        return self.psi.shape[0]

    @property
    def phi_under(self):
        """Φ(0) .. Φ(L), with Φ(0) = 0."""
        return np.concatenate([[0.0], np.cumsum(self.psi)])

    def A(self, x):
        phi = self.phi_under
        values = phi[lattice_index(x, self.L)] / phi[-1]
        return float(values) if np.ndim(values) == 0 else values

    def u(self, x):
        a = self.A(x)
        return (1 - a) * self.t_left + a * self.t_right

    def to_frame(self):
        m = np.arange(1, self.L + 1)
        return pd.DataFrame(
            {
                "m": m,
                "psi": self.psi,
                "phi_under": self.phi_under[1:],
                "A": self.A(m / self.L),
                "u": self.u(m / self.L),
            }
        )

    @classmethod
    def from_env(cls, env):
        view = _chain_view(env)
        return cls(compute_psi(env), view.t_left, view.t_right)


def profile_A(env, x):
    """Σ_{m <= floor(xL)} ψ(m) / Σ_{m <= L} ψ(m)."""
    return Profile1D.from_env(env).A(x)


def steady_temperature(env, x):
    """u(x) = (1 - A(x)) T(0) + A(x) T(1)."""
    return Profile1D.from_env(env).u(x)


def _quad(func, upper):
    value, _ = integrate.quad(func, 0.0, upper, epsabs=QUAD_TOLERANCE, epsrel=QUAD_TOLERANCE)
    return value


def limit_A_random_omega(kappa, x):
    """Limit of A for ω_v drawn from kappa(v/L)."""
    weights = list(zip(kappa.omegas, kappa.weights))

    def integrand(y):
        return sum(weight(y) / omega for omega, weight in weights)

    return _quad(integrand, x) / _quad(integrand, 1.0)


def limit_A_rho(rho, x):
    """Limit of A for edge rates rho(v/L)."""

    def integrand(y):
        return 1.0 / rho(y)

    return _quad(integrand, x) / _quad(integrand, 1.0)


def max_limit_deviation(env, limit, grid):
    profile = Profile1D.from_env(env)
    grid = np.asarray(grid, dtype=float)
    return float(np.max(np.abs(profile.A(grid) - np.array([limit(x) for x in grid]))))


@dataclass(frozen=True)
class PairConfig:
    """Two dual particles both at i (``same``) or at i and i+1 (``adjacent``)."""

    kind: str
    i: int

    def __post_init__(self):
        if self.kind not in ("same", "adjacent"):
            raise exceptions.ValueError(f"Unknown pair configuration '{self.kind}'.")

    @property
    def positions(self):
        return (self.i, self.i) if self.kind == "same" else (self.i, self.i + 1)


def _check_drift_domain(config, L):
    i = config.i
    last = i if config.kind == "same" else i + 1
    if i < 2 or last > L - 2:
        raise exceptions.DomainError(
            f"{config.kind} configuration at i={i} touches the boundary conventions (L={L})."
        )


def _pair_functionals(psi):
    phi = np.concatenate([[0.0], np.cumsum(psi)])
    total = phi[-1]

    def S(a, b):
        return phi[a] * phi[b] + (total - phi[a]) * (total - phi[b])

    def T(a, b):
        return abs(phi[a] - phi[b])

    return S, T


def drift_S_T(env, config):
    """One-step drifts (E ΔS, E ΔT) from the closed forms.

    The closed forms are evaluated exactly as written. Both T formulas
    disagree with the generator; see `compare_drifts`.
    """
    view = _chain_view(env)
    _check_drift_domain(config, view.L)
    psi = np.concatenate([[np.nan], compute_psi(env)])
    w = view.omega_extended
    r = np.concatenate([[np.nan], view.rates])
    i = config.i

    # r[k] is r_{k-1/2}
    r_left, r_mid, r_right = r[i], r[i + 1], r[i + 2]

    if config.kind == "same":
        right_term = (
            r_mid / (r_left + r_mid)
            * w[i + 1] * (w[i + 1] + 2) / ((w[i] + w[i + 1]) * (w[i] + w[i + 1] + 2))
        )
        left_term = (
            r_left / (r_left + r_mid)
            * w[i - 1] * (w[i - 1] + 2) / ((w[i - 1] + w[i]) * (w[i - 1] + w[i] + 2))
        )
        drift_S = 2 * psi[i] ** 2 * (right_term + left_term)
        drift_T = psi[i + 1] * r_mid / (r_left + r_mid) * w[i] * w[i + 1] / (w[i] + w[i + 1])
    else:
        drift_S = (
            -psi[i + 1] ** 2
            * 2 * r_mid / (r_left + r_mid + r_right)
            * w[i] * w[i + 1] / ((w[i] + w[i + 1]) * (w[i] + w[i + 1] + 2))
        )
        drift_T = psi[i + 1] / 3 * w[i] * w[i + 1] / (w[i] + w[i + 1] + 2)

    return float(drift_S), float(drift_T)


def drift_S_T_exact(env, config, convention="literal"):
    """One-step drifts (E ΔS, E ΔT) by summing over the generator outcomes.

    A step is a ring of any edge touching a particle, including rings that
    move nothing.
    """
    view = _chain_view(env)
    _check_drift_domain(config, view.L)
    S, T = _pair_functionals(compute_psi(env))

    a, b = config.positions
    outcomes = pair_step_outcomes(view, a, b, convention)
    total = sum(rate for rate, _ in outcomes)
    drift_S = sum(rate * (S(*target) - S(a, b)) for rate, target in outcomes) / total
    drift_T = sum(rate * (T(*target) - T(a, b)) for rate, target in outcomes) / total
    return float(drift_S), float(drift_T)


@dataclass(frozen=True)
class DriftComparison:
    config: PairConfig
    printed_S: float
    printed_T: float
    exact_S: float
    exact_T: float

    @property
    def S_matches(self):
        return abs(self.printed_S - self.exact_S) <= DRIFT_MATCH_TOLERANCE

    @property
    def T_matches(self):
        return abs(self.printed_T - self.exact_T) <= DRIFT_MATCH_TOLERANCE

    def as_row(self):
        return {
            "kind": self.config.kind,
            "i": self.config.i,
            "printed_dS": self.printed_S,
            "exact_dS": self.exact_S,
            "printed_dT": self.printed_T,
            "exact_dT": self.exact_T,
            "dS_match": self.S_matches,
            "dT_match": self.T_matches,
        }


def compare_drifts(env, config):
    printed = drift_S_T(env, config)
    exact = drift_S_T_exact(env, config)
    comparison = DriftComparison(config, *printed, *exact)
    if not (comparison.S_matches and comparison.T_matches):
        logger.debug(
            f"Closed-form drift differs from the generator at {config}: "
            f"printed={printed}, exact={exact}."
        )
    return comparison


def phi_martingale_increment(env, m, convention="literal"):
    """E[Φ(next site)] - Φ(m) for the jump chain of one dual particle."""
    L = env.domain.L
    if not 1 <= m <= L - 1:
        raise exceptions.DomainError(f"Site {m} is not an interior site of the chain.")
    psi = compute_psi(env)
    left, right = one_particle_jump_rates(env, m, convention)
    # Φ(m) - Φ(m-1) = ψ(m) and Φ(m+1) - Φ(m) = ψ(m+1)
    return float((right * psi[m] - left * psi[m - 1]) / (left + right))
