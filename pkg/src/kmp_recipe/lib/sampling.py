# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Seeded random streams and the Gamma/Beta/beta-binomial primitives.

Every stochastic component of the package draws from an `RngStream`. A stream
is identified by ``(seed, stream_id, path)``; the triple is turned into a
``numpy.random.SeedSequence`` spawn key that seeds a Philox counter-based
generator. Replica ``i`` of a run always owns stream id ``i``, so results do
not depend on how replicas are scheduled.
"""

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy import special

from kmp_recipe.lib import exceptions

_LOG_FLOAT_MAX = math.log(np.finfo(float).max)


class Purpose(IntEnum):
    """Child-stream keys for the independent uses of randomness in a replica."""

    ENVIRONMENT = 1
    INITIAL_STATE = 2
    FORWARD = 3
    DUAL = 4
    BOOTSTRAP = 5
    SIMULATION = 6


@dataclass
class RngStream:
    seed: int
    stream_id: int = 0
    path: tuple = ()
    _generator: np.random.Generator = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        for name, value in (("seed", self.seed), ("stream_id", self.stream_id)):
            if not 0 <= int(value) < 2**64:
                raise exceptions.ValueError(f"{name} must be a 64-bit unsigned integer.")
        self.path = tuple(int(key) for key in self.path)

    @property
    def generator(self):
        if self._generator is None:
            seed_seq = np.random.SeedSequence(
                entropy=int(self.seed), spawn_key=(int(self.stream_id), *self.path)
            )
            self._generator = np.random.Generator(np.random.Philox(seed_seq))
        return self._generator

    def for_replica(self, replica_id):
        return RngStream(self.seed, int(replica_id), self.path)

    def child(self, *keys):
        return RngStream(self.seed, self.stream_id, self.path + tuple(keys))


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise exceptions.ValueError(f"Gamma shape must be positive, got {self.shape}.")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise exceptions.ValueError(f"Gamma scale must be positive, got {self.scale}.")


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise exceptions.ValueError(f"Beta parameter a must be positive, got {self.a}.")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise exceptions.ValueError(f"Beta parameter b must be positive, got {self.b}.")

    @classmethod
    def from_omegas(cls, omega_u, omega_v):
        return cls(omega_u / 2, omega_v / 2)


def sample_gamma(p, rng):
    # numpy uses the Marsaglia-Tsang squeeze for shape >= 1 and the
    # U**(1/shape) boost below 1.
    return float(rng.generator.gamma(p.shape, p.scale))


def sample_beta(p, rng):
    return float(sample_beta_array(p.a, p.b, rng))


def sample_gamma_array(shape, scale, rng):
    """Vectorised Gamma draws. A zero scale gives a point mass at 0."""
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(scale < 0):
        raise exceptions.ValueError("Gamma scale must be nonnegative.")
    return rng.generator.gamma(shape, scale)


def sample_beta_array(a, b, rng):
    """Beta draws on the open interval.

    A draw that rounds to 0 or 1 is moved one ulp inside.
    """
    values = np.asarray(rng.generator.beta(a, b), dtype=float)
    return np.clip(values, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def log_gamma_moment(k, p):
    return k * math.log(p.scale) + special.gammaln(p.shape + k) - special.gammaln(p.shape)


def gamma_moment(k, p):
    """Return E[X**k] = scale**k * Gamma(shape + k) / Gamma(shape)."""
    if k < 0 or int(k) != k:
        raise exceptions.DomainError(f"Moment order must be a nonnegative integer, got {k}.")
    if k == 0:
        return 1.0

    log_value = log_gamma_moment(int(k), p)
    if log_value > _LOG_FLOAT_MAX:
        raise exceptions.MomentOverflowError(
            f"Gamma moment of order {k} with shape {p.shape} and scale {p.scale}"
            " exceeds the floating point range."
        )
    return math.exp(log_value)


def beta_moment(k, p):
    """Return E[q**k] for q ~ Beta(a, b)."""
    if k < 0 or int(k) != k:
        raise exceptions.DomainError(f"Moment order must be a nonnegative integer, got {k}.")
    return math.exp(special.betaln(p.a + k, p.b) - special.betaln(p.a, p.b))


def log_beta_binomial_pmf(n, k, p):
    if n < 0 or not 0 <= k <= n:
        raise exceptions.DomainError(f"Beta-binomial needs 0 <= k <= n, got n={n}, k={k}.")
    log_choose = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    return float(
        log_choose + special.betaln(k + p.a, n - k + p.b) - special.betaln(p.a, p.b)
    )


def beta_binomial_pmf(n, k, p):
    """Probability that k of n pooled particles stay at the first site."""
    return math.exp(log_beta_binomial_pmf(n, k, p))


def sample_labeled_split(particles, p, rng):
    """Split labeled particles between the two endpoints of an edge.

    A success probability q ~ Beta(a, b) is drawn, then every particle is
    kept at the first endpoint independently with probability q.

    Returns
    -------
    kept, sent : tuple of particle ids
        Particles assigned to the first and the second endpoint, in input order.
    """
    particles = tuple(particles)
    if not particles:
        return (), ()

    q = sample_beta(p, rng)
    stays = rng.generator.random(len(particles)) < q

    kept = tuple(pid for pid, stay in zip(particles, stays) if stay)
    sent = tuple(pid for pid, stay in zip(particles, stays) if not stay)
    return kept, sent


class AliasTable:
    """Walker alias table for O(1) categorical draws from static weights."""

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            raise exceptions.ValueError("Alias table needs a non-empty weight vector.")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise exceptions.ValueError("Alias table weights must be finite and nonnegative.")

        total = weights.sum()
        if total <= 0:
            raise exceptions.ValueError("Alias table weights must not all be zero.")

        n = weights.size
        self.total = float(total)
        self.probabilities = weights / total

        scaled = self.probabilities * n
        prob = np.ones(n)
        alias = np.arange(n)

        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)

        # Leftovers are 1 up to rounding.
        self._prob = prob
        self._alias = alias
        self._n = n

    def __len__(self):
        return self._n

    def sample(self, generator, size):
        columns = generator.integers(0, self._n, size=size)
        accept = generator.random(size) < self._prob[columns]
        return np.where(accept, columns, self._alias[columns])
