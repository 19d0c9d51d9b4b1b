# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Named built-in macroscopic functions.

Scenario descriptors refer to rate fields R and rho, temperature and initial
profiles T and f, and degree-of-freedom laws kappa by name plus parameters, so
no expression parser is needed. Every profile maps an array of macroscopic
points of shape (n, d) to an array of n values; a single point of shape (d,)
returns a float. Vector parameters of length one apply to every axis.
"""

from dataclasses import asdict, dataclass

import numpy as np

from kmp_recipe.lib import exceptions

_REGISTRY = {}


def register(kind):
    def decorator(cls):
        cls.kind = kind
        _REGISTRY[kind] = cls
        return cls

    return decorator


class Profile:
    kind = None

    def evaluate(self, points):
        raise NotImplementedError

    def __call__(self, x):
        points = np.asarray(x, dtype=float)
        scalar = points.ndim <= 1
        if scalar:
            points = points.reshape(1, -1)
        values = np.asarray(self.evaluate(points), dtype=float)
        return float(values[0]) if scalar else values

    def to_dict(self):
        return {"kind": self.kind, **asdict(self)}


def _components(vector, d, name):
    vector = np.asarray(vector, dtype=float).reshape(-1)
    if vector.shape[0] == 1:
        return np.full(d, vector[0])
    if vector.shape[0] < d:
        raise exceptions.ValueError(f"Profile parameter '{name}' needs {d} components.")
    return vector[:d]


@register("constant")
@dataclass(frozen=True)
class Constant(Profile):
    value: float

    def evaluate(self, points):
        return np.full(points.shape[0], float(self.value))


@register("affine")
@dataclass(frozen=True)
class Affine(Profile):
    offset: float
    gradient: tuple = (0.0,)

    def evaluate(self, points):
        gradient = _components(self.gradient, points.shape[1], "gradient")
        return self.offset + points @ gradient


@register("exponential")
@dataclass(frozen=True)
class Exponential(Profile):
    amplitude: float
    rate: tuple = (0.0,)

    def evaluate(self, points):
        rate = _components(self.rate, points.shape[1], "rate")
        return self.amplitude * np.exp(points @ rate)


@register("sine_product")
@dataclass(frozen=True)
class SineProduct(Profile):
    """offset + amplitude * prod_j sin(k_j * pi * (x_j - lower_j) / (upper_j - lower_j))"""

    amplitude: float
    wavenumbers: tuple = (1,)
    lower: tuple = (-1.0,)
    upper: tuple = (1.0,)
    offset: float = 0.0

    def evaluate(self, points):
        d = points.shape[1]
        k = _components(self.wavenumbers, d, "wavenumbers")
        lower = _components(self.lower, d, "lower")
        upper = _components(self.upper, d, "upper")
        phase = np.pi * k * (points - lower) / (upper - lower)
        return self.offset + self.amplitude * np.prod(np.sin(phase), axis=1)


@register("step")
@dataclass(frozen=True)
class Step(Profile):
    """left below the threshold on one axis, right at or above it."""

    left: float
    right: float
    axis: int = 0
    threshold: float = 0.0

    def evaluate(self, points):
        return np.where(points[:, self.axis] < self.threshold, self.left, self.right)


def from_dict(spec, field="profile"):
    if isinstance(spec, Profile):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise exceptions.ConfigError(field, "expected a number or an object with 'kind'.")

    params = dict(spec)
    kind = params.pop("kind")
    cls = _REGISTRY.get(kind)
    if cls is None:
        known = ", ".join(sorted(_REGISTRY))
        raise exceptions.ConfigError(field, f"unknown profile kind '{kind}' (known: {known}).")

    params = {
        key: tuple(value) if isinstance(value, list) else value
        for key, value in params.items()
    }
    try:
        return cls(**params)
    except TypeError as e:
        raise exceptions.ConfigError(field, f"invalid parameters for '{kind}': {e}") from e


def registered_kinds():
    return sorted(_REGISTRY)


@dataclass(frozen=True)
class Kappa:
    """Probability law of the degrees of freedom as a function of position.

    ``omegas[i]`` is drawn with probability ``weights[i](y)`` at y in [0, 1].
    """

    omegas: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.omegas) != len(self.weights) or not self.omegas:
            raise exceptions.ValueError("kappa needs one weight profile per omega value.")
        if any(int(omega) != omega or omega < 1 for omega in self.omegas):
            raise exceptions.ValueError("kappa omega values must be positive integers.")

    def matrix(self, y):
        """Weights at the points y (shape (n,)) as an array of shape (n, K)."""
        points = np.asarray(y, dtype=float).reshape(-1, 1)
        return np.column_stack([weight(points) for weight in self.weights])

    def validate(self, y, atol=1e-9):
        probabilities = self.matrix(y)
        if np.any(probabilities < -atol):
            raise exceptions.ValueError("kappa weights must be nonnegative.")
        deviation = np.max(np.abs(probabilities.sum(axis=1) - 1.0))
        if deviation > atol:
            raise exceptions.ValueError(
                f"kappa weights must sum to 1 within {atol:g}; deviation {deviation:.3e}."
            )
        return np.clip(probabilities, 0.0, None)

    def to_dict(self):
        return [
            {"omega": int(omega), "weight": weight.to_dict()}
            for omega, weight in zip(self.omegas, self.weights)
        ]

    @classmethod
    def from_list(cls, spec, field="kappa"):
        if not isinstance(spec, list) or not spec:
            raise exceptions.ConfigError(field, "expected a non-empty list of {omega, weight}.")
        omegas, weights = [], []
        for i, entry in enumerate(spec):
            if not isinstance(entry, dict) or "omega" not in entry or "weight" not in entry:
                raise exceptions.ConfigError(f"{field}[{i}]", "expected {omega, weight}.")
            omega = entry["omega"]
            if isinstance(omega, bool) or not isinstance(omega, int) or omega < 1:
                raise exceptions.ConfigError(
                    f"{field}[{i}].omega", f"expected a positive integer, got {omega!r}."
                )
            omegas.append(omega)
            weights.append(from_dict(entry["weight"], f"{field}[{i}].weight"))
        try:
            return cls(tuple(omegas), tuple(weights))
        except exceptions.ValueError as e:
            raise exceptions.ConfigError(field, str(e)) from e
