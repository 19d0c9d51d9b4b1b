# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Lattice domains, heat-bath layers and the inhomogeneous environments.

Nodes are numbered with the interior sites first (``0 .. n_interior - 1``) and
the boundary sites after them. Every edge has an interior first endpoint
``edge_u``; its second endpoint ``edge_v`` is a boundary node exactly when the
edge connects the system to a heat bath.
"""

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from kmp_recipe.lib import exceptions, profiles
from kmp_recipe.lib.sampling import AliasTable
from kmp_recipe.log import logger


@dataclass(frozen=True)
class BoxShape:
    """Open axis-aligned box prod_j (lower_j, upper_j)."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise exceptions.ValueError("Box bounds must have the same positive length.")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise exceptions.ValueError("Box lower bounds must be below the upper bounds.")

    @property
    def d(self):
        return len(self.lower)

    @classmethod
    def unit_interval(cls):
        return cls((0.0,), (1.0,))

    @classmethod
    def symmetric_cube(cls, d):
        return cls((-1.0,) * d, (1.0,) * d)

    @classmethod
    def default(cls, d):
        return cls.unit_interval() if d == 1 else cls.symmetric_cube(d)


@dataclass(frozen=True, eq=False)
class LatticeDomain:
    d: int
    L: int
    interior: np.ndarray
    boundary: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    shape: BoxShape = None

    @property
    def n_interior(self):
        return self.interior.shape[0]

    @property
    def n_boundary(self):
        return self.boundary.shape[0]

    @property
    def n_edges(self):
        return self.edge_u.shape[0]

    @functools.cached_property
    def nodes(self):
        return np.vstack([self.interior, self.boundary.reshape(-1, self.d)])

    @functools.cached_property
    def is_boundary_edge(self):
        return self.edge_v >= self.n_interior

    @property
    def interior_edges(self):
        return np.flatnonzero(~self.is_boundary_edge)

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.is_boundary_edge)

    @functools.cached_property
    def node_index(self):
        return {tuple(int(c) for c in node): i for i, node in enumerate(self.nodes)}

    def site_index(self, site):
        try:
            return self.node_index[tuple(int(c) for c in np.atleast_1d(site))]
        except KeyError:
            raise exceptions.DomainError(f"Site {tuple(site)} is not part of the domain.")

    def is_interior_node(self, node):
        return node < self.n_interior

    @functools.cached_property
    def incident_edges(self):
        """Edge indices touching each interior node."""
        incident = [[] for _ in range(self.n_interior)]
        for e, (u, v) in enumerate(zip(self.edge_u.tolist(), self.edge_v.tolist())):
            incident[u].append(e)
            if v < self.n_interior:
                incident[v].append(e)
        return [np.asarray(edges, dtype=np.int64) for edges in incident]

    def degree(self, node):
        return len(self.incident_edges[node])

    def macroscopic(self, nodes=None):
        coords = self.nodes if nodes is None else self.nodes[np.asarray(nodes)]
        return coords / self.L

    @functools.cached_property
    def edge_midpoints(self):
        return (self.nodes[self.edge_u] + self.nodes[self.edge_v]) / (2 * self.L)

    def nearest_site(self, x):
        """Interior node index of the lattice point closest to x*L."""
        site = np.rint(np.asarray(x, dtype=float).reshape(-1) * self.L).astype(int)
        index = self.node_index.get(tuple(site.tolist()))
        if index is None or index >= self.n_interior:
            raise exceptions.DomainError(
                f"Point {tuple(x)} is not inside the domain at L={self.L}."
            )
        return index


def build_box_domain(d, L, shape=None, closed=False):
    """Build D_L = L*D ∩ Z^d for an open box D together with its bath layer.

    With ``closed=True`` the bath layer is dropped and the system exchanges no
    energy with the outside.
    """
    shape = BoxShape.default(d) if shape is None else shape
    if shape.d != d:
        raise exceptions.ValueError(f"Box shape has dimension {shape.d}, expected {d}.")
    if int(L) != L or L < 1:
        raise exceptions.ValueError(f"Scale L must be a positive integer, got {L}.")

    ranges = []
    for lo, hi in zip(shape.lower, shape.upper):
        first = math.floor(L * lo) + 1
        last = math.ceil(L * hi) - 1
        ranges.append(range(first, last + 1))

    interior = [tuple(site) for site in itertools.product(*ranges)]
    if not interior:
        raise exceptions.ValueError(f"Domain at L={L} has an empty interior.")

    interior_index = {site: i for i, site in enumerate(interior)}

    raw_edges = []
    boundary_sites = set()
    for i, site in enumerate(interior):
        for axis in range(d):
            for step in (-1, 1):
                neighbor = list(site)
                neighbor[axis] += step
                neighbor = tuple(neighbor)

                if neighbor in interior_index:
                    if step == 1:
                        raw_edges.append((i, neighbor, False))
                elif not closed:
                    boundary_sites.add(neighbor)
                    raw_edges.append((i, neighbor, True))

    boundary = sorted(boundary_sites)
    boundary_index = {site: len(interior) + j for j, site in enumerate(boundary)}

    edge_u = np.fromiter((u for u, _, _ in raw_edges), dtype=np.int64, count=len(raw_edges))
    edge_v = np.fromiter(
        (
            boundary_index[v] if is_bath else interior_index[v]
            for _, v, is_bath in raw_edges
        ),
        dtype=np.int64,
        count=len(raw_edges),
    )

    domain = LatticeDomain(
        d=d,
        L=int(L),
        interior=np.asarray(interior, dtype=np.int64).reshape(-1, d),
        boundary=np.asarray(boundary, dtype=np.int64).reshape(-1, d),
        edge_u=edge_u,
        edge_v=edge_v,
        shape=shape,
    )
    _check_connected(domain)
    return domain


def _check_connected(domain):
    mask = ~domain.is_boundary_edge
    n = domain.n_interior
    if n == 1:
        return
    graph = coo_matrix(
        (np.ones(mask.sum()), (domain.edge_u[mask], domain.edge_v[mask])), shape=(n, n)
    )
    n_components, _ = connected_components(graph, directed=False)
    if n_components != 1:
        raise exceptions.ValueError("Domain interior is not connected.")


@dataclass(frozen=True)
class ChainView:
    """One-dimensional view: omega[m-1] is ω_m and rates[m-1] is r_{m-1/2}."""

    L: int
    omega: np.ndarray
    rates: np.ndarray
    t_left: float
    t_right: float

    @functools.cached_property
    def omega_extended(self):
        """ω_0 .. ω_L with the conventions ω_0 := ω_1 and ω_L := ω_{L-1}."""
        return np.concatenate([[self.omega[0]], self.omega, [self.omega[-1]]]).astype(float)


@dataclass(eq=False)
class Environment:
    domain: LatticeDomain
    omega: np.ndarray
    rate: np.ndarray
    bath_temp: np.ndarray
    scenario: object = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.int64).reshape(-1)
        self.rate = np.asarray(self.rate, dtype=float).reshape(-1)
        self.bath_temp = np.asarray(self.bath_temp, dtype=float).reshape(-1)

        if self.omega.shape[0] != self.domain.n_interior:
            raise exceptions.ValueError("omega needs one value per interior site.")
        if self.rate.shape[0] != self.domain.n_edges:
            raise exceptions.ValueError("rate needs one value per edge.")
        if self.bath_temp.shape[0] != self.domain.n_boundary:
            raise exceptions.ValueError("bath_temp needs one value per boundary site.")
        if np.any(self.omega < 1):
            raise exceptions.ValueError("All degrees of freedom must be >= 1.")
        if np.any(~np.isfinite(self.rate)) or np.any(self.rate <= 0):
            raise exceptions.ValueError("All edge rates must be positive and finite.")
        if np.any(~np.isfinite(self.bath_temp)) or np.any(self.bath_temp < 0):
            raise exceptions.ValueError("Bath temperatures must be finite and nonnegative.")

        if self.rate.size:
            self.metadata.setdefault("r_min", float(self.rate.min()))
            self.metadata.setdefault("r_max", float(self.rate.max()))

    @property
    def r_min(self):
        return self.metadata.get("r_min", float("nan"))

    @property
    def r_max(self):
        return self.metadata.get("r_max", float("nan"))

    @property
    def total_rate(self):
        return float(self.rate.sum())

    @functools.cached_property
    def edge_table(self):
        return AliasTable(self.rate)

    def edge_temperature(self, e):
        """Bath temperature seen through boundary edge e."""
        return float(self.bath_temp[self.domain.edge_v[e] - self.domain.n_interior])

    def temperature_of_node(self, node):
        return float(self.bath_temp[node - self.domain.n_interior])

    @property
    def has_boundary(self):
        return self.domain.n_boundary > 0

    def chain(self):
        """Return the one-dimensional view of a chain on D = (0, 1)."""
        domain = self.domain
        if domain.d != 1:
            raise exceptions.DomainError("This operation needs a one-dimensional environment.")

        L = domain.L
        if not np.array_equal(domain.interior[:, 0], np.arange(1, L)):
            raise exceptions.DomainError("The chain view needs interior sites 1..L-1.")
        if domain.n_boundary != 2:
            raise exceptions.DomainError("The chain view needs heat baths at 0 and L.")

        rates = np.empty(L)
        coords = domain.nodes[:, 0]
        for e, (u, v) in enumerate(zip(domain.edge_u, domain.edge_v)):
            m = max(coords[u], coords[v])
            rates[m - 1] = self.rate[e]

        t_left = self.temperature_of_node(domain.site_index((0,)))
        t_right = self.temperature_of_node(domain.site_index((L,)))
        return ChainView(L, self.omega.copy(), rates, t_left, t_right)

    def describe(self):
        kind = getattr(self.scenario, "kind", "explicit")
        return {
            "kind": kind,
            "d": self.domain.d,
            "L": self.domain.L,
            "n_interior": self.domain.n_interior,
            "n_boundary": self.domain.n_boundary,
            "n_edges": self.domain.n_edges,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "omega_values": sorted({int(w) for w in self.omega}),
        }


def _bath_temperatures(domain, temperature):
    if domain.n_boundary == 0:
        return np.empty(0)
    return temperature(domain.boundary / domain.L)


def _require_positive(values, name):
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise exceptions.ValueError(f"{name} must be positive everywhere it is evaluated.")
    return values


@dataclass(frozen=True)
class ConstantScenario:
    kind: ClassVar[str] = "constant"
    claim: ClassVar[str] = (
        "steady-state local equilibrium; product Gamma law invariant if T is constant"
    )
    parameters: ClassVar[dict] = {
        "omega": "degrees of freedom at every site (positive integer)",
        "rate": "rate of every edge (positive real)",
        "temperature": "bath temperature profile T",
    }

    omega: int
    rate: float
    temperature: profiles.Profile

    def omega_field(self, domain, rng):
        return np.full(domain.n_interior, self.omega)

    def rate_field(self, domain, rng):
        return _require_positive(np.full(domain.n_edges, float(self.rate)), "rate")


@dataclass(frozen=True)
class SmoothRateScenario:
    kind: ClassVar[str] = "smooth_rate"
    claim: ClassVar[str] = "hydrodynamic limit u_t = div(R grad u) with boundary data T"
    parameters: ClassVar[dict] = {
        "R": "positive rate profile; r_(u,v) = R((u+v)/(2L)), bath edges included",
        "omega": "degrees of freedom at every site (positive integer)",
        "temperature": "bath temperature profile T",
    }

    R: profiles.Profile
    omega: int
    temperature: profiles.Profile

    def omega_field(self, domain, rng):
        return np.full(domain.n_interior, self.omega)

    def rate_field(self, domain, rng):
        return _require_positive(self.R(domain.edge_midpoints), "R")


@dataclass(frozen=True)
class HalfspaceOmegaScenario:
    kind: ClassVar[str] = "halfspace_omega"
    claim: ClassVar[str] = (
        "hydrodynamic limit with omega_- du/dx_1(0-) = omega_+ du/dx_1(0+)"
    )
    parameters: ClassVar[dict] = {
        "omega_neg": "degrees of freedom where v_1 < 0",
        "omega_pos": "degrees of freedom where v_1 >= 0",
        "rate": "rate of every edge (positive real)",
        "temperature": "bath temperature profile T",
    }

    omega_neg: int
    omega_pos: int
    rate: float
    temperature: profiles.Profile

    def omega_field(self, domain, rng):
        return np.where(domain.interior[:, 0] < 0, self.omega_neg, self.omega_pos)

    def rate_field(self, domain, rng):
        return _require_positive(np.full(domain.n_edges, float(self.rate)), "rate")


@dataclass(frozen=True)
class HalfspaceRateScenario:
    kind: ClassVar[str] = "halfspace_rate"
    claim: ClassVar[str] = "hydrodynamic limit with r_- du/dx_1(0-) = r_+ du/dx_1(0+)"
    parameters: ClassVar[dict] = {
        "rate_neg": "rate of edges with u_1 + v_1 < 0",
        "rate_pos": "rate of all other edges",
        "omega": "degrees of freedom at every site (positive integer)",
        "temperature": "bath temperature profile T",
    }

    rate_neg: float
    rate_pos: float
    omega: int
    temperature: profiles.Profile

    def omega_field(self, domain, rng):
        return np.full(domain.n_interior, self.omega)

    def rate_field(self, domain, rng):
        first = domain.nodes[domain.edge_u, 0] + domain.nodes[domain.edge_v, 0]
        rates = np.where(first < 0, float(self.rate_neg), float(self.rate_pos))
        return _require_positive(rates, "rate")


@dataclass(frozen=True)
class RandomOmegaScenario:
    kind: ClassVar[str] = "random_omega"
    claim: ClassVar[str] = (
        "quenched profile A(x) proportional to int_0^x sum_i kappa_i(y)/i dy"
    )
    parameters: ClassVar[dict] = {
        "kappa": "list of {omega, weight}; P(omega_v = omega) = weight(v_1/L)",
        "rate": "rate of every edge (positive real)",
        "temperature": "bath temperature profile T",
        "rate_range": "optional [r_min, r_max]; rates drawn uniformly instead",
    }

    kappa: profiles.Kappa
    rate: float
    temperature: profiles.Profile
    rate_range: tuple = None

    def omega_field(self, domain, rng):
        y = domain.interior[:, 0] / domain.L
        probabilities = self.kappa.validate(y)
        cumulative = np.cumsum(probabilities, axis=1)
        cumulative[:, -1] = 1.0
        draws = rng.generator.random(domain.n_interior)
        choice = (draws[:, None] >= cumulative).sum(axis=1)
        return np.asarray(self.kappa.omegas)[choice]

    def rate_field(self, domain, rng):
        if self.rate_range is None:
            return _require_positive(np.full(domain.n_edges, float(self.rate)), "rate")
        low, high = self.rate_range
        if not 0 < low <= high:
            raise exceptions.ValueError("rate_range must satisfy 0 < r_min <= r_max.")
        return rng.generator.uniform(low, high, size=domain.n_edges)


@dataclass(frozen=True)
class MacroscopicRateScenario:
    kind: ClassVar[str] = "macroscopic_rate"
    claim: ClassVar[str] = "quenched profile A(x) proportional to int_0^x dy/rho(y)"
    parameters: ClassVar[dict] = {
        "rho": "positive rate profile; the edge (v, v+e) gets rho(v/L)",
        "omega": "degrees of freedom at every site (positive integer)",
        "temperature": "bath temperature profile T",
    }

    rho: profiles.Profile
    omega: int
    temperature: profiles.Profile

    def omega_field(self, domain, rng):
        return np.full(domain.n_interior, self.omega)

    def rate_field(self, domain, rng):
        nodes = domain.nodes
        lower = np.minimum(nodes[domain.edge_u], nodes[domain.edge_v])
        return _require_positive(self.rho(lower / domain.L), "rho")


SCENARIO_KINDS = {
    cls.kind: cls
    for cls in (
        ConstantScenario,
        SmoothRateScenario,
        HalfspaceOmegaScenario,
        HalfspaceRateScenario,
        RandomOmegaScenario,
        MacroscopicRateScenario,
    )
}

_PROFILE_FIELDS = {"temperature", "R", "rho"}
_INTEGER_FIELDS = {"omega", "omega_neg", "omega_pos"}
_REAL_FIELDS = {"rate", "rate_neg", "rate_pos"}


def scenario_from_dict(spec, field="scenario"):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise exceptions.ConfigError(field, "expected an object with 'kind'.")

    params = dict(spec)
    kind = params.pop("kind")
    cls = SCENARIO_KINDS.get(kind)
    if cls is None:
        known = ", ".join(SCENARIO_KINDS)
        raise exceptions.ConfigError(
            f"{field}.kind", f"unknown scenario '{kind}' (known: {known})."
        )

    values = {}
    for name, value in params.items():
        path = f"{field}.{name}"
        if name in _PROFILE_FIELDS:
            values[name] = profiles.from_dict(value, path)
        elif name == "kappa":
            values[name] = profiles.Kappa.from_list(value, path)
        elif name in _INTEGER_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise exceptions.ConfigError(path, f"expected a positive integer, got {value!r}.")
            values[name] = value
        elif name in _REAL_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise exceptions.ConfigError(path, f"expected a positive number, got {value!r}.")
            values[name] = float(value)
        elif name == "rate_range":
            if not isinstance(value, list) or len(value) != 2 or not 0 < value[0] <= value[1]:
                raise exceptions.ConfigError(
                    path, "expected [r_min, r_max] with 0 < r_min <= r_max."
                )
            values[name] = (float(value[0]), float(value[1]))
        else:
            raise exceptions.ConfigError(path, f"unknown parameter for scenario '{kind}'.")

    try:
        return cls(**values)
    except TypeError as e:
        raise exceptions.ConfigError(field, f"invalid parameters for '{kind}': {e}") from e


def build_scenario(kind, domain, rng):
    """Populate (omega, rate, T) on the domain according to a scenario descriptor."""
    omega = kind.omega_field(domain, rng.child(1))
    rate = kind.rate_field(domain, rng.child(2))
    bath_temp = _bath_temperatures(domain, kind.temperature)

    environment = Environment(domain, omega, rate, bath_temp, scenario=kind)
    logger.debug(f"Built environment {environment.describe()}")
    return environment


def build_chain_environment(omega, rates, t_left, t_right):
    """Build a chain on (0, 1) from explicit arrays.

    Parameters
    ----------
    omega : sequence of int
        ω_1 .. ω_{L-1}.
    rates : sequence of float
        r_{1/2} .. r_{L-1/2}; the first and last entries are the bath edges.
    t_left, t_right : float
        Bath temperatures T(0) and T(1).
    """
    omega = np.asarray(omega, dtype=np.int64)
    rates = np.asarray(rates, dtype=float)
    L = omega.shape[0] + 1
    if rates.shape[0] != L:
        raise exceptions.ValueError(f"A chain with {L - 1} sites needs {L} rates.")

    domain = build_box_domain(1, L, BoxShape.unit_interval())
    coords = domain.nodes[:, 0]
    upper = np.maximum(coords[domain.edge_u], coords[domain.edge_v])
    bath_temp = np.where(domain.boundary[:, 0] == 0, float(t_left), float(t_right))
    return Environment(domain, omega, rates[upper - 1], bath_temp)


def random_chain_environment(L, omega_values, rate_range, rng, t_left=1.0, t_right=2.0):
    """Draw a bounded random chain: ω uniform over the values, r uniform in the range."""
    gen = rng.generator
    omega = gen.choice(np.asarray(omega_values, dtype=np.int64), size=L - 1)
    rates = gen.uniform(rate_range[0], rate_range[1], size=L)
    return build_chain_environment(omega, rates, t_left, t_right)
