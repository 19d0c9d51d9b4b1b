# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Finite-difference reference solutions of the macroscopic heat equations.

The box is covered by a vertex grid with ``n_cells`` intervals per axis;
boundary vertices carry the Dirichlet data T. Without an interface the
operator is the conservative ∇·(c∇u) with harmonically averaged face
coefficients. With an interface on x_1 = 0 each half solves u_t = c Δu and
the interface vertices carry the algebraic flux-matching condition

    w_+ ∂u/∂x_1+ = w_- ∂u/∂x_1-

with second-order one-sided differences.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import linalg as splinalg

from kmp_recipe.lib import exceptions, profiles
from kmp_recipe.lib.environment import BoxShape
from kmp_recipe.log import logger

STARTUP_STEPS = 2
STEADY_RESIDUAL_TOLERANCE = 1e-8


@dataclass(frozen=True)
class Interface:
    """Flux matching on x_1 = 0 with weights (w_-, w_+)."""

    kind: str
    weight_neg: float
    weight_pos: float

    def __post_init__(self):
        if self.kind not in ("omega", "rate"):
            raise exceptions.ValueError(f"Unknown interface kind '{self.kind}'.")
        if not (self.weight_neg > 0 and self.weight_pos > 0):
            raise exceptions.ValueError("Interface weights must be positive.")


@dataclass(frozen=True)
class PdeProblem:
    shape: BoxShape
    n_cells: int
    coefficient: object
    initial: object
    boundary: object
    interface: Interface = None
    diffusivity_scale: float = 1.0

    def __post_init__(self):
        if self.n_cells < 2:
            raise exceptions.ValueError("The grid needs at least two cells per axis.")
        if self.diffusivity_scale <= 0:
            raise exceptions.ValueError("diffusivity_scale must be positive.")
        if self.interface is not None:
            lower, upper = self.shape.lower[0], self.shape.upper[0]
            if not lower < 0 < upper:
                raise exceptions.ValueError("An interface needs x_1 = 0 inside the box.")
            position = -lower / (upper - lower) * self.n_cells
            if abs(position - round(position)) > 1e-9:
                raise exceptions.ValueError("The grid must have a grid line on x_1 = 0.")
            k0 = self.interface_column
            if k0 < 2 or self.n_cells - k0 < 2:
                raise exceptions.ValueError("Need two grid cells on each side of the interface.")

    @property
    def d(self):
        return self.shape.d

    @property
    def axes(self):
        return tuple(
            np.linspace(lo, hi, self.n_cells + 1)
            for lo, hi in zip(self.shape.lower, self.shape.upper)
        )

    @property
    def spacing(self):
        return np.array(
            [(hi - lo) / self.n_cells for lo, hi in zip(self.shape.lower, self.shape.upper)]
        )

    @property
    def grid_shape(self):
        return (self.n_cells + 1,) * self.d

    @property
    def interface_column(self):
        """Grid index of the plane x_1 = 0 along the first axis."""
        lower, upper = self.shape.lower[0], self.shape.upper[0]
        return round(-lower / (upper - lower) * self.n_cells)

    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([axis.reshape(-1) for axis in mesh])

    @classmethod
    def from_scenario(cls, scenario, shape, n_cells, initial, diffusivity_scale=0.5):
        """Macroscopic problem of a scenario descriptor.

        ``diffusivity_scale`` multiplies the coefficient; 0.5 matches the
        lattice, where a lone particle crosses an edge at half its rate.
        """
        kind = scenario.kind
        initial = profiles.from_dict(initial, "initial")
        common = dict(
            shape=shape,
            n_cells=n_cells,
            initial=initial,
            boundary=scenario.temperature,
            diffusivity_scale=diffusivity_scale,
        )

        if kind in ("constant", "halfspace_omega"):
            coefficient = profiles.Constant(scenario.rate)
        elif kind == "smooth_rate":
            coefficient = scenario.R
        elif kind == "macroscopic_rate":
            coefficient = scenario.rho
        elif kind == "halfspace_rate":
            coefficient = profiles.Step(scenario.rate_neg, scenario.rate_pos)
        else:
            raise exceptions.ValueError(f"Scenario '{kind}' has no reference PDE.")

        interface = None
        if kind == "halfspace_omega":
            interface = Interface("omega", scenario.omega_neg, scenario.omega_pos)
        elif kind == "halfspace_rate":
            interface = Interface("rate", scenario.rate_neg, scenario.rate_pos)

        return cls(coefficient=coefficient, interface=interface, **common)


@dataclass
class PdeSolution:
    axes: tuple
    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def grid_shape(self):
        return tuple(axis.shape[0] for axis in self.axes)

    def grid_values(self, time_index=-1):
        return self.values[time_index].reshape(self.grid_shape)

    def interpolate(self, points, time_index=-1):
        interpolator = RegularGridInterpolator(self.axes, self.grid_values(time_index))
        return interpolator(np.atleast_2d(np.asarray(points, dtype=float)))

    def to_frame(self, time_index=-1):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        columns = {f"x{j + 1}": axis.reshape(-1) for j, axis in enumerate(mesh)}
        columns["u"] = self.values[time_index]
        return pd.DataFrame(columns)

    def max_principle_ok(self, problem, tol=1e-8):
        points = problem.points()
        reference = np.concatenate([problem.initial(points), problem.boundary(points)])
        low, high = reference.min(), reference.max()
        return bool(np.all(self.values >= low - tol) and np.all(self.values <= high + tol))


@dataclass
class _System:
    """du/dt = A u + b on differential rows and 0 = A u + b on algebraic rows."""

    A: sparse.csr_matrix
    b: np.ndarray
    unknowns: np.ndarray
    algebraic: np.ndarray
    boundary_nodes: np.ndarray
    boundary_values: np.ndarray
    n_nodes: int


def _harmonic(a, b):
    return 2 * a * b / (a + b)


def _assemble(problem):
    d = problem.d
    n = problem.n_cells
    h = problem.spacing
    points = problem.points()
    n_nodes = points.shape[0]
    multi = np.indices(problem.grid_shape).reshape(d, -1).T

    on_boundary = np.any((multi == 0) | (multi == n), axis=1)
    on_interface = np.zeros(n_nodes, dtype=bool)
    if problem.interface is not None:
        on_interface = (multi[:, 0] == problem.interface_column) & ~on_boundary

    c = problem.diffusivity_scale * np.asarray(problem.coefficient(points), dtype=float)
    if np.any(~np.isfinite(c)) or np.any(c <= 0):
        raise exceptions.ValueError("The PDE coefficient must be positive on the grid.")

    unknowns = np.flatnonzero(~on_boundary)
    position = np.full(n_nodes, -1)
    position[unknowns] = np.arange(unknowns.shape[0])

    boundary_nodes = np.flatnonzero(on_boundary)
    boundary_values = np.asarray(problem.boundary(points[boundary_nodes]), dtype=float)
    dirichlet = np.zeros(n_nodes)
    dirichlet[boundary_nodes] = boundary_values
    strides = np.array([(n + 1) ** (d - 1 - j) for j in range(d)])

    rows, cols, vals = [], [], []
    b = np.zeros(unknowns.shape[0])

    def couple(row, node, weight):
        if on_boundary[node]:
            b[row] += weight * dirichlet[node]
        else:
            rows.append(row)
            cols.append(position[node])
            vals.append(weight)

    for row, node in enumerate(unknowns):
        if on_interface[node]:
            w_minus = problem.interface.weight_neg
            w_plus = problem.interface.weight_pos
            step = strides[0]
            # (w_+ (-3u0 + 4u1 - u2) - w_- (3u0 - 4u-1 + u-2)) / (3 (w_+ + w_-))
            norm = 3 * (w_plus + w_minus)
            couple(row, node, -1.0)
            couple(row, node + step, 4 * w_plus / norm)
            couple(row, node + 2 * step, -w_plus / norm)
            couple(row, node - step, 4 * w_minus / norm)
            couple(row, node - 2 * step, -w_minus / norm)
            continue

        diagonal = 0.0
        for axis in range(d):
            for sign in (-1, 1):
                neighbor = node + sign * strides[axis]
                if problem.interface is None:
                    face = _harmonic(c[node], c[neighbor])
                else:
                    face = c[node]
                weight = face / h[axis] ** 2
                couple(row, neighbor, weight)
                diagonal -= weight
        couple(row, node, diagonal)

    size = unknowns.shape[0]
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
    return _System(
        A, b, unknowns, on_interface[unknowns], boundary_nodes, boundary_values, n_nodes
    )


def _full_field(system, interior_values):
    values = np.empty(system.n_nodes)
    values[system.unknowns] = interior_values
    values[system.boundary_nodes] = system.boundary_values
    return values


def solve_evolution(problem, t, n_steps=200, scheme="crank-nicolson"):
    """Integrate the problem to time t.

    Differential rows use Crank-Nicolson after ``STARTUP_STEPS`` backward
    Euler steps; algebraic interface rows are always taken at the new time.
    ``scheme="backward-euler"`` uses backward Euler throughout.
    """
    if t < 0:
        raise exceptions.ValueError("Evolution time must be nonnegative.")
    if scheme not in ("crank-nicolson", "backward-euler"):
        raise exceptions.ValueError(f"Unknown time scheme '{scheme}'.")

    system = _assemble(problem)
    points = problem.points()
    u = np.asarray(problem.initial(points[system.unknowns]), dtype=float)
    history = [_full_field(system, u)]
    times = [0.0]

    if t > 0:
        dt = t / n_steps
        size = system.unknowns.shape[0]
        mass = sparse.diags((~system.algebraic).astype(float))
        identity = sparse.identity(size)

        theta_be = identity
        theta_cn = sparse.diags(np.where(system.algebraic, 1.0, 0.5))
        steppers = {}
        for name, theta in (("be", theta_be), ("cn", theta_cn)):
            lhs = (mass - dt * theta @ system.A).tocsc()
            rhs = (mass + dt * (identity - theta) @ system.A).tocsr()
            steppers[name] = (splinalg.splu(lhs), rhs)

        for step in range(n_steps):
            name = "cn" if scheme == "crank-nicolson" and step >= STARTUP_STEPS else "be"
            lu, rhs = steppers[name]
            u = lu.solve(rhs @ u + dt * system.b)
            if not np.all(np.isfinite(u)):
                raise exceptions.SolverError(f"Non-finite values after step {step + 1}.")
            history.append(_full_field(system, u))
            times.append((step + 1) * dt)

    logger.debug(f"PDE evolution to t={t} with {n_steps} steps on {problem.grid_shape}.")
    return PdeSolution(
        problem.axes,
        np.asarray(times),
        np.vstack(history),
        {"scheme": scheme, "n_steps": n_steps, "dt": t / n_steps if t > 0 else 0.0},
    )


def solve_steady(problem):
    """Solve 0 = A u + b directly."""
    system = _assemble(problem)
    u = splinalg.spsolve(system.A.tocsc(), -system.b)

    scale = max(1.0, float(np.abs(system.b).max(initial=0.0)))
    residual = float(np.abs(system.A @ u + system.b).max(initial=0.0)) / scale
    if not np.all(np.isfinite(u)) or residual > STEADY_RESIDUAL_TOLERANCE:
        raise exceptions.SolverError("Steady-state solve failed.", residual=residual)

    return PdeSolution(
        problem.axes,
        np.array([math.inf]),
        _full_field(system, u)[None, :],
        {"scheme": "steady", "residual": residual},
    )


def interface_flux_balance(solution, problem, time_index=-1):
    """Largest |w_+ ∂u/∂x_1+ - w_- ∂u/∂x_1-| over the interior interface vertices."""
    if problem.interface is None:
        raise exceptions.ValueError("The problem has no interface.")

    grid = solution.grid_values(time_index)
    n = problem.n_cells
    h = problem.spacing[0]
    k0 = problem.interface_column

    inner = (slice(1, n),) * (problem.d - 1)
    u0 = grid[(k0, *inner)]
    plus = (-3 * u0 + 4 * grid[(k0 + 1, *inner)] - grid[(k0 + 2, *inner)]) / (2 * h)
    minus = (3 * u0 - 4 * grid[(k0 - 1, *inner)] + grid[(k0 - 2, *inner)]) / (2 * h)
    mismatch = problem.interface.weight_pos * plus - problem.interface.weight_neg * minus
    return float(np.max(np.abs(mismatch), initial=0.0))
