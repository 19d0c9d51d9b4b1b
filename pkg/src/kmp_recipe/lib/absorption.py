# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Exact absorption probabilities of one and two dual particles on a chain.

Sites of the chain are 0..L; 0 and L are the heat-bath sites where particles
are stored. Edge k (1 <= k <= L) joins k-1 and k and rings at rate
r_{k-1/2}. Two boundary conventions are supported for the storage edges:

``literal``
    every particle at the touched site is stored at the full edge rate.
``martingale``
    the edge rate is weighted by ω_b/(ω_b+ω_u) with ω_0 := ω_1 and
    ω_L := ω_{L-1}, the rate that makes the prefix sums of ψ harmonic up to
    the boundary.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from kmp_recipe.lib import exceptions
from kmp_recipe.lib.sampling import BetaParams, beta_binomial_pmf
from kmp_recipe.log import logger

CONVENTIONS = ("literal", "martingale")
RESIDUAL_TOLERANCE = 1e-10
DIRECT_SOLVE_MAX_L = 150


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise exceptions.ValueError(
            f"Unknown boundary convention '{convention}' (known: {', '.join(CONVENTIONS)})."
        )


@dataclass(frozen=True)
class ResistorChain:
    """Resistances R_A .. R_{B-1}; R_i sits between i and i+1."""

    resistances: tuple
    A: int
    B: int
    start: int

    def __post_init__(self):
        if not self.A < self.start < self.B:
            raise exceptions.ValueError("Resistor chain needs A < start < B.")
        if len(self.resistances) != self.B - self.A:
            raise exceptions.ValueError(
                f"Need {self.B - self.A} resistances, got {len(self.resistances)}."
            )
        if any(not r > 0 for r in self.resistances):
            raise exceptions.ValueError("Resistances must be positive.")


def hitting_prob_network(chain):
    """P(hit A before B) = sum_{i>=start} R_i / sum_i R_i."""
    R = np.asarray(chain.resistances, dtype=float)
    return float(R[chain.start - chain.A :].sum() / R.sum())


def hitting_prob_linear_solve(chain):
    """P(hit A before B) from the harmonic equations of the conductance walk."""
    conductance = 1.0 / np.asarray(chain.resistances, dtype=float)
    left = conductance[:-1]
    right = conductance[1:]
    rhs = np.zeros(left.shape[0])
    rhs[0] = left[0]
    h = _tridiagonal_solve(left, right, rhs)
    return float(h[chain.start - chain.A - 1])


def _tridiagonal_solve(left, right, rhs):
    """Solve (left + right) h_j - left_j h_{j-1} - right_j h_{j+1} = rhs_j."""
    n = rhs.shape[0]
    if n == 1:
        return rhs / (left + right)
    matrix = sparse.diags(
        [-left[1:], left + right, -right[:-1]], offsets=[-1, 0, 1], shape=(n, n), format="csc"
    )
    return np.atleast_1d(splinalg.spsolve(matrix, rhs))


def _boundary_weight(view, interior_site, bath_site, convention):
    if convention == "literal":
        return 1.0
    omega = view.omega_extended
    return omega[bath_site] / (omega[bath_site] + omega[interior_site])


def one_particle_jump_rates(env, m, convention="literal"):
    """Rates (left, right) at which a lone dual particle at m leaves."""
    _check_convention(convention)
    view = env.chain()
    L = view.L
    if not 1 <= m <= L - 1:
        raise exceptions.DomainError(f"Site {m} is not an interior site of the chain.")

    omega = view.omega_extended
    rates = view.rates

    if m == 1:
        left = rates[0] * _boundary_weight(view, 1, 0, convention)
    else:
        left = rates[m - 1] * omega[m - 1] / (omega[m - 1] + omega[m])

    if m == L - 1:
        right = rates[L - 1] * _boundary_weight(view, L - 1, L, convention)
    else:
        right = rates[m] * omega[m + 1] / (omega[m] + omega[m + 1])

    return float(left), float(right)


def absorb_probs_one_particle_all(env, convention="literal"):
    """(P(0), P(L)) for every start 1..L-1, as two arrays."""
    view = env.chain()
    L = view.L
    rates = np.array([one_particle_jump_rates(env, m, convention) for m in range(1, L)])
    left, right = rates[:, 0], rates[:, 1]

    rhs = np.zeros(L - 1)
    rhs[-1] = right[-1]
    p_right = _tridiagonal_solve(left, right, rhs)
    return 1.0 - p_right, p_right


def absorb_prob_one_particle(env, start, convention="literal"):
    L = env.domain.L
    if not 1 <= start <= L - 1:
        raise exceptions.DomainError(f"Start {start} is not an interior site of the chain.")
    p_left, p_right = absorb_probs_one_particle_all(env, convention)
    return float(p_left[start - 1]), float(p_right[start - 1])


def _split_outcomes(view, x, y, movers):
    """Outcomes of pooling the given particles at x and re-splitting over (x, y)."""
    omega = view.omega_extended
    p = BetaParams.from_omegas(omega[x], omega[y])

    if len(movers) == 1:
        stay = omega[x] / (omega[x] + omega[y])
        return [(stay, {movers[0]: x}), (1.0 - stay, {movers[0]: y})]

    first, second = movers
    split = beta_binomial_pmf(2, 1, p) / 2
    return [
        (beta_binomial_pmf(2, 2, p), {first: x, second: x}),
        (beta_binomial_pmf(2, 0, p), {first: y, second: y}),
        (split, {first: x, second: y}),
        (split, {first: y, second: x}),
    ]


def pair_step_outcomes(view, a, b, convention="literal"):
    """One-step outcome table of a labeled pair at (a, b).

    Every edge touching an active particle contributes its outcomes, so the
    list includes rings that move nothing.

    Returns
    -------
    list of (rate, (a', b'))
        ``rate`` is the edge rate times the probability of the outcome.
    """
    _check_convention(convention)
    L = view.L
    positions = (a, b)
    active = [s for s in positions if 0 < s < L]

    edges = sorted({k for s in active for k in (s, s + 1)})
    outcomes = []
    for k in edges:
        x, y = k - 1, k
        movers = [i for i, s in enumerate(positions) if s in (x, y) and 0 < s < L]
        rate = view.rates[k - 1]

        if x == 0 or y == L:
            interior_site = y if x == 0 else x
            bath_site = x if x == 0 else y
            rate *= _boundary_weight(view, interior_site, bath_site, convention)
            new = list(positions)
            for i in movers:
                new[i] = bath_site
            outcomes.append((rate, tuple(new)))
            continue

        for prob, moves in _split_outcomes(view, x, y, movers):
            new = list(positions)
            for i, site in moves.items():
                new[i] = site
            outcomes.append((rate * prob, tuple(new)))

    return outcomes


ABSORBING_CLASSES = ("00", "0L", "L0", "LL")


class PairChain:
    """Jump chain of a labeled pair of dual particles on the chain 0..L.

    States (a, b) are numbered ``a * (L + 1) + b``. Identity outcomes are
    dropped and each row is renormalised.
    """

    def __init__(self, env, convention="literal"):
        _check_convention(convention)
        view = env.chain()
        self.L = L = view.L
        self.convention = convention
        size = (L + 1) ** 2

        rows, cols, values = [], [], []
        absorbing = np.zeros(size, dtype=bool)
        for a in range(L + 1):
            for b in range(L + 1):
                state = self.index(a, b)
                if a in (0, L) and b in (0, L):
                    absorbing[state] = True
                    continue

                moves = {}
                for rate, target in pair_step_outcomes(view, a, b, convention):
                    if target != (a, b):
                        moves[target] = moves.get(target, 0.0) + rate
                total = sum(moves.values())
                for target, rate in moves.items():
                    rows.append(state)
                    cols.append(self.index(*target))
                    values.append(rate / total)

        self.transitions = sparse.csr_matrix((values, (rows, cols)), shape=(size, size))
        self.absorbing = absorbing
        self._probabilities = None

    def index(self, a, b):
        return a * (self.L + 1) + b

    def absorbing_index(self, label):
        a = 0 if label[0] == "0" else self.L
        b = 0 if label[1] == "0" else self.L
        return self.index(a, b)

    def absorption_probabilities(self, method="auto"):
        """Array of shape ((L+1)**2, 4) over the classes 00, 0L, L0, LL."""
        if self._probabilities is None:
            self._probabilities = self._solve(method)
        return self._probabilities

    def _solve(self, method):
        transient = np.flatnonzero(~self.absorbing)
        targets = [self.absorbing_index(label) for label in ABSORBING_CLASSES]

        P = self.transitions
        P_tt = P[transient][:, transient]
        system = (sparse.identity(transient.shape[0], format="csc") - P_tt).tocsc()
        rhs = P[transient][:, targets].toarray()

        if method == "auto":
            method = "direct" if self.L <= DIRECT_SOLVE_MAX_L else "iterative"
        logger.info(f"Solving the pair chain at L={self.L} with the {method} solver.")

        if method == "direct":
            solution = _direct_solve(system, rhs)
        elif method == "iterative":
            solution = _iterative_solve(system, rhs)
        else:
            raise exceptions.ValueError(f"Unknown solver method '{method}'.")

        residual = float(np.abs(system @ solution - rhs).max())
        if residual > RESIDUAL_TOLERANCE:
            raise exceptions.SolverError(
                f"Pair-chain solve did not reach the residual target {RESIDUAL_TOLERANCE:g}.",
                residual=residual,
            )

        probabilities = np.zeros((self.transitions.shape[0], len(targets)))
        probabilities[transient] = solution
        for column, target in enumerate(targets):
            probabilities[target, column] = 1.0
        return probabilities


def _direct_solve(system, rhs):
    return splinalg.splu(system).solve(rhs)


def _iterative_solve(system, rhs):
    ilu = splinalg.spilu(system, drop_tol=1e-6, fill_factor=20)
    preconditioner = splinalg.LinearOperator(system.shape, ilu.solve)
    options = {"M": preconditioner, "rtol": 1e-12, "atol": 1e-12}

    columns = []
    for column in rhs.T:
        x, info = splinalg.bicgstab(
            system, column, x0=ilu.solve(column), maxiter=5000, **options
        )
        if info != 0:
            logger.warning("bicgstab did not converge; retrying with gmres.")
            x, info = splinalg.gmres(
                system, column, x0=x, restart=200, maxiter=200, **options
            )
        if info != 0:
            logger.warning("gmres stopped before its tolerance; checking the residual.")
        columns.append(x)
    return np.column_stack(columns)


def absorb_probs_two_particles(env, start, convention="literal", chain=None):
    """(P(0,0), P(0,L), P(L,0), P(L,L)) for a labeled pair started at ``start``."""
    chain = PairChain(env, convention) if chain is None else chain
    a, b = start
    L = chain.L
    if not (0 <= a <= L and 0 <= b <= L):
        raise exceptions.DomainError(f"Start {start} is outside the chain 0..{L}.")
    row = chain.absorption_probabilities()[chain.index(a, b)]
    return tuple(float(value) for value in row)
