# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import numpy as np
import pandas as pd

from kmp_recipe import log
from kmp_recipe.lib import exceptions, helpers, recipe
from kmp_recipe.lib.absorption import (
    PairChain,
    absorb_probs_one_particle_all,
    absorb_probs_two_particles,
)
from kmp_recipe.lib.args import Option
from kmp_recipe.lib.environment import random_chain_environment
from kmp_recipe.lib.sampling import Purpose
from kmp_recipe.lib.stats import Gate
from kmp_recipe.lib.steady1d import Profile1D, lattice_index

ONE = "one"
PAIR = "pair"


def one_particle_rows(env, points, convention):
    """P(absorbed at L) from every x against A(x), at the lattice sites floor(xL)."""
    L = env.domain.L
    profile = Profile1D.from_env(env)
    _, p_right = absorb_probs_one_particle_all(env, convention)

    rows = []
    for x in points:
        m = int(lattice_index(x, L))
        A = profile.A(x)
        rows.append({"L": L, "x": x, "m": m, "p_right": float(p_right[m - 1]), "A": A})
    return rows


def pair_rows(env, points, convention):
    L = env.domain.L
    profile = Profile1D.from_env(env)
    chain = PairChain(env, convention)
    p_left, p_right = absorb_probs_one_particle_all(env, convention)

    rows = []
    for x in points:
        m = int(lattice_index(x, L))
        p00, p0L, pL0, pLL = absorb_probs_two_particles(env, (m, m), convention, chain)
        A = profile.A(x)
        rows.append(
            {
                "L": L,
                "x": x,
                "m": m,
                "p00": p00,
                "p0L": p0L,
                "pL0": pL0,
                "pLL": pLL,
                "A": A,
                "same_side_ratio": (pLL + p00) / (A**2 + (1 - A) ** 2),
                "asymmetry": abs(p0L - pL0),
                # the first particle of the pair must follow the one-particle law
                "marginal_error": max(
                    abs(p00 + p0L - p_left[m - 1]), abs(pL0 + pLL - p_right[m - 1])
                ),
            }
        )
    return rows


class Absorption(recipe.Recipe):
    stream_key = 5
    default_options = {
        "L_values": [50, 100, 200],
        "environments": 5,
        "points": [0.25, 0.5, 0.75],
        "omega_values": [1, 2, 3],
        "rate_range": [0.5, 2.0],
        "convention": "literal",
        "ratio_range": [0.98, 1.02],
        "pair_L": 100,
        "pair_ratio_range": [0.95, 1.05],
        "marginal_tol": 1e-9,
        "symmetry_tol": 1e-12,
    }

    @staticmethod
    def _mapper_func(task, parsed_args, options, rng):
        kind, env_index, L = task
        env = random_chain_environment(
            L,
            options["omega_values"],
            options["rate_range"],
            rng.for_replica(env_index).child(Purpose.ENVIRONMENT, L),
        )
        if kind == ONE:
            rows = one_particle_rows(env, options["points"], options["convention"])
        else:
            rows = pair_rows(env, options["points"], options["convention"])
        return kind, [dict(row, environment=env_index) for row in rows]

    def validate_options(self):
        options = self._options
        low, high = options["rate_range"]
        if not 0 < low <= high:
            raise exceptions.ConfigError(
                f"checks.{self.get_name()}.rate_range", "expected 0 < r_min <= r_max."
            )
        for x in options["points"]:
            if not 0 < x < 1:
                raise exceptions.ConfigError(
                    f"checks.{self.get_name()}.points", f"{x} is not inside (0, 1)."
                )

    @log.time("Mapper")
    def mapper_func(self, context):
        options = self._options
        tasks = [
            (ONE, k, L) for L in options["L_values"] for k in range(options["environments"])
        ]
        if options["pair_L"]:
            tasks += [(PAIR, k, options["pair_L"]) for k in range(options["environments"])]
        return context.wait(
            context.map(
                self._mapper_func,
                tasks,
                parsed_args=self._parsed_args,
                options=options,
                rng=self.root_stream(),
            )
        )

    def _reduce_one(self, frame):
        options = self._options
        frame["ratio"] = frame["p_right"] / frame["A"]
        frame["ratio_error"] = np.abs(frame["ratio"] - 1)
        self.write_table("one_particle", frame)

        L_max = max(options["L_values"])
        low, high = options["ratio_range"]
        largest = frame[frame["L"] == L_max]
        worst = largest.loc[largest["ratio_error"].idxmax(), "ratio"]
        self.add_gate(Gate.interval(f"P(L)/A at L={L_max}", worst, low, high))

        errors = frame.groupby("L")["ratio_error"].max().sort_index()
        self.write_table("ratio_error", errors.rename("max_ratio_error").reset_index())
        if len(errors) > 1:
            steps = np.diff(errors.to_numpy())
            self.add_gate(
                Gate.upper_bound("ratio error decreasing in L", float(np.max(steps)), 0.0)
            )

    def _reduce_pair(self, frame):
        options = self._options
        low, high = options["pair_ratio_range"]
        self.write_table("two_particles", frame)

        ratios = frame["same_side_ratio"]
        worst = ratios.iloc[int(np.argmax(np.abs(ratios - 1)))]
        self.add_gate(
            Gate.interval(f"same-side ratio at L={options['pair_L']}", worst, low, high)
        )
        self.add_gate(
            Gate.upper_bound(
                "P(0,L) = P(L,0)",
                float(frame["asymmetry"].max()),
                options["symmetry_tol"],
            )
        )
        self.add_gate(
            Gate.upper_bound(
                "pair marginals match one particle",
                float(frame["marginal_error"].max()),
                options["marginal_tol"],
            )
        )

    @log.time("Reducer")
    def reducer_func(self, mapper_res):
        rows = {ONE: [], PAIR: []}
        for kind, task_rows in helpers.filter_none(mapper_res):
            rows[kind].extend(task_rows)

        self._reduce_one(pd.DataFrame(rows[ONE]))
        if rows[PAIR]:
            self._reduce_pair(pd.DataFrame(rows[PAIR]))

    def run(self, context):
        super().run(context)

        self.validate_options()
        mapper_res = self.mapper_func(context)
        self.reducer_func(mapper_res)

        self.save_analysis_file()

    @classmethod
    def get_argument_parser(cls):
        parser = super().get_argument_parser()
        parser.add_recipe_argument(Option.CONVENTION)
        return parser
