# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import numpy as np
import pandas as pd

from kmp_recipe import log
from kmp_recipe.lib import exceptions, helpers, recipe
from kmp_recipe.lib.args import Option
from kmp_recipe.lib.environment import Environment, build_box_domain, build_scenario
from kmp_recipe.lib.forward import init_product_gamma, simulate
from kmp_recipe.lib.profiles import Constant
from kmp_recipe.lib.sampling import Purpose
from kmp_recipe.lib.stats import (
    Gate,
    beta_split_stationarity_test,
    bootstrap_stderr,
    constant_temperature,
    equilibrium_replica,
    invariance_table,
    joint_factorization_test,
    mean_stderr,
)

BULK = "bulk"
PAIR = "pair"


def two_site_environment(omegas, rate=1.0):
    """Closed pair of sites exchanging energy over one edge."""
    domain = build_box_domain(1, 3, closed=True)
    return Environment(domain, list(omegas), [rate], [])


def pair_samples(env, temperature, t, rng, replica_ids):
    values = []
    for i in replica_ids:
        stream = rng.for_replica(i)
        init = init_product_gamma(
            env, Constant(temperature), stream.child(Purpose.INITIAL_STATE)
        )
        values.append(simulate(env, init, t, stream.child(Purpose.FORWARD)).state.xi)
    return np.array(values).reshape(-1, 2)


def pair_stream(rng):
    """Stream of the two-site runs, apart from the bulk replicas."""
    return rng.child(Purpose.SIMULATION)


class Equilibrium(recipe.Recipe):
    stream_key = 2
    default_options = {
        "checkpoints": [0.5, 1.0, 2.0, 4.0, 8.0],
        "temperature": None,
        "max_order": 3,
        "n_sigma": 3.0,
        "factorization_sites": 4,
        "pair_omegas": [1, 3],
        "pair_samples": 4000,
        "pair_time": 2.0,
        "alpha": 0.01,
    }

    @staticmethod
    def _mapper_func(task, parsed_args, env, pair_env, temperature, options, rng):
        kind, replica_ids = task
        if kind == PAIR:
            return kind, pair_samples(
                pair_env, temperature, options["pair_time"], pair_stream(rng), replica_ids
            )

        checkpoints = np.asarray(options["checkpoints"], dtype=float)
        values = [
            equilibrium_replica(env, temperature, checkpoints, rng.for_replica(i))
            for i in replica_ids
        ]
        return kind, np.stack(values)

    def build_environment(self):
        scenario = self._config.require_scenario(self.get_name())
        domain = self._config.domain.build()
        env = build_scenario(scenario, domain, self.root_stream().child(Purpose.ENVIRONMENT))

        temperature = self._options["temperature"]
        if temperature is None:
            temperature = constant_temperature(env)
        elif not temperature > 0:
            raise exceptions.ConfigError(
                f"checks.{self.get_name()}.temperature", "expected a positive number."
            )
        return env, float(temperature)

    @log.time("Mapper")
    def mapper_func(self, context, env, temperature):
        checkpoints = self._options["checkpoints"]
        if not checkpoints or np.any(np.diff(checkpoints) < 0) or checkpoints[0] < 0:
            raise exceptions.ConfigError(
                f"checks.{self.get_name()}.checkpoints",
                "expected a non-empty sorted list of nonnegative times.",
            )

        tasks = [(BULK, chunk) for chunk in self.replica_chunks()]
        tasks += [(PAIR, chunk) for chunk in self.replica_chunks(self._options["pair_samples"])]
        return context.wait(
            context.map(
                self._mapper_func,
                tasks,
                parsed_args=self._parsed_args,
                env=env,
                pair_env=two_site_environment(self._options["pair_omegas"]),
                temperature=temperature,
                options=self._options,
                rng=self.root_stream(),
            )
        )

    def _reduce_invariance(self, values, env, temperature):
        options = self._options
        table = invariance_table(
            values, env.omega, temperature, options["checkpoints"], options["max_order"]
        )
        for epoch, group in table.groupby("time", sort=True):
            self.add_gate(
                Gate.max_abs_z(f"moments at t={epoch:g}", group["z"], options["n_sigma"])
            )
        self.write_table("invariance", table)

        final = values[:, -1, :]
        mean, stderr = mean_stderr(final)
        boot = bootstrap_stderr(final, 200, self.root_stream().child(Purpose.BOOTSTRAP, 1))
        self.write_table(
            "stderr_check",
            pd.DataFrame(
                {
                    "site": np.arange(final.shape[1]),
                    "mean": mean,
                    "stderr": stderr,
                    "bootstrap_stderr": boot,
                }
            ),
        )

        width = min(options["factorization_sites"], final.shape[1])
        if width >= 2:
            expected = env.omega[:width] / 2 * temperature
            report = joint_factorization_test(final[:, :width], options["n_sigma"], expected)
            self.add_gate(
                Gate.max_abs_z("joint factorisation", report.table["z"], options["n_sigma"])
            )
            self.add_gate(
                Gate.max_abs_z(
                    "mixed moments vs Gamma marginals", report.table["mixed_z"], options["n_sigma"]
                )
            )
            self.write_table("factorization", report.table)

    def _reduce_pair(self, samples):
        report = beta_split_stationarity_test(
            samples,
            self._options["pair_omegas"],
            self.root_stream().child(Purpose.BOOTSTRAP, 2),
            self._options["alpha"],
        )
        self.add_gate(
            Gate.lower_bound("two-site Beta share", min(report.pvalues), report.alpha)
        )
        self.write_table(
            "pair_split",
            pd.DataFrame(
                {
                    "component": [1, 2],
                    "ks_statistic": report.statistics,
                    "pvalue": report.pvalues,
                }
            ),
        )

    @log.time("Reducer")
    def reducer_func(self, mapper_res, env, temperature):
        results = {BULK: [], PAIR: []}
        for kind, values in helpers.filter_none(mapper_res):
            results[kind].append(values)

        self._reduce_invariance(np.concatenate(results[BULK]), env, temperature)
        if results[PAIR]:
            self._reduce_pair(np.concatenate(results[PAIR]))

    def run(self, context):
        super().run(context)

        env, temperature = self.build_environment()
        self._analysis_dict["Environment"] = env.describe()
        mapper_res = self.mapper_func(context, env, temperature)
        self.reducer_func(mapper_res, env, temperature)

        self.save_analysis_file()

    @classmethod
    def get_argument_parser(cls):
        parser = super().get_argument_parser()
        parser.add_recipe_argument(Option.N_SIGMA)
        return parser
