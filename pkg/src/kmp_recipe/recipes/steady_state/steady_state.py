# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import numpy as np
import pandas as pd

from kmp_recipe import log
from kmp_recipe.lib import helpers, recipe
from kmp_recipe.lib.environment import (
    MacroscopicRateScenario,
    RandomOmegaScenario,
    build_box_domain,
    build_scenario,
)
from kmp_recipe.lib.forward import sample_steady_state
from kmp_recipe.lib.profiles import Affine, Kappa
from kmp_recipe.lib.sampling import Purpose
from kmp_recipe.lib.stats import (
    Gate,
    adjacent_covariance,
    gamma_marginal_test,
    mean_stderr,
)
from kmp_recipe.lib.steady1d import (
    Profile1D,
    limit_A_random_omega,
    limit_A_rho,
    max_limit_deviation,
)
from kmp_recipe.log import logger


def limit_cases():
    """Random degrees of freedom with κ_1(y) = y, κ_2(y) = 1 - y, and rates ρ(y) = 1 + y."""
    temperature = Affine(1.0, (1.0,))
    kappa = Kappa((1, 2), (Affine(0.0, (1.0,)), Affine(1.0, (-1.0,))))
    rho = Affine(1.0, (1.0,))
    return [
        (
            "random_omega",
            RandomOmegaScenario(kappa, 1.0, temperature),
            lambda x: limit_A_random_omega(kappa, x),
        ),
        (
            "macroscopic_rate",
            MacroscopicRateScenario(rho, 2, temperature),
            lambda x: limit_A_rho(rho, x),
        ),
    ]


def burn_in_time(options, L):
    """Burn-in in model time; the option is in units of L^2."""
    return options["burn_in"] * L**2


class SteadyState(recipe.Recipe):
    stream_key = 3
    default_options = {
        "burn_in": 10.0,
        "snapshots": 100,
        "spacing": 0.005,
        "rel_tol": 0.02,
        "max_order": 2,
        "compare_L": 16,
        "random_limits": True,
        "limit_L": 100000,
        "limit_draws": 10,
        "limit_grid": 21,
        "limit_tol": 0.01,
    }

    @staticmethod
    def _mapper_func(task, parsed_args, envs, options, rng):
        env_index, replica_ids = task
        env = envs[env_index]
        L = env.domain.L
        values = [
            sample_steady_state(
                env,
                burn_in_time(options, L),
                options["snapshots"],
                options["spacing"] * L**2,
                rng.child(env_index).for_replica(i).child(Purpose.FORWARD),
            )
            for i in replica_ids
        ]
        return env_index, np.stack(values)

    def build_environments(self):
        scenario = self._config.require_scenario(self.get_name())
        root = self.root_stream()
        sizes = [self._config.domain.L]
        if self._options["compare_L"]:
            sizes.append(self._options["compare_L"])

        envs = []
        for k, L in enumerate(sizes):
            domain = self._config.domain.build(L)
            envs.append(build_scenario(scenario, domain, root.child(Purpose.ENVIRONMENT, k)))
        return envs

    @log.time("Mapper")
    def mapper_func(self, context, envs):
        tasks = [
            (env_index, chunk)
            for env_index in range(len(envs))
            for chunk in self.replica_chunks()
        ]
        return context.wait(
            context.map(
                self._mapper_func,
                tasks,
                parsed_args=self._parsed_args,
                envs=envs,
                options=self._options,
                rng=self.root_stream(),
            )
        )

    def _reduce_profile(self, values, env):
        options = self._options
        profile = Profile1D.from_env(env)
        frame = profile.to_frame().iloc[:-1].reset_index(drop=True)
        omega = env.omega.astype(float)
        expected = omega / 2 * frame["u"].to_numpy()

        mean, stderr = mean_stderr(values.mean(axis=1))
        frame["omega"] = env.omega
        frame["expected_mean"] = expected
        frame["mc_mean"] = mean
        frame["mc_stderr"] = stderr
        frame["rel_error"] = np.abs(mean - expected) / expected

        reports = [
            gamma_marginal_test(
                values[:, :, j], omega[j], frame["u"][j], max_order=options["max_order"]
            )
            for j in range(values.shape[2])
        ]
        frame["ks_distance"] = [report.ks_distance for report in reports]
        frame["ks_pvalue"] = [report.ks_pvalue for report in reports]
        self.write_table("profile", frame)

        moments = pd.concat(
            [report.table.assign(m=m) for m, report in zip(frame["m"], reports)],
            ignore_index=True,
        )
        self.write_table("moments", moments[["m", *reports[0].table.columns]])

        self.add_gate(
            Gate.upper_bound(
                f"site means vs local equilibrium (L={env.domain.L})",
                float(frame["rel_error"].max()),
                options["rel_tol"],
            )
        )
        self.add_gate(
            Gate.upper_bound(
                f"site marginals KS distance (L={env.domain.L})",
                float(frame["ks_distance"].max()),
                reports[0].ks_critical,
            )
        )

    def _reduce_covariance(self, results, envs):
        rows = []
        for env_index, env in enumerate(envs):
            mean, stderr = mean_stderr(adjacent_covariance(results[env_index], env.omega))
            rows.append(
                {"L": env.domain.L, "adjacent_correlation": float(mean), "stderr": float(stderr)}
            )
        self.write_table("covariance", pd.DataFrame(rows))

        if len(rows) == 2:
            large, small = sorted(rows, key=lambda row: -row["L"])
            self.add_gate(
                Gate.upper_bound(
                    f"adjacent correlation L={large['L']} below L={small['L']}",
                    abs(large["adjacent_correlation"]),
                    abs(small["adjacent_correlation"]),
                )
            )

    @log.time("Random limits")
    def check_random_limits(self):
        options = self._options
        L = options["limit_L"]
        grid = np.linspace(0.0, 1.0, options["limit_grid"])
        domain = build_box_domain(1, L)
        root = self.root_stream().child(Purpose.ENVIRONMENT, 100)

        rows = []
        for case_index, (name, scenario, limit) in enumerate(limit_cases()):
            # a deterministic rate field gives the same environment on every draw
            draws = options["limit_draws"] if name == "random_omega" else 1
            for draw in range(draws):
                env = build_scenario(scenario, domain, root.child(case_index, draw))
                deviation = max_limit_deviation(env, limit, grid)
                rows.append({"case": name, "draw": draw, "L": L, "max_deviation": deviation})
            logger.info(f"Random-environment limit '{name}' checked on {draws} draws.")

        frame = pd.DataFrame(rows)
        self.write_table("random_limits", frame)
        for name, group in frame.groupby("case", sort=False):
            self.add_gate(
                Gate.upper_bound(
                    f"quenched profile limit '{name}' (L={L})",
                    float(group["max_deviation"].max()),
                    options["limit_tol"],
                )
            )

    @log.time("Reducer")
    def reducer_func(self, mapper_res, envs):
        blocks = {}
        for env_index, values in helpers.filter_none(mapper_res):
            blocks.setdefault(env_index, []).append(values)
        results = {index: np.concatenate(parts) for index, parts in blocks.items()}

        self._reduce_profile(results[0], envs[0])
        self._reduce_covariance(results, envs)

    def run(self, context):
        super().run(context)

        envs = self.build_environments()
        self._analysis_dict["Environment"] = envs[0].describe()
        mapper_res = self.mapper_func(context, envs)
        self.reducer_func(mapper_res, envs)
        if self._options["random_limits"]:
            self.check_random_limits()

        self.save_analysis_file()
