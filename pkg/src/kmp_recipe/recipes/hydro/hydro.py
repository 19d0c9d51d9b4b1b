# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import numpy as np
import pandas as pd

from kmp_recipe import log
from kmp_recipe.lib import exceptions, helpers, profiles, recipe
from kmp_recipe.lib.dual import dual_integrand_samples, moment_start
from kmp_recipe.lib.environment import BoxShape, build_scenario
from kmp_recipe.lib.pde_ref import PdeProblem, interface_flux_balance, solve_evolution
from kmp_recipe.lib.sampling import Purpose
from kmp_recipe.lib.stats import Gate, hydro_replica, hydro_table
from kmp_recipe.log import logger

METHODS = ("forward", "dual")
PROBE_FRACTIONS = (0.2, 0.35, 0.6, 0.7, 0.85)


def default_probes(shape):
    """Points on the diagonal of the box, away from the centre plane x_1 = 0."""
    lower = np.asarray(shape.lower, dtype=float)
    upper = np.asarray(shape.upper, dtype=float)
    return np.array([lower + s * (upper - lower) for s in PROBE_FRACTIONS])


def forward_values(env, f, points, t, rng, replica_ids):
    sites = np.array([env.domain.nearest_site(x) for x in points])
    return np.array([hydro_replica(env, f, sites, t, rng.for_replica(i)) for i in replica_ids])


def dual_values(env, f, points, t, rng, replica_ids):
    """2ξ/ω at the probes through the dual of a single particle."""
    horizon = t * env.domain.L**2
    columns = []
    for k, x in enumerate(points):
        init, prefactor = moment_start(env, x, [(0,) * env.domain.d], 1)
        samples = dual_integrand_samples(env, init, horizon, f, rng.child(k), replica_ids)
        columns.append(samples * prefactor * 2 / env.omega[init.positions[0]])
    return np.column_stack(columns)


class Hydro(recipe.Recipe):
    stream_key = 4
    default_options = {
        "t": 0.1,
        "points": [],
        "initial": {"kind": "affine", "offset": 1.5, "gradient": [0.5]},
        "method": "forward",
        "n_cells": 64,
        "n_steps": 200,
        "diffusivity_scale": 0.5,
        "rel_tol": 0.05,
        "compare_L": 16,
    }

    @staticmethod
    def _mapper_func(task, parsed_args, envs, initial, points, options, rng):
        env_index, replica_ids = task
        sampler = dual_values if options["method"] == "dual" else forward_values
        values = sampler(
            envs[env_index], initial, points, options["t"], rng.child(env_index), replica_ids
        )
        return env_index, values

    def _field(self, name):
        return f"checks.{self.get_name()}.{name}"

    def resolve_inputs(self):
        options = self._options
        if options["method"] not in METHODS:
            raise exceptions.ConfigError(
                self._field("method"), f"expected one of {', '.join(METHODS)}."
            )
        if not options["t"] > 0:
            raise exceptions.ConfigError(self._field("t"), "expected a positive time.")

        domain_config = self._config.domain
        shape = domain_config.shape or BoxShape.default(domain_config.d)
        initial = profiles.from_dict(options["initial"], self._field("initial"))

        points = np.asarray(options["points"], dtype=float)
        if points.size == 0:
            points = default_probes(shape)
        if points.ndim != 2 or points.shape[1] != domain_config.d:
            raise exceptions.ConfigError(
                self._field("points"), f"expected a list of {domain_config.d}-d points."
            )
        return shape, initial, points

    def build_environments(self):
        scenario = self._config.require_scenario(self.get_name())
        root = self.root_stream()
        sizes = [self._config.domain.L]
        if self._options["compare_L"]:
            sizes.append(self._options["compare_L"])
        return [
            build_scenario(
                scenario, self._config.domain.build(L), root.child(Purpose.ENVIRONMENT, k)
            )
            for k, L in enumerate(sizes)
        ]

    @log.time("Reference PDE")
    def solve_reference(self, shape, initial, points):
        options = self._options
        problem = PdeProblem.from_scenario(
            self._config.scenario,
            shape,
            options["n_cells"],
            initial,
            diffusivity_scale=options["diffusivity_scale"],
        )
        solution = solve_evolution(problem, options["t"], options["n_steps"])
        if not solution.max_principle_ok(problem):
            logger.warning("The reference solution leaves the range of its data.")
        self.write_table("pde", solution.to_frame())

        if problem.interface is not None:
            self._analysis_dict["InterfaceFluxMismatch"] = interface_flux_balance(
                solution, problem
            )
        return solution.interpolate(points)

    @log.time("Mapper")
    def mapper_func(self, context, envs, initial, points):
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
                initial=initial,
                points=points,
                options=self._options,
                rng=self.root_stream(),
            )
        )

    @log.time("Reducer")
    def reducer_func(self, mapper_res, envs, points, reference):
        rel_tol = self._options["rel_tol"]
        blocks = {}
        for env_index, values in helpers.filter_none(mapper_res):
            blocks.setdefault(env_index, []).append(values)

        frames = []
        for env_index, env in enumerate(envs):
            values = np.concatenate(blocks[env_index])
            frame = hydro_table(values, points, reference, rel_tol)
            frame.insert(0, "L", env.domain.L)
            frames.append(frame)
        table = pd.concat(frames, ignore_index=True)
        self.write_table("hydro", table)

        main = frames[0]
        L = envs[0].domain.L
        self.add_gate(
            Gate.upper_bound(
                f"probe means vs PDE (L={L}, method={self._options['method']})",
                float(main["rel_error"].max()),
                rel_tol,
            )
        )
        if len(frames) == 2:
            bias = [float(np.mean(np.abs(frame["mc"] - frame["pde"]))) for frame in frames]
            self.add_gate(
                Gate.upper_bound(
                    f"bias L={L} below L={envs[1].domain.L}", bias[0], bias[1]
                )
            )

    def run(self, context):
        super().run(context)

        shape, initial, points = self.resolve_inputs()
        envs = self.build_environments()
        self._analysis_dict["Environment"] = envs[0].describe()

        reference = self.solve_reference(shape, initial, points)
        mapper_res = self.mapper_func(context, envs, initial, points)
        self.reducer_func(mapper_res, envs, points, reference)

        self.save_analysis_file()
