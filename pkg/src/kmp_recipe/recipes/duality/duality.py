# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import itertools
from dataclasses import dataclass

import numpy as np
import pandas as pd

from kmp_recipe import log
from kmp_recipe.lib import helpers, profiles, recipe
from kmp_recipe.lib.args import Option
from kmp_recipe.lib.config import DomainConfig
from kmp_recipe.lib.dual import (
    DualState,
    duality_sample_block,
    exact_duality_rhs_single,
    summarize_duality,
)
from kmp_recipe.lib.environment import build_scenario
from kmp_recipe.lib.forward import init_product_gamma
from kmp_recipe.lib.sampling import Purpose
from kmp_recipe.lib.stats import Gate


@dataclass
class DualityCase:
    env: object
    xi0: object
    n0: DualState
    n_particles: int
    t: float

    @property
    def label(self):
        domain = self.env.domain
        return f"d={domain.d} L={domain.L} N={self.n_particles} t={self.t:g}"


def ordered_sites(domain):
    """Interior nodes by distance from the centre of the box, ties by index."""
    center = np.asarray(domain.shape.lower) + np.asarray(domain.shape.upper)
    distance = np.linalg.norm(domain.interior / domain.L - center / 2, axis=1)
    return np.lexsort((np.arange(domain.n_interior), np.round(distance, 12)))


def initial_particles(domain, n_particles):
    """Two particles per site, filling the sites closest to the centre first."""
    sites = ordered_sites(domain)
    return DualState.from_sites(domain, sites[np.arange(n_particles) // 2])


class Duality(recipe.Recipe):
    stream_key = 1
    default_options = {
        "domains": [],
        "particles": [1, 2, 3],
        "times": [0.5, 2.0, 10.0],
        "initial": {"kind": "constant", "value": 1.0},
        "n_sigma": 3.0,
    }

    @staticmethod
    def _mapper_func(task, parsed_args, cases, rng):
        case_index, replica_ids = task
        case = cases[case_index]
        values = duality_sample_block(
            case.env, case.xi0, case.n0, case.t, rng.child(case_index), replica_ids
        )
        return case_index, values

    def build_cases(self):
        config = self._config
        scenario = config.require_scenario(self.get_name())
        domains = [
            DomainConfig.from_dict(raw, f"checks.{self.get_name()}.domains[{i}]")
            for i, raw in enumerate(self._options["domains"])
        ] or [config.domain]
        initial = profiles.from_dict(self._options["initial"], "initial")

        root = self.root_stream()
        cases = []
        for k, domain_config in enumerate(domains):
            domain = domain_config.build()
            env = build_scenario(scenario, domain, root.child(Purpose.ENVIRONMENT, k))
            xi0 = init_product_gamma(env, initial, root.child(Purpose.INITIAL_STATE, k))
            for n_particles, t in itertools.product(
                self._options["particles"], self._options["times"]
            ):
                n0 = initial_particles(domain, n_particles)
                cases.append(DualityCase(env, xi0, n0, n_particles, float(t)))
        return cases

    @log.time("Mapper")
    def mapper_func(self, context, cases):
        tasks = [
            (case_index, chunk)
            for case_index in range(len(cases))
            for chunk in self.replica_chunks()
        ]
        return context.wait(
            context.map(
                self._mapper_func,
                tasks,
                parsed_args=self._parsed_args,
                cases=cases,
                rng=self.root_stream().child(Purpose.FORWARD),
            )
        )

    @log.time("Reducer")
    def reducer_func(self, mapper_res, cases):
        n_sigma = self._options["n_sigma"]
        blocks = {}
        for case_index, values in helpers.filter_none(mapper_res):
            blocks.setdefault(case_index, []).append(values)

        rows = []
        for case_index, case in enumerate(cases):
            report = summarize_duality(np.concatenate(blocks[case_index]))
            gate = self.add_gate(
                Gate.sigma(
                    f"duality {case.label}",
                    report.lhs,
                    report.rhs,
                    report.combined_stderr,
                    n_sigma,
                )
            )

            exact = np.nan
            if case.n_particles == 1:
                start = int(case.n0.positions[0])
                exact = exact_duality_rhs_single(case.env, case.xi0, start, case.t)
                self.add_gate(
                    Gate.sigma(
                        f"dual side vs exact law {case.label}",
                        report.rhs,
                        exact,
                        report.rhs_stderr,
                        n_sigma,
                    )
                )

            domain = case.env.domain
            rows.append(
                {
                    "d": domain.d,
                    "L": domain.L,
                    "N": case.n_particles,
                    "t": case.t,
                    "replicas": report.replicas,
                    "lhs": report.lhs,
                    "lhs_stderr": report.lhs_stderr,
                    "rhs": report.rhs,
                    "rhs_stderr": report.rhs_stderr,
                    "combined_stderr": report.combined_stderr,
                    "difference": report.difference,
                    "exact_rhs": exact,
                    "passed": gate.passed,
                }
            )

        self.write_table("duality", pd.DataFrame(rows))

    def run(self, context):
        super().run(context)

        cases = self.build_cases()
        mapper_res = self.mapper_func(context, cases)
        self.reducer_func(mapper_res, cases)

        self.save_analysis_file()

    @classmethod
    def get_argument_parser(cls):
        parser = super().get_argument_parser()
        parser.add_recipe_argument(Option.N_SIGMA)
        return parser
