# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import pandas as pd

from kmp_recipe import log
from kmp_recipe.lib import helpers, recipe
from kmp_recipe.lib.environment import random_chain_environment
from kmp_recipe.lib.sampling import Purpose
from kmp_recipe.lib.stats import Gate
from kmp_recipe.lib.steady1d import PairConfig, compare_drifts, phi_martingale_increment
from kmp_recipe.log import logger


def pair_configs(L):
    """Every configuration whose neighbourhood stays off the bath edges."""
    same = [PairConfig("same", i) for i in range(2, L - 1)]
    adjacent = [PairConfig("adjacent", i) for i in range(2, L - 2)]
    return same + adjacent


def harmonic_sites(L):
    """Interior sites whose two neighbours are interior too."""
    return range(2, L - 1)


def max_martingale_increment(env):
    increments = [
        abs(phi_martingale_increment(env, m, "martingale"))
        for m in harmonic_sites(env.domain.L)
    ]
    return max(increments, default=0.0)


class DriftSigns(recipe.Recipe):
    stream_key = 6
    default_options = {
        "environments": 100,
        "L": 32,
        "omega_values": [1, 2, 3],
        "rate_range": [0.5, 2.0],
        "min_dT": 0.0,
        "martingale_tol": 1e-12,
    }

    @staticmethod
    def _mapper_func(env_index, parsed_args, options, rng):
        L = options["L"]
        env = random_chain_environment(
            L,
            options["omega_values"],
            options["rate_range"],
            rng.for_replica(env_index).child(Purpose.ENVIRONMENT),
        )
        rows = [
            dict(compare_drifts(env, config).as_row(), environment=env_index)
            for config in pair_configs(L)
        ]
        return rows, max_martingale_increment(env)

    @log.time("Mapper")
    def mapper_func(self, context):
        return context.wait(
            context.map(
                self._mapper_func,
                range(self._options["environments"]),
                parsed_args=self._parsed_args,
                options=self._options,
                rng=self.root_stream(),
            )
        )

    @log.time("Reducer")
    def reducer_func(self, mapper_res):
        results = helpers.filter_none(mapper_res)
        frame = pd.DataFrame([row for rows, _ in results for row in rows])
        self.write_table("drifts", frame)

        same = frame[frame["kind"] == "same"]
        adjacent = frame[frame["kind"] == "adjacent"]
        self.add_gate(
            Gate.lower_bound("E dS > 0 at co-located pairs", same["exact_dS"].min(), 0.0)
        )
        self.add_gate(
            Gate.upper_bound("E dS < 0 at adjacent pairs", adjacent["exact_dS"].max(), 0.0)
        )
        self.add_gate(
            Gate.lower_bound(
                "E dT bounded below", frame["exact_dT"].min(), self._options["min_dT"]
            )
        )
        self.add_gate(
            Gate.upper_bound(
                "prefix sums of psi are harmonic",
                max(increment for _, increment in results),
                self._options["martingale_tol"],
            )
        )

        mismatches = {
            "dS": int((~frame["dS_match"]).sum()),
            "dT": int((~frame["dT_match"]).sum()),
            "rows": int(frame.shape[0]),
        }
        self._analysis_dict["ClosedFormMismatches"] = mismatches
        for column in ("dS", "dT"):
            if mismatches[column]:
                logger.warning(
                    f"Closed-form E {column} disagrees with the generator in"
                    f" {mismatches[column]} of {mismatches['rows']} configurations."
                )

        summary = frame.groupby("kind").agg(
            min_exact_dS=("exact_dS", "min"),
            max_exact_dS=("exact_dS", "max"),
            min_exact_dT=("exact_dT", "min"),
            dS_mismatches=("dS_match", lambda match: int((~match).sum())),
            dT_mismatches=("dT_match", lambda match: int((~match).sum())),
        )
        self.write_table("drift_summary", summary.reset_index())

    def run(self, context):
        super().run(context)

        mapper_res = self.mapper_func(context)
        self.reducer_func(mapper_res)

        self.save_analysis_file()
