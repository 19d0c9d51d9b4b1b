# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Machine-readable summary of a run: every gate of every recipe."""

import os

from kmp_recipe import kmp_constants
from kmp_recipe.lib import export

GATE_COLUMNS = ("name", "value", "reference", "tolerance", "passed", "detail")


def build_run_summary(config, recipes, errors=()):
    gates = []
    per_recipe = {}
    for recipe in recipes:
        name = recipe.get_name()
        per_recipe[name] = recipe.summary()
        for gate in recipe.gates:
            gates.append({"recipe": name, **{key: getattr(gate, key) for key in GATE_COLUMNS}})

    passed = not errors and all(gate["passed"] for gate in gates)
    return {
        "name": config.name,
        "schema_version": config.schema_version,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "replicas": config.replicas,
        "status": "PASS" if passed else "FAIL",
        "recipes": per_recipe,
        "gates": gates,
        "errors": list(errors),
    }


def write_run_summary(summary, output_dir):
    os.makedirs(output_dir, exist_ok=True)
    return export.write_json(
        summary, os.path.join(output_dir, kmp_constants.KMP_SUMMARY_FILENAME)
    )
