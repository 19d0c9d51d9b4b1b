# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import argparse
import json
import os

import pandas as pd
import pytest

import kmp_recipe
from kmp_recipe.__main__ import get_recipe_parser, list_scenarios, run
from kmp_recipe.lib import recipe, recipe_loader
from kmp_recipe.lib.config import load_config
from kmp_recipe.lib.environment import random_chain_environment
from kmp_recipe.lib.sampling import Purpose, RngStream
from kmp_recipe.recipes.drift_signs.drift_signs import (
    DriftSigns,
    harmonic_sites,
    max_martingale_increment,
)
from kmp_recipe.recipes.equilibrium.equilibrium import Equilibrium, pair_stream
from kmp_recipe.recipes.steady_state.steady_state import SteadyState, burn_in_time

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

RECIPE_NAMES = [
    "absorption",
    "drift_signs",
    "duality",
    "equilibrium",
    "hydro",
    "steady_state",
]

CONSTANT_CHAIN = {
    "kind": "constant",
    "omega": 2,
    "rate": 1.0,
    "temperature": {"kind": "affine", "offset": 1.0, "gradient": [1.0]},
}


def make_config(write_config, checks, name="run.json", **extra):
    raw = {
        "schema_version": 1,
        "name": "test-run",
        "seed": 12345,
        "output_dir": "out",
        "checks": checks,
        **extra,
    }
    return load_config(write_config(raw, name))


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def homogeneous_drifts(**options):
    return {
        "drift_signs": {
            "environments": 3,
            "L": 12,
            "omega_values": [2],
            "rate_range": [1.0, 1.0],
            **options,
        }
    }


def test_scenario_catalog_matches_the_golden_file():
    with open(os.path.join(DATA_DIR, "scenario_catalog.txt"), encoding="utf-8") as f:
        assert list_scenarios() == f.read()


def test_recipes_are_discovered():
    assert recipe_loader.get_recipe_names() == RECIPE_NAMES
    for name in RECIPE_NAMES:
        recipe_class = recipe_loader.get_recipe_class_from_name(name)
        assert issubclass(recipe_class, recipe.Recipe)
        assert recipe_class.get_name() == name
        assert recipe_class.metadata["type"] == "check"
    assert recipe_loader.get_recipe_class_from_name("unknown") is None


def test_recipe_parser(write_config):
    path = write_config({"schema_version": 1, "seed": 1})
    parser = get_recipe_parser("absorption")
    parser.add_context_arguments()
    parsed = parser.parse_args([path, "--seed", "3", "--convention", "martingale"])
    assert parsed.seed == 3
    assert parsed.convention == "martingale"
    assert parsed.workers is None
    assert get_recipe_parser("unknown") is None


def test_passing_run(write_config):
    config = make_config(write_config, homogeneous_drifts())
    assert run(config) == kmp_recipe.KMP_EXIT_PASS

    summary = read_json(os.path.join(config.output_dir, "summary.json"))
    assert summary["status"] == "PASS"
    assert summary["config_hash"] == config.config_hash
    assert {gate["recipe"] for gate in summary["gates"]} == {"drift_signs"}
    assert os.path.isfile(os.path.join(config.output_dir, "run.log"))

    output_dir = os.path.join(config.output_dir, "drift_signs")
    for filename in ("drifts.csv", "drifts.parquet", "drift_summary.csv"):
        assert os.path.isfile(os.path.join(output_dir, filename))
    analysis = read_json(os.path.join(output_dir, "drift_signs.kmp-analysis"))
    assert analysis["Passed"] is True
    mismatches = analysis["ClosedFormMismatches"]
    assert mismatches["dS"] == 0
    assert mismatches["dT"] == mismatches["rows"]

    drifts = pd.read_csv(os.path.join(output_dir, "drifts.csv"))
    same = drifts[drifts["kind"] == "same"]
    adjacent = drifts[drifts["kind"] == "adjacent"]
    assert same["exact_dS"].to_numpy() == pytest.approx(2 / 3)
    assert same["exact_dT"].to_numpy() == pytest.approx(1 / 3)
    assert adjacent["exact_dS"].to_numpy() == pytest.approx(-1 / 9)
    assert adjacent["exact_dT"].to_numpy() == pytest.approx(1 / 9)


def test_failing_gate(write_config):
    config = make_config(write_config, homogeneous_drifts(min_dT=1.0))
    assert run(config) == kmp_recipe.KMP_EXIT_GATE_FAILURE
    summary = read_json(os.path.join(config.output_dir, "summary.json"))
    assert summary["status"] == "FAIL"
    failed = [gate["name"] for gate in summary["gates"] if not gate["passed"]]
    assert failed == ["E dT bounded below"]


def test_unknown_option_is_a_config_error(write_config):
    config = make_config(write_config, homogeneous_drifts(colour="blue"))
    assert run(config) == kmp_recipe.KMP_EXIT_CONFIG_ERROR
    summary = read_json(os.path.join(config.output_dir, "summary.json"))
    assert "checks.drift_signs.colour" in summary["errors"][0]


def test_missing_scenario_is_a_config_error(write_config):
    config = make_config(write_config, {"duality": {}})
    assert run(config) == kmp_recipe.KMP_EXIT_CONFIG_ERROR


def test_unknown_check_is_a_config_error(write_config):
    config = make_config(write_config, {"telepathy": {}})
    assert run(config) == kmp_recipe.KMP_EXIT_CONFIG_ERROR


def test_existing_output_needs_force_overwrite(write_config):
    config = make_config(write_config, homogeneous_drifts())
    assert run(config) == kmp_recipe.KMP_EXIT_PASS
    assert run(config) == kmp_recipe.KMP_EXIT_RUNTIME_ERROR
    forced = argparse.Namespace(force_overwrite=True)
    assert run(config, parsed_args=forced) == kmp_recipe.KMP_EXIT_PASS


def run_twice(write_config, checks, recipe_name, tables, **extra):
    """Run once with one worker and once with two; return both sets of files."""
    outputs = []
    for workers, name in ((1, "sequential.json"), (2, "concurrent.json")):
        config = make_config(
            write_config, checks, name, output_dir=f"out-{workers}", workers=workers, **extra
        )
        assert run(config) in (kmp_recipe.KMP_EXIT_PASS, kmp_recipe.KMP_EXIT_GATE_FAILURE)
        output_dir = os.path.join(config.output_dir, recipe_name)
        files = [*tables, f"{recipe_name}{kmp_recipe.KMP_ANALYSIS_FILE_EXT}"]
        outputs.append({name: read_bytes(os.path.join(output_dir, name)) for name in files})
    return outputs


def test_drift_outputs_do_not_depend_on_the_workers(write_config):
    checks = {"drift_signs": {"environments": 6, "L": 10}}
    sequential, concurrent = run_twice(
        write_config, checks, "drift_signs", ["drifts.csv", "drift_summary.csv"]
    )
    assert sequential == concurrent


def test_duality_outputs_do_not_depend_on_the_workers(write_config):
    checks = {"duality": {"particles": [1, 2], "times": [0.5]}}
    sequential, concurrent = run_twice(
        write_config,
        checks,
        "duality",
        ["duality.csv"],
        replicas=120,
        chunk_size=25,
        domain={"d": 1, "L": 4},
        scenario=CONSTANT_CHAIN,
    )
    assert sequential == concurrent


def test_small_absorption_run(write_config):
    checks = {
        "absorption": {
            "L_values": [10, 20],
            "environments": 2,
            "points": [0.5],
            "pair_L": 8,
        }
    }
    config = make_config(write_config, checks)
    assert run(config) in (kmp_recipe.KMP_EXIT_PASS, kmp_recipe.KMP_EXIT_GATE_FAILURE)

    output_dir = os.path.join(config.output_dir, "absorption")
    pairs = pd.read_csv(os.path.join(output_dir, "two_particles.csv"))
    assert pairs["marginal_error"].max() < 1e-9
    assert pairs["asymmetry"].max() < 1e-12
    one = pd.read_csv(os.path.join(output_dir, "one_particle.csv"))
    assert sorted(one["L"].unique()) == [10, 20]


@pytest.mark.slow
def test_small_equilibrium_run(write_config):
    checks = {"equilibrium": {"checkpoints": [0.5, 1.0], "pair_samples": 100}}
    config = make_config(
        write_config,
        checks,
        replicas=100,
        chunk_size=25,
        domain={"d": 1, "L": 5},
        scenario={"kind": "constant", "omega": 3, "rate": 1.0, "temperature": 1.5},
    )
    assert run(config) in (kmp_recipe.KMP_EXIT_PASS, kmp_recipe.KMP_EXIT_GATE_FAILURE)
    output_dir = os.path.join(config.output_dir, "equilibrium")
    for table in ("invariance", "stderr_check", "factorization", "pair_split"):
        assert os.path.isfile(os.path.join(output_dir, f"{table}.csv"))


@pytest.mark.slow
def test_small_steady_state_run(write_config):
    checks = {
        "steady_state": {
            "snapshots": 5,
            "compare_L": 0,
            "random_limits": False,
        }
    }
    config = make_config(
        write_config,
        checks,
        replicas=8,
        chunk_size=4,
        domain={"d": 1, "L": 8},
        scenario=CONSTANT_CHAIN,
    )
    assert run(config) in (kmp_recipe.KMP_EXIT_PASS, kmp_recipe.KMP_EXIT_GATE_FAILURE)
    profile = pd.read_csv(os.path.join(config.output_dir, "steady_state", "profile.csv"))
    assert profile.shape[0] == 7
    assert profile["expected_mean"].to_numpy() == pytest.approx(1 + profile["m"] / 8)


@pytest.mark.slow
def test_small_hydro_run(write_config):
    checks = {"hydro": {"n_cells": 16, "n_steps": 20, "compare_L": 0}}
    config = make_config(
        write_config,
        checks,
        replicas=20,
        chunk_size=10,
        domain={"d": 1, "L": 8},
        scenario={
            "kind": "smooth_rate",
            "R": {"kind": "exponential", "amplitude": 1.0, "rate": [0.5]},
            "omega": 2,
            "temperature": {"kind": "affine", "offset": 1.5, "gradient": [0.5]},
        },
    )
    assert run(config) in (kmp_recipe.KMP_EXIT_PASS, kmp_recipe.KMP_EXIT_GATE_FAILURE)
    output_dir = os.path.join(config.output_dir, "hydro")
    hydro = pd.read_csv(os.path.join(output_dir, "hydro.csv"))
    assert hydro.shape[0] == 5
    assert os.path.isfile(os.path.join(output_dir, "pde.csv"))


def test_steady_state_burn_in_is_ten_diffusive_times():
    options = SteadyState.default_options
    assert options["burn_in"] == 10.0
    assert burn_in_time(options, 64) == 10.0 * 64**2


def test_pair_stream_is_apart_from_the_bulk_replicas():
    root = RngStream(424242, 0, (Equilibrium.stream_key,))
    pair = pair_stream(root)
    assert Purpose.BOOTSTRAP not in pair.path
    for i in range(3):
        bulk = root.for_replica(i)
        for purpose in (Purpose.INITIAL_STATE, Purpose.FORWARD):
            assert (
                pair.for_replica(i).child(purpose).generator.random()
                != bulk.child(purpose).generator.random()
            )
    bootstrap = root.child(Purpose.BOOTSTRAP, 1).generator.random()
    assert pair.generator.random() != bootstrap


def test_harmonic_check_skips_the_sites_next_to_the_baths():
    assert list(harmonic_sites(8)) == [2, 3, 4, 5, 6]
    assert DriftSigns.default_options["martingale_tol"] == 1e-12


def test_prefix_sums_of_psi_are_harmonic_to_rounding(rng):
    for k in range(5):
        env = random_chain_environment(32, [1, 2, 3], [0.5, 2.0], rng.child(k))
        assert max_martingale_increment(env) < 1e-12
