# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import json
import os

import numpy as np
import pytest

from kmp_recipe.lib import exceptions, profiles
from kmp_recipe.lib.config import (
    DomainConfig,
    RunConfig,
    config_hash,
    load_config,
    parse_config,
    resolve_options,
)
from kmp_recipe.lib.environment import BoxShape, ConstantScenario

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def minimal(**extra):
    return {"schema_version": 1, "seed": 42, **extra}


def test_defaults():
    config = RunConfig.from_dict(minimal())
    assert config.name == "kmp-run"
    assert config.replicas == 1000
    assert config.workers == 1
    assert config.domain == DomainConfig()
    assert config.scenario is None


def test_scenario_is_parsed():
    config = RunConfig.from_dict(
        minimal(scenario={"kind": "constant", "omega": 2, "rate": 1.0, "temperature": 1.5})
    )
    assert isinstance(config.scenario, ConstantScenario)


def test_malformed_json_reports_the_line():
    with pytest.raises(exceptions.ConfigError) as info:
        parse_config('{\n    "seed": 1,\n}\n', "broken.json")
    assert info.value.line == 3
    assert info.value.field == "broken.json"


def test_negative_rate_names_the_field():
    raw = minimal(scenario={"kind": "constant", "omega": 2, "rate": -1.0, "temperature": 1.0})
    with pytest.raises(exceptions.ConfigError) as info:
        RunConfig.from_dict(raw)
    assert info.value.field == "scenario.rate"


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"schema_version": 1}, "seed"),
        ({"seed": 1}, "schema_version"),
        (minimal(seed=-3), "seed"),
        (minimal(seed=2**64), "seed"),
        (minimal(replicas=0), "replicas"),
        (minimal(workers=True), "workers"),
        (minimal(colour="blue"), "colour"),
        (minimal(domain={"d": 2, "L": 0}), "domain.L"),
        (minimal(domain={"d": 2, "shape": {"lower": [0], "upper": [1]}}), "domain.shape"),
        (minimal(checks={"duality": 3}), "checks.duality"),
    ],
)
def test_invalid_fields(raw, field):
    with pytest.raises(exceptions.ConfigError) as info:
        RunConfig.from_dict(raw)
    assert info.value.field == field


def test_hash_ignores_key_order_workers_and_output():
    first = config_hash({"seed": 1, "replicas": 10, "workers": 1, "output_dir": "a"})
    second = config_hash({"output_dir": "b", "workers": 8, "replicas": 10, "seed": 1})
    assert first == second
    assert first != config_hash({"seed": 2, "replicas": 10})
    assert len(first) == 64


def test_overrides_update_the_hash():
    config = RunConfig.from_dict(minimal())
    assert config.with_overrides(seed=None, workers=None) is config
    reseeded = config.with_overrides(seed=7)
    assert reseeded.seed == 7
    assert reseeded.config_hash != config.config_hash
    assert config.with_overrides(workers=4).config_hash == config.config_hash


def test_relative_output_dir_follows_the_config_file(write_config):
    path = write_config(minimal(output_dir="results/run"))
    config = load_config(path)
    assert config.output_dir == os.path.join(os.path.dirname(path), "results", "run")


def test_missing_config_file(tmp_path):
    with pytest.raises(exceptions.ConfigError):
        load_config(str(tmp_path / "absent.json"))


def test_shipped_configs_load():
    for name in sorted(os.listdir(CONFIGS)):
        config = load_config(os.path.join(CONFIGS, name))
        assert config.checks, name
        with open(os.path.join(CONFIGS, name), encoding="utf-8") as f:
            assert json.load(f)["schema_version"] == 1


def test_shipped_statistical_settings():
    steady = load_config(os.path.join(CONFIGS, "steady_state.json"))
    assert steady.checks["steady_state"]["burn_in"] == 10.0
    equilibrium = load_config(os.path.join(CONFIGS, "equilibrium.json"))
    assert equilibrium.checks["equilibrium"]["n_sigma"] == 3.0


@pytest.mark.parametrize("name", ["hydro_halfspace_omega.json", "hydro_smooth_rate.json"])
def test_hydro_configs_start_on_the_bath_temperature(name):
    config = load_config(os.path.join(CONFIGS, name))
    initial = profiles.from_dict(config.checks["hydro"]["initial"])
    temperature = config.scenario.temperature
    d = config.domain.d
    shape = config.domain.shape or BoxShape.default(d)

    for axis in range(d):
        for side in (shape.lower[axis], shape.upper[axis]):
            points = np.zeros((41, d))
            other = (axis + 1) % d
            points[:, other] = np.linspace(shape.lower[other], shape.upper[other], 41)
            points[:, axis] = side
            np.testing.assert_allclose(initial(points), temperature(points), atol=1e-12)

    across = np.zeros((2, d))
    across[:, 0] = [-1e-9, 1e-9]
    assert abs(temperature(across)[1] - temperature(across)[0]) < 1e-6


def test_resolve_options():
    defaults = {"rel_tol": 0.05, "snapshots": 100, "points": [], "temperature": None}
    options = resolve_options({"rel_tol": 1, "temperature": 2.5}, defaults, "checks.x")
    assert options == {"rel_tol": 1.0, "snapshots": 100, "points": [], "temperature": 2.5}
    assert isinstance(options["rel_tol"], float)
    assert defaults["rel_tol"] == 0.05


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"bogus": 1}, "checks.x.bogus"),
        ({"snapshots": 1.5}, "checks.x.snapshots"),
        ({"snapshots": True}, "checks.x.snapshots"),
        ({"points": "0.5"}, "checks.x.points"),
    ],
)
def test_resolve_options_errors(raw, field):
    defaults = {"rel_tol": 0.05, "snapshots": 100, "points": []}
    with pytest.raises(exceptions.ConfigError) as info:
        resolve_options(raw, defaults, "checks.x")
    assert info.value.field == field


def test_check_options_of_a_run():
    config = RunConfig.from_dict(minimal(checks={"hydro": {"t": 0.2}}))
    assert config.check_options("hydro", {"t": 0.1, "n_cells": 64}) == {"t": 0.2, "n_cells": 64}
    assert config.check_options("duality", {"n_sigma": 3.0}) == {"n_sigma": 3.0}
    with pytest.raises(exceptions.ConfigError) as info:
        config.require_scenario("hydro")
    assert info.value.field == "scenario"
