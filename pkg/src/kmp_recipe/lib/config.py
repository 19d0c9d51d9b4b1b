# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Run configuration.

A run is one JSON document::

    {
        "schema_version": 1,
        "name": "ness-l64",
        "seed": 20240611,
        "replicas": 64,
        "workers": 1,
        "chunk_size": 8,
        "output_dir": "out/ness-l64",
        "domain": {"d": 1, "L": 64},
        "scenario": {"kind": "random_omega", ...},
        "checks": {"steady_state": {...}}
    }

Every recipe validates its own section of ``checks`` through
`resolve_options`. The configuration hash covers everything that can change
a result; ``workers`` and ``output_dir`` are left out.
"""

import copy
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

from kmp_recipe import kmp_constants
from kmp_recipe.lib import exceptions
from kmp_recipe.lib.environment import BoxShape, build_box_domain, scenario_from_dict

_TOP_LEVEL_FIELDS = {
    "schema_version",
    "name",
    "seed",
    "replicas",
    "workers",
    "chunk_size",
    "output_dir",
    "domain",
    "scenario",
    "checks",
}
_UNHASHED_FIELDS = ("workers", "output_dir")

DEFAULT_REPLICAS = 1000
DEFAULT_CHUNK_SIZE = 64


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require_int(raw, name, field_path, default=None, minimum=0):
    value = raw.get(name, default)
    if not _is_int(value) or value < minimum:
        raise exceptions.ConfigError(
            field_path, f"expected an integer >= {minimum}, got {value!r}."
        )
    return value


@dataclass(frozen=True)
class DomainConfig:
    d: int = 1
    L: int = 16
    shape: BoxShape = None
    closed: bool = False

    def build(self, L=None):
        return build_box_domain(
            self.d, self.L if L is None else L, self.shape, closed=self.closed
        )

    @classmethod
    def from_dict(cls, raw, field_path="domain"):
        if not isinstance(raw, dict):
            raise exceptions.ConfigError(field_path, "expected an object.")
        unknown = set(raw) - {"d", "L", "shape", "closed"}
        if unknown:
            name = sorted(unknown)[0]
            raise exceptions.ConfigError(f"{field_path}.{name}", "unknown field.")

        d = _require_int(raw, "d", f"{field_path}.d", default=1, minimum=1)
        L = _require_int(raw, "L", f"{field_path}.L", default=16, minimum=1)

        shape = None
        if raw.get("shape") is not None:
            spec = raw["shape"]
            path = f"{field_path}.shape"
            if not isinstance(spec, dict) or set(spec) != {"lower", "upper"}:
                raise exceptions.ConfigError(path, "expected {lower, upper}.")
            try:
                shape = BoxShape(tuple(spec["lower"]), tuple(spec["upper"]))
            except (TypeError, exceptions.ValueError) as e:
                raise exceptions.ConfigError(path, str(e)) from e
            if shape.d != d:
                raise exceptions.ConfigError(path, f"expected {d} bounds per side.")

        closed = raw.get("closed", False)
        if not isinstance(closed, bool):
            raise exceptions.ConfigError(f"{field_path}.closed", "expected true or false.")
        return cls(d, L, shape, closed)


@dataclass(frozen=True)
class RunConfig:
    name: str
    seed: int
    replicas: int = DEFAULT_REPLICAS
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE
    output_dir: str = "kmp-output"
    domain: DomainConfig = field(default_factory=DomainConfig)
    scenario: object = None
    checks: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False, compare=False)
    schema_version: int = kmp_constants.KMP_CONFIG_SCHEMA_VERSION

    @property
    def config_hash(self):
        return config_hash(self.raw)

    def require_scenario(self, recipe_name):
        if self.scenario is None:
            raise exceptions.ConfigError(
                "scenario", f"the '{recipe_name}' check needs a scenario."
            )
        return self.scenario

    def check_options(self, recipe_name, defaults):
        return resolve_options(
            self.checks.get(recipe_name, {}), defaults, f"checks.{recipe_name}"
        )

    def with_overrides(self, **overrides):
        """Apply command-line overrides; None values are ignored."""
        overrides = {key: value for key, value in overrides.items() if value is not None}
        if not overrides:
            return self
        raw = copy.deepcopy(self.raw)
        raw.update(overrides)
        return dataclasses.replace(self, raw=raw, **overrides)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise exceptions.ConfigError("config", "expected a JSON object.")

        unknown = set(raw) - _TOP_LEVEL_FIELDS
        if unknown:
            raise exceptions.ConfigError(sorted(unknown)[0], "unknown field.")

        version = raw.get("schema_version")
        if version != kmp_constants.KMP_CONFIG_SCHEMA_VERSION:
            raise exceptions.ConfigError(
                "schema_version",
                f"expected {kmp_constants.KMP_CONFIG_SCHEMA_VERSION}, got {version!r}.",
            )

        name = raw.get("name", "kmp-run")
        if not isinstance(name, str) or not name:
            raise exceptions.ConfigError("name", "expected a non-empty string.")

        if "seed" not in raw:
            raise exceptions.ConfigError("seed", "missing; every run needs a seed.")
        seed = _require_int(raw, "seed", "seed")
        if seed >= 2**64:
            raise exceptions.ConfigError("seed", "must fit in 64 bits.")

        replicas = _require_int(raw, "replicas", "replicas", DEFAULT_REPLICAS, 1)
        workers = _require_int(raw, "workers", "workers", 1, 1)
        chunk_size = _require_int(raw, "chunk_size", "chunk_size", DEFAULT_CHUNK_SIZE, 1)

        output_dir = raw.get("output_dir", "kmp-output")
        if not isinstance(output_dir, str) or not output_dir:
            raise exceptions.ConfigError("output_dir", "expected a non-empty path.")

        domain = DomainConfig.from_dict(raw.get("domain", {}))
        scenario = None
        if raw.get("scenario") is not None:
            scenario = scenario_from_dict(raw["scenario"], "scenario")

        checks = raw.get("checks", {})
        if not isinstance(checks, dict):
            raise exceptions.ConfigError("checks", "expected an object keyed by check name.")
        for check_name, options in checks.items():
            if not isinstance(options, dict):
                raise exceptions.ConfigError(f"checks.{check_name}", "expected an object.")

        return cls(
            name=name,
            seed=seed,
            replicas=replicas,
            workers=workers,
            chunk_size=chunk_size,
            output_dir=output_dir,
            domain=domain,
            scenario=scenario,
            checks=checks,
            raw=copy.deepcopy(raw),
            schema_version=version,
        )


def canonical_json(raw):
    return json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(raw):
    hashed = {key: value for key, value in raw.items() if key not in _UNHASHED_FIELDS}
    return hashlib.sha256(canonical_json(hashed).encode("utf-8")).hexdigest()


def parse_config(text, source="<config>"):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise exceptions.ConfigError(
            source, f"invalid JSON: {e.msg} (column {e.colno}).", line=e.lineno
        ) from e
    return RunConfig.from_dict(raw)


def load_config(path):
    if not os.path.isfile(path):
        raise exceptions.ConfigError("config", f"{path} does not exist.")
    with open(path, encoding="utf-8") as f:
        config = parse_config(f.read(), os.path.basename(path))

    # Relative output directories are taken from the config file location.
    if not os.path.isabs(config.output_dir):
        base = os.path.dirname(os.path.abspath(path))
        config = dataclasses.replace(
            config, output_dir=os.path.normpath(os.path.join(base, config.output_dir))
        )
    return config


def _matches(value, default):
    if default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return _is_number(value)
    if isinstance(default, int):
        return _is_int(value)
    if isinstance(default, (list, tuple)):
        return isinstance(value, list)
    return isinstance(value, type(default))


def resolve_options(raw, defaults, field_path):
    """Merge a check section over its defaults, checking names and types."""
    if not isinstance(raw, dict):
        raise exceptions.ConfigError(field_path, "expected an object.")

    options = copy.deepcopy(defaults)
    for name, value in raw.items():
        path = f"{field_path}.{name}"
        if name not in defaults:
            raise exceptions.ConfigError(path, "unknown option.")
        if not _matches(value, defaults[name]):
            expected = type(defaults[name]).__name__
            raise exceptions.ConfigError(path, f"expected {expected}, got {value!r}.")
        options[name] = float(value) if isinstance(defaults[name], float) else value
    return options
