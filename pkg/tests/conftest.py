# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import json

import pytest

from kmp_recipe.lib.environment import build_chain_environment
from kmp_recipe.lib.sampling import RngStream


@pytest.fixture
def rng():
    return RngStream(20240611)


@pytest.fixture
def homogeneous_chain():
    """ω = 2 and r = 1 everywhere on L = 10, so that ψ is identically 1."""
    return build_chain_environment([2] * 9, [1.0] * 10, 1.0, 2.0)


@pytest.fixture
def mixed_chain():
    return build_chain_environment([1, 2, 3, 2], [1.0, 0.5, 2.0, 1.0, 1.5], 1.0, 2.0)


@pytest.fixture
def write_config(tmp_path):
    def write(raw, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(raw, indent=4), encoding="utf-8")
        return str(path)

    return write
