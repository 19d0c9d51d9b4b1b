# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import pytest

from kmp_recipe.lib import exceptions, helpers
from kmp_recipe.lib.context import ConcurrentContext, Context, SequentialContext
from kmp_recipe.lib.sampling import RngStream


def draw_chunk(replica_ids, rng, scale=1.0):
    return [scale * rng.for_replica(i).generator.random() for i in replica_ids]


def test_modes():
    assert Context.get_modes() == ["sequential", "concurrent"]
    assert isinstance(Context.create_context(), SequentialContext)
    with pytest.raises(exceptions.ValueError):
        Context.create_context("cluster")


def test_sequential_map_keeps_the_order():
    with Context.create_context("sequential") as context:
        results = context.wait(context.map(draw_chunk, [range(3), range(3, 5)], RngStream(1)))
    assert len(results) == 2
    assert [len(chunk) for chunk in results] == [3, 2]


def test_results_do_not_depend_on_the_workers():
    chunks = helpers.chunk_ranges(40, 7)
    with SequentialContext() as context:
        sequential = context.wait(context.map(draw_chunk, chunks, RngStream(3), scale=2.0))
    with ConcurrentContext(3) as context:
        concurrent = context.wait(context.map(draw_chunk, chunks, RngStream(3), scale=2.0))
    assert concurrent == sequential


def test_chunk_ranges():
    assert helpers.chunk_ranges(10, 4) == [range(0, 4), range(4, 8), range(8, 10)]
    assert helpers.chunk_ranges(0, 4) == []
    with pytest.raises(exceptions.ValueError):
        helpers.chunk_ranges(10, 0)


def test_format_float():
    assert helpers.format_float(0.123456789) == "0.123457"
    assert helpers.format_float(float("nan")) == "nan"
    assert helpers.format_float(None) == "nan"
    assert helpers.filter_none([1, None, 2]) == [1, 2]
