# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import math

from kmp_recipe.lib import exceptions


def filter_none(items):
    return [item for item in items if item is not None]


def chunk_ranges(count, chunk_size):
    """Split 0..count-1 into consecutive ranges of at most chunk_size items.

    The partition only depends on the two arguments, never on the number of
    workers that will process it.
    """
    if chunk_size < 1:
        raise exceptions.ValueError("chunk_size must be positive.")
    return [
        range(start, min(start + chunk_size, count))
        for start in range(0, count, chunk_size)
    ]


def format_float(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return f"{value:.6g}"
