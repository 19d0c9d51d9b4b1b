# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Writers for the files a run leaves on disk.

CSV is the reference format; floats carry 17 significant digits so that
reruns can be compared byte for byte. Parquet copies are written with pyarrow
for downstream notebooks.
"""

import json
import math

import numpy as np

from kmp_recipe.kmp_constants import KMP_CSV_FLOAT_FORMAT


def to_csv(frame, path):
    frame.to_csv(path, index=False, float_format=KMP_CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def to_parquet(frame, path):
    frame.to_parquet(path, engine="pyarrow", index=False)
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def write_json(data, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, indent=4, sort_keys=True)
        f.write("\n")
    return path
