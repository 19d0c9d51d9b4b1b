# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import os

KMP_RECIPE_PATH = os.path.abspath(os.path.dirname(__file__))
KMP_RECIPE_RECIPES_PATH = os.path.join(KMP_RECIPE_PATH, "recipes")

KMP_ANALYSIS_FILE_EXT = ".kmp-analysis"
KMP_SUMMARY_FILENAME = "summary.json"
KMP_LOG_FILENAME = "run.log"

KMP_CONFIG_SCHEMA_VERSION = 1

# Floats in CSV outputs round-trip exactly with 17 significant digits.
KMP_CSV_FLOAT_FORMAT = "%.17g"

KMP_EXIT_PASS = 0
KMP_EXIT_GATE_FAILURE = 1
KMP_EXIT_CONFIG_ERROR = 2
KMP_EXIT_RUNTIME_ERROR = 3
