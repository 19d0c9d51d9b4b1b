# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import sys

if sys.version_info < (3, 10):
    raise RuntimeError("Python 3.10 or later is required.")

from kmp_recipe import log
from kmp_recipe.kmp_constants import *
from kmp_recipe.log import logger

log.customize_logger("stderr", "info")

try:
    from kmp_recipe.lib import *
except ModuleNotFoundError as e:
    logger.error(
        f"{e}\nThe packages listed in the project dependencies must be installed."
        " Install them with 'pip install kmp-recipe'."
    )
    sys.exit(KMP_EXIT_RUNTIME_ERROR)
