# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

from kmp_recipe.lib.context import Context
from kmp_recipe.lib.exceptions import *
