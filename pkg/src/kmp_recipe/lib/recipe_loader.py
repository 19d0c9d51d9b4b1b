# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import importlib
import inspect
import json
import os

from kmp_recipe import kmp_constants
from kmp_recipe.lib import recipe
from kmp_recipe.log import logger

METADATA_FILENAME = "metadata.json"


def get_metadata_dict(recipes_path, recipe_name):
    metadata_path = os.path.join(recipes_path, recipe_name, METADATA_FILENAME)
    if not os.path.isfile(metadata_path):
        return None

    with open(metadata_path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"{metadata_path}: {e}")
            return None


def get_recipe_names(recipes_path=kmp_constants.KMP_RECIPE_RECIPES_PATH):
    names = sorted(os.listdir(recipes_path))
    return [name for name in names if get_metadata_dict(recipes_path, name) is not None]


def get_recipe_class_from_name(recipe_name):
    metadata = get_metadata_dict(kmp_constants.KMP_RECIPE_RECIPES_PATH, recipe_name)
    if metadata is None:
        logger.error(f"Unknown recipe '{recipe_name}'.")
        return None

    module_name = metadata.get("module_name", recipe_name)
    module = importlib.import_module(f"kmp_recipe.recipes.{recipe_name}.{module_name}")

    for _, member in inspect.getmembers(module, inspect.isclass):
        if issubclass(member, recipe.Recipe) and member.__module__ == module.__name__:
            member.metadata = metadata
            return member

    logger.error(f"Recipe '{recipe_name}' does not define a Recipe subclass.")
    return None
