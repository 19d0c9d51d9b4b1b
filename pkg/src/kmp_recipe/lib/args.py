# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import argparse
import os
from enum import Enum

from kmp_recipe.lib.context import Context


class Option(Enum):
    """Common recipe options.

    Each value is the argparse flag; the matching keyword arguments live in
    ``_OPTION_KWARGS``.
    """

    CONFIG = "config"
    SEED = "--seed"
    REPLICAS = "--replicas"
    OUTPUT = "--output"
    FORCE_OVERWRITE = "--force-overwrite"
    CHUNK_SIZE = "--chunk-size"
    CONVENTION = "--convention"
    N_SIGMA = "--n-sigma"


def existing_file(path):
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"{path} does not exist.")
    return os.path.abspath(path)


def non_negative_int(value):
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"{value} is negative.")
    return number


def positive_int(value):
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"{value} is not a positive integer.")
    return number


def positive_float(value):
    number = float(value)
    if not number > 0:
        raise argparse.ArgumentTypeError(f"{value} is not positive.")
    return number


_OPTION_KWARGS = {
    Option.CONFIG: dict(
        type=existing_file,
        metavar="CONFIG",
        help="Path to the JSON run configuration",
    ),
    Option.SEED: dict(
        type=non_negative_int,
        help="Override the master seed of the configuration",
    ),
    Option.REPLICAS: dict(
        type=positive_int,
        help="Override the number of Monte Carlo replicas",
    ),
    Option.OUTPUT: dict(
        type=os.path.abspath,
        help="Override the output directory",
    ),
    Option.FORCE_OVERWRITE: dict(
        action="store_true",
        help="Overwrite existing output files",
    ),
    Option.CHUNK_SIZE: dict(
        type=positive_int,
        help="Override the number of replicas per task",
    ),
    Option.CONVENTION: dict(
        choices=("literal", "martingale"),
        help="Boundary convention of the dual storage edges",
    ),
    Option.N_SIGMA: dict(
        type=positive_float,
        help="Width of the statistical gates in standard errors",
    ),
}


class ArgumentParser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)
        self.recipe_group = self.add_argument_group("recipe arguments")
        self.context_group = self.add_argument_group("context arguments")

    def add_argument_to_group(self, group, option, **kwargs):
        options = dict(_OPTION_KWARGS[option])
        options.update(kwargs)
        return group.add_argument(option.value, **options)

    def add_recipe_argument(self, option, **kwargs):
        return self.add_argument_to_group(self.recipe_group, option, **kwargs)

    def add_context_arguments(self):
        self.context_group.add_argument(
            "--mode",
            choices=Context.get_modes(),
            help="Execution mode (defaults to concurrent when workers > 1)",
        )
        self.context_group.add_argument(
            "--workers",
            type=positive_int,
            help="Number of worker processes; results do not depend on it",
        )
