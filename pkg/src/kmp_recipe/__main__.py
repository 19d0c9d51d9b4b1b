# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import argparse
import os
import sys

import kmp_recipe
from kmp_recipe import Context, log
from kmp_recipe.lib import profiles, recipe, recipe_loader
from kmp_recipe.lib.environment import SCENARIO_KINDS
from kmp_recipe.lib.summary import build_run_summary, write_run_summary
from kmp_recipe.log import logger

RUN_ALL = "run"


def print_recipe_list():
    print("\nThe following built-in recipes are available:\n")

    for recipe_name in recipe_loader.get_recipe_names(kmp_recipe.KMP_RECIPE_RECIPES_PATH):
        metadata = recipe_loader.get_metadata_dict(
            kmp_recipe.KMP_RECIPE_RECIPES_PATH, recipe_name
        )
        display_name = metadata.get("display_name", "NO DISPLAY NAME")
        print(f"  {recipe_name} -- {display_name}")

    print(f"\n  {RUN_ALL} -- Every check listed under 'checks' in the configuration")


def list_scenarios():
    """Catalog of the built-in scenario kinds, their parameters and claims."""
    lines = ["Built-in scenarios:", ""]
    for kind, scenario_class in SCENARIO_KINDS.items():
        lines.append(f"  {kind}")
        lines.append(f"    claim: {scenario_class.claim}")
        for name, doc in scenario_class.parameters.items():
            lines.append(f"    {name}: {doc}")
        lines.append("")
    lines.append(f"Named profile kinds: {', '.join(profiles.registered_kinds())}")
    return "\n".join(lines) + "\n"


def get_recipe_parsed_args(parser, recipe_args):
    parser.add_context_arguments()
    return parser.parse_args(recipe_args)


def create_context(parsed_args, config):
    mode = getattr(parsed_args, "mode", None)
    if mode is None:
        mode = "concurrent" if config.workers > 1 else "sequential"
    return Context.create_context(mode, config.workers)


def get_recipe_classes(recipe_names):
    classes = []
    for recipe_name in recipe_names:
        recipe_class = recipe_loader.get_recipe_class_from_name(recipe_name)
        if recipe_class is None:
            raise kmp_recipe.ConfigError(f"checks.{recipe_name}", "unknown recipe.")
        classes.append(recipe_class)
    return classes


@log.time("Total")
def run_recipes(recipe_classes, parsed_args, config, recipes):
    with create_context(parsed_args, config) as context:
        for recipe_class in recipe_classes:
            with recipe_class(parsed_args, config) as current:
                recipes.append(current)
                current.run(context)


def run(config, recipe_names=None, parsed_args=None):
    """Run the named checks, or every check of the configuration.

    Writes the per-recipe outputs, ``summary.json`` and ``run.log`` into the
    output directory and returns the exit code.
    """
    parsed_args = parsed_args or argparse.Namespace()
    if recipe_names is None:
        recipe_names = list(config.checks)
    if not recipe_names:
        logger.error("The configuration lists no checks to run.")
        return kmp_recipe.KMP_EXIT_CONFIG_ERROR

    os.makedirs(config.output_dir, exist_ok=True)
    log.add_file_handler(os.path.join(config.output_dir, kmp_recipe.KMP_LOG_FILENAME))
    logger.info(f"Run '{config.name}' with seed {config.seed}, config {config.config_hash}.")

    recipes = []
    errors = []
    exit_code = kmp_recipe.KMP_EXIT_PASS
    try:
        run_recipes(get_recipe_classes(recipe_names), parsed_args, config, recipes)
    except kmp_recipe.ConfigError as e:
        logger.error(f"Configuration error: {e}")
        errors.append(str(e))
        exit_code = kmp_recipe.KMP_EXIT_CONFIG_ERROR
    except kmp_recipe.NoDataError as e:
        # Early exit due to lack of data.
        logger.info(f"No output generated: {e}")
    except kmp_recipe.KmpError as e:
        logger.error(f"{e}")
        errors.append(str(e))
        exit_code = kmp_recipe.KMP_EXIT_RUNTIME_ERROR
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        errors.append(f"{type(e).__name__}: {e}")
        exit_code = kmp_recipe.KMP_EXIT_RUNTIME_ERROR

    summary = build_run_summary(config, recipes, errors)
    write_run_summary(summary, config.output_dir)
    if exit_code == kmp_recipe.KMP_EXIT_PASS and summary["status"] != "PASS":
        exit_code = kmp_recipe.KMP_EXIT_GATE_FAILURE

    logger.info(f"Run finished with status {summary['status']} (exit code {exit_code}).")
    log.remove_file_handler()
    return exit_code


def get_main_parsed_args():
    parser = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    parser.add_argument(
        "--help-recipes", action="store_true", help="Print available recipes"
    )
    parser.add_argument(
        "--list-scenarios", action="store_true", help="Print the built-in scenarios"
    )
    parser.add_argument(
        "--log-level",
        choices=log.levels.keys(),
        default="info",
        help="Set the log level",
    )
    parser.add_argument(
        "--log-stream",
        choices=log.streams.keys(),
        default="stderr",
        help="Set the log stream",
    )

    return parser.parse_known_args()


def get_recipe_parser(recipe_name):
    if recipe_name == RUN_ALL:
        parser = recipe.Recipe.get_argument_parser()
        parser.prog = RUN_ALL
        return parser

    recipe_class = recipe_loader.get_recipe_class_from_name(recipe_name)
    if recipe_class is None:
        return None
    return recipe_class.get_argument_parser()


def main():
    parsed_args, remaining_args = get_main_parsed_args()

    log.customize_logger(parsed_args.log_stream, parsed_args.log_level)

    if parsed_args.help_recipes:
        print_recipe_list()
        sys.exit(kmp_recipe.KMP_EXIT_PASS)

    if parsed_args.list_scenarios:
        print(list_scenarios(), end="")
        sys.exit(kmp_recipe.KMP_EXIT_PASS)

    if not remaining_args:
        logger.error("No recipe specified.")
        sys.exit(kmp_recipe.KMP_EXIT_CONFIG_ERROR)

    if all(arg.startswith("-") or arg in ("--help", "-h") for arg in remaining_args):
        print("usage: <recipe name> <config> [<recipe args>]")
        print_recipe_list()
        print("\nTo get help on a specific recipe, run '<recipe name> --help'.")
        sys.exit(kmp_recipe.KMP_EXIT_PASS)

    recipe_name = remaining_args[0]
    parser = get_recipe_parser(recipe_name)
    if parser is None:
        sys.exit(kmp_recipe.KMP_EXIT_CONFIG_ERROR)
    recipe_args = get_recipe_parsed_args(parser, remaining_args[1:])

    try:
        config = recipe.load_run_config(recipe_args)
    except kmp_recipe.ConfigError as e:
        logger.error(f"Configuration error: {e}")
        sys.exit(kmp_recipe.KMP_EXIT_CONFIG_ERROR)

    recipe_names = None if recipe_name == RUN_ALL else [recipe_name]
    exit_code = run(config, recipe_names, recipe_args)
    print(f"Generated:\n    {config.output_dir}")
    sys.exit(exit_code)


if __name__ == "__main__":
    main()
