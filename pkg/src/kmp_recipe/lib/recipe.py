# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import os

from kmp_recipe import kmp_constants
from kmp_recipe.lib import config as run_config
from kmp_recipe.lib import exceptions, export, helpers
from kmp_recipe.lib.args import ArgumentParser, Option
from kmp_recipe.lib.sampling import RngStream
from kmp_recipe.log import logger


def load_run_config(parsed_args):
    """Load the configuration named on the command line and apply overrides."""
    config = run_config.load_config(parsed_args.config)
    return config.with_overrides(
        seed=getattr(parsed_args, "seed", None),
        replicas=getattr(parsed_args, "replicas", None),
        chunk_size=getattr(parsed_args, "chunk_size", None),
        workers=getattr(parsed_args, "workers", None),
        output_dir=getattr(parsed_args, "output", None),
    )


class Recipe:
    """Base class of a validation pipeline.

    Subclasses set ``default_options`` (the accepted keys of their section
    under ``checks``, with defaults) and ``stream_key`` (keeps the random
    streams of different recipes apart), and implement ``run``.
    """

    metadata = {}
    default_options = {}
    stream_key = 0

    def __init__(self, parsed_args, config=None):
        self._parsed_args = parsed_args
        self._config = load_run_config(parsed_args) if config is None else config
        self._options = self._config.check_options(self.get_name(), self.default_options)
        for name in ("convention", "n_sigma"):
            value = getattr(parsed_args, name, None)
            if value is not None and name in self._options:
                self._options[name] = value

        self.output_dir = None
        self._output_files = []
        self._gates = []
        self._analysis_dict = {
            "RecipeName": self.get_name(),
            "DisplayName": self.metadata.get("display_name", self.get_name()),
            "ConfigName": self._config.name,
            "ConfigHash": self._config.config_hash,
            "Seed": self._config.seed,
            "Options": self._options,
        }

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if exc_type is not None:
            logger.debug(f"{self.get_name()}: stopped by {exc_type.__name__}.")

    @classmethod
    def get_name(cls):
        return cls.metadata.get("module_name", cls.__module__.rsplit(".", 1)[-1])

    @property
    def config(self):
        return self._config

    @property
    def options(self):
        return self._options

    @property
    def gates(self):
        return list(self._gates)

    @property
    def passed(self):
        return all(gate.passed for gate in self._gates)

    def root_stream(self):
        return RngStream(self._config.seed, 0, (self.stream_key,))

    def replica_chunks(self, replicas=None):
        count = self._config.replicas if replicas is None else replicas
        chunks = helpers.chunk_ranges(count, self._config.chunk_size)
        logger.debug(
            f"{self.get_name()}: {count} replicas in {len(chunks)} chunks"
            f" of at most {self._config.chunk_size}."
        )
        return chunks

    def create_output_dir(self):
        output_dir = os.path.join(self._config.output_dir, self.get_name())
        force = getattr(self._parsed_args, "force_overwrite", False)
        if os.path.isdir(output_dir) and os.listdir(output_dir) and not force:
            raise exceptions.ValueError(
                f"{output_dir} is not empty. Use '--force-overwrite' to replace it."
            )
        os.makedirs(output_dir, exist_ok=True)
        self.output_dir = output_dir

    def add_output_file(self, filename):
        if self.output_dir is None:
            self.create_output_dir()
        if filename not in self._output_files:
            self._output_files.append(filename)
        return os.path.join(self.output_dir, filename)

    def write_table(self, name, frame):
        """Write a data table as CSV and Parquet."""
        if frame.empty:
            raise exceptions.NoDataError(f"{self.get_name()}: table '{name}' is empty.")
        export.to_csv(frame, self.add_output_file(f"{name}.csv"))
        export.to_parquet(frame, self.add_output_file(f"{name}.parquet"))
        return frame

    def add_gate(self, gate):
        self._gates.append(gate)
        status = "PASS" if gate.passed else "FAIL"
        logger.info(
            f"{self.get_name()}: {status} {gate.name}: value={helpers.format_float(gate.value)}"
            f" reference={helpers.format_float(gate.reference)}"
            f" tolerance={helpers.format_float(gate.tolerance)} ({gate.detail})"
        )
        return gate

    def create_analysis_file(self):
        filename = self.get_name() + kmp_constants.KMP_ANALYSIS_FILE_EXT
        export.write_json(self._analysis_dict, os.path.join(self.output_dir, filename))

    def save_analysis_file(self):
        self._analysis_dict.update(
            {
                "Outputs": self._output_files,
                "Gates": [gate.to_dict() for gate in self._gates],
                "Passed": self.passed,
            }
        )
        self.create_analysis_file()

    def summary(self):
        return {
            "display_name": self._analysis_dict["DisplayName"],
            "passed": self.passed,
            "output_dir": self.output_dir,
            "gates": [gate.to_dict() for gate in self._gates],
        }

    def run(self, context):
        self.create_output_dir()
        logger.info(f"Running '{self.get_name()}' into {self.output_dir}.")

    @classmethod
    def get_argument_parser(cls):
        description = " ".join(cls.metadata.get("description", []))
        parser = ArgumentParser(prog=cls.get_name(), description=description or None)

        parser.add_recipe_argument(Option.CONFIG)
        parser.add_recipe_argument(Option.SEED)
        parser.add_recipe_argument(Option.REPLICAS)
        parser.add_recipe_argument(Option.CHUNK_SIZE)
        parser.add_recipe_argument(Option.OUTPUT)
        parser.add_recipe_argument(Option.FORCE_OVERWRITE)
        return parser
