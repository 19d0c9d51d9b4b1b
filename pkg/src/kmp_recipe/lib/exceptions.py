# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

import builtins


class KmpError(Exception):
    pass


class ValueError(KmpError, builtins.ValueError):
    pass


class ConfigError(ValueError):
    """Raised when a run configuration cannot be parsed or validated.

    Parameters
    ----------
    field : str
        Dotted path of the offending field (e.g. 'scenario.rate').
    message : str
        Human readable description of the problem.
    line : int, optional
        Line number in the configuration file, when known.
    """

    def __init__(self, field, message, line=None):
        self.field = field
        self.line = line
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{location}: {message}")


class DomainError(ValueError):
    pass


class MomentOverflowError(KmpError, OverflowError):
    pass


class SolverError(KmpError):
    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class NoDataError(KmpError):
    pass


__all__ = [
    "KmpError",
    "ValueError",
    "ConfigError",
    "DomainError",
    "MomentOverflowError",
    "SolverError",
    "NoDataError",
]
