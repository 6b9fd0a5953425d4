"""Exception hierarchy shared by all modules; the CLI maps these to exit codes."""

from __future__ import annotations


class PottsError(Exception):
    exit_code = 1


class InvalidInputError(PottsError, ValueError):
    exit_code = 2


class ResourceLimitError(PottsError):
    exit_code = 3


class ConvergenceError(PottsError):
    exit_code = 4


class DependencyError(PottsError):
    exit_code = 2
