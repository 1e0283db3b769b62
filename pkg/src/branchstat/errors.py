"""Exception hierarchy shared by every module."""

from __future__ import annotations


class BranchStatError(Exception):
    """Base class for all errors raised by branchstat."""


class InvalidInputError(BranchStatError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(BranchStatError):
    """A case file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.message = message
        self.line = line
        self.path = path
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.path or "<text>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        return f"{where}: {self.message}"


class InsufficientDataError(BranchStatError):
    """Too few observations for the requested statistic."""


class DegenerateSampleError(InsufficientDataError):
    """All observations are identical, so no spread can be estimated."""


class FitFailedError(BranchStatError):
    """A numerical fit did not produce a feasible result."""


class NoFiniteMeanError(InvalidInputError):
    """The distribution has no finite mean (GEV with shape >= 1)."""


class CannotTuneError(BranchStatError):
    """The reference lacks the data needed to tune a parameter."""

    def __init__(self, message: str, parameter: object = None):
        self.parameter = parameter
        super().__init__(message)
