"""
errors.py — Categorized exceptions for the mind-wandering pipeline.

Every pipeline exception carries a ``category`` string. The CLI turns the
category into the error message prefix and the process exit code.
"""

from typing import ClassVar


class PipelineError(Exception):
    """Base class for all pipeline errors."""

    category: ClassVar[str] = "internal"
    exit_code: ClassVar[int] = 1


class ConfigError(PipelineError, ValueError):
    """Configuration file is structurally invalid or references unknown items."""

    category = "config"
    exit_code = 2


class DatasetError(PipelineError, ValueError):
    """Input recordings, events or manifests violate the on-disk contract."""

    category = "dataset"
    exit_code = 3


class UndefinedValueError(PipelineError, ValueError):
    """A feature or estimator has no defined value for the given input."""

    category = "undefined"
    exit_code = 4


class UndefinedEntropyError(UndefinedValueError):
    """Sample entropy with no template matches at length m or m + 1.

    Attributes:
        a: Matching pair count for (m + 1)-length templates.
        b: Matching pair count for m-length templates.
    """

    def __init__(self, a: int, b: int) -> None:
        self.a = int(a)
        self.b = int(b)
        super().__init__(f"undefined sample entropy (A={self.a}, B={self.b})")


class DegenerateSeriesError(UndefinedValueError):
    """Series has zero variance (or zero power) where a spread is required."""


class SelectionError(PipelineError, ValueError):
    """Channel or feature selection request cannot be satisfied."""

    category = "selection"
    exit_code = 5
