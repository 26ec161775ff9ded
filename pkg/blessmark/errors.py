"""Exception hierarchy shared by every blessmark module.

Each error carries the process exit code the CLI maps it to, so library code
raises domain errors and never has to know about click. Errors about bad
values also subclass ``ValueError`` for callers that catch the builtin.
"""

from __future__ import annotations


class BlessMarkError(Exception):
    """Root of all blessmark failures."""

    exit_code = 1


class ImageFormatError(BlessMarkError):
    """Malformed, unsupported or truncated PGM/PPM data."""

    exit_code = 5


class DataError(BlessMarkError):
    """Missing, unreadable or mismatched dataset / payload files."""

    exit_code = 5


class WeightsFormatError(BlessMarkError):
    """A weight file that cannot be decoded (magic, version, truncation)."""

    exit_code = 5


class WeightsVersionError(WeightsFormatError):
    """The weight file was written by an incompatible format version."""


class CapacityError(BlessMarkError):
    """The payload does not fit the available NROI slots."""

    exit_code = 3

    def __init__(self, message: str, *, required: int, available: int):
        super().__init__(message)
        self.required = required
        self.available = available


class ModelMismatchError(BlessMarkError):
    """Loaded weights disagree with the run configuration."""

    exit_code = 4


class BlockGridError(BlessMarkError, ValueError):
    """Invalid block size, block reference or block shape."""

    exit_code = 2


class ShapeError(BlessMarkError, ValueError):
    """Tensor or layer shapes that cannot be combined."""

    exit_code = 2


class MetricError(BlessMarkError, ValueError):
    """A metric that is undefined for its inputs."""

    exit_code = 2


class TrainingError(BlessMarkError, ValueError):
    """Training data that cannot produce a model."""

    exit_code = 2


class GuardExhaustedError(BlessMarkError):
    """Integer conversion kept destroying an embedded bit."""


class ConvergenceError(BlessMarkError):
    """The embedding loop hit max_iterations without a stable ROI map."""


class ConfigError(BlessMarkError, ValueError):
    """A run configuration that fails validation."""

    exit_code = 2
