"""
Exception hierarchy for the off-grid channel estimation toolkit
"""

from typing import Optional


class OffGridError(Exception):
    """Base class for every error raised by this package"""


class NumericalBreakdownError(OffGridError):
    """A Hermitian system could not be factorized or a closed form degenerated"""

    def __init__(self, message: str, iteration: Optional[int] = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class EmptySupportError(OffGridError, ValueError):
    """Channel reconstruction was asked for an empty support set"""


class DimensionMismatchError(OffGridError, ValueError):
    """Array shapes disagree with the configured (N, T, J) dimensions"""


class DatasetFormatError(OffGridError):
    """A dataset container is malformed, truncated or of an unknown version"""


class CheckpointFormatError(DatasetFormatError):
    """An agent checkpoint container is malformed, truncated or of an unknown version"""


class TrainingDivergenceError(OffGridError):
    """Training produced a non-finite loss or parameter"""


class ConfigError(OffGridError):
    """An experiment configuration document failed validation"""
