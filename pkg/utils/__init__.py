"""
Shared Utilities for the Off-Grid Channel Estimation Toolkit
Provides error types, Hermitian linear algebra, seeded streams and logging setup
"""

from .errors import (
    OffGridError,
    NumericalBreakdownError,
    EmptySupportError,
    DimensionMismatchError,
    DatasetFormatError,
    CheckpointFormatError,
    TrainingDivergenceError,
    ConfigError,
)
from .linalg import hermitian_factor, hermitian_solve, hermitian_inverse
from .rng import make_rng, spawn_rngs, complex_normal
from .logging_setup import configure_logging

__all__ = [
    'OffGridError',
    'NumericalBreakdownError',
    'EmptySupportError',
    'DimensionMismatchError',
    'DatasetFormatError',
    'CheckpointFormatError',
    'TrainingDivergenceError',
    'ConfigError',
    'hermitian_factor',
    'hermitian_solve',
    'hermitian_inverse',
    'make_rng',
    'spawn_rngs',
    'complex_normal',
    'configure_logging',
]

__version__ = '1.0.0'
