"""
Exception types raised across the package.
"""


class DatasetError(ValueError):
    """Raised when input data is missing, malformed, or lacks a required class."""


class UnsplittableNodeError(ValueError):
    """Raised when no candidate feature yields a positive AUPRC."""


class TrainingError(RuntimeError):
    """Raised when model training cannot produce a usable result."""


class BenchmarkError(RuntimeError):
    """Raised when too many benchmark repetitions fail."""
