"""Shared exception types."""


class DataError(ValueError):
    """Malformed input data: bad CSV rows, vector files, or corpus contents."""


class CheckpointError(ValueError):
    """Unreadable or incompatible checkpoint file."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""
