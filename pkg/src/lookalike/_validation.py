"""Small input-validation helpers shared by the pipeline modules."""

from collections.abc import Sequence

import numpy as np

from .errors import ValidationError


def as_float_vector(value, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} is not numeric") from None
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")


def check_probability(value: float, name: str, low: float = 0.0, high: float = 1.0) -> None:
    if not (low <= value <= high):
        raise ValidationError(f"{name} must lie in [{low}, {high}], got {value}")


def check_permutation(order: Sequence, expected: Sequence, name: str = "order") -> None:
    """order must contain exactly the elements of expected, each once."""
    if len(order) != len(expected) or set(order) != set(expected) or len(set(order)) != len(order):
        raise ValidationError(
            f"{name} is not a permutation of the expected {len(expected)} elements"
        )


def check_index_permutation(order: Sequence[int], n: int, name: str = "permutation") -> None:
    """order must be a permutation of 0..n-1."""
    if sorted(order) != list(range(n)):
        raise ValidationError(f"{name} is not a permutation of 0..{n - 1}")
