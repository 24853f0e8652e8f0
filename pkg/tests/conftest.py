import numpy as np
import pytest

from lookalike.store import EmbeddingRecord, EmbeddingSet


def make_set(vectors, identities=None, normalized=False, prefix="item"):
    """Build a small EmbeddingSet from a list of vectors."""
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if identities is None:
        identities = [f"person-{i}" for i in range(len(vectors))]
    records = [
        EmbeddingRecord(f"{prefix}-{i:03d}", identities[i], v) for i, v in enumerate(vectors)
    ]
    return EmbeddingSet(records, normalized=normalized)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
