"""Load, validate and index base face embeddings.

The store is the substrate for every other module: distances between base
embeddings drive pair binning, candidate selection and easy-negative
sampling. Sets are immutable after load and safe for concurrent reads.

File format: JSONL, one object per line with keys ``item_id`` (string),
``identity`` (string) and ``vector`` (array of numbers). The dimension is
inferred from the first line and enforced for the rest.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_vector, check_same_length
from .errors import NotFoundError, ParseError, ValidationError
from .jsonl import read_jsonl, write_jsonl

UNIT_NORM_ATOL = 1e-6


@dataclass(frozen=True)
class EmbeddingRecord:
    """One item: a unique id, an identity label, and its base vector."""

    item_id: str
    identity: str
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", as_float_vector(self.vector, "vector"))
        self.vector.setflags(write=False)


class EmbeddingSet:
    """An immutable, indexed collection of embedding records sharing one dim.

    Exposes a stacked read-only ``matrix`` (n, dim) for vectorized work plus
    id/identity lookups. ``normalized`` asserts every vector is unit L2.
    """

    def __init__(self, records: list[EmbeddingRecord], normalized: bool = False):
        if not records:
            raise ValidationError("embedding set must contain at least one record")
        dim = records[0].vector.shape[0]
        index: dict[str, int] = {}
        for i, rec in enumerate(records):
            if rec.vector.shape[0] != dim:
                raise ValidationError(
                    f"record {rec.item_id!r} has dim {rec.vector.shape[0]}, expected {dim}"
                )
            if rec.item_id in index:
                raise ValidationError(f"duplicate item_id {rec.item_id!r}")
            index[rec.item_id] = i
        self.dim = dim
        self.records = tuple(records)
        self.normalized = normalized
        self._index = index
        self.matrix = np.stack([rec.vector for rec in records])
        self.matrix.setflags(write=False)
        if normalized:
            norms = np.linalg.norm(self.matrix, axis=1)
            bad = np.where(np.abs(norms - 1.0) > UNIT_NORM_ATOL)[0]
            if bad.size:
                raise ValidationError(
                    f"set flagged normalized but record {records[bad[0]].item_id!r} "
                    f"has norm {norms[bad[0]]:.9f}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._index

    def ids(self) -> list[str]:
        return [rec.item_id for rec in self.records]

    def identities(self) -> list[str]:
        return [rec.identity for rec in self.records]

    def row(self, item_id: str) -> int:
        try:
            return self._index[item_id]
        except KeyError:
            raise NotFoundError(f"unknown item_id {item_id!r}") from None

    def vector(self, item_id: str) -> np.ndarray:
        return self.matrix[self.row(item_id)]

    def identity(self, item_id: str) -> str:
        return self.records[self.row(item_id)].identity


def load_embeddings(path: str, normalize: bool = True) -> EmbeddingSet:
    """Parse a JSONL embedding file into an EmbeddingSet.

    With ``normalize`` (the default) every vector is scaled to unit L2 norm;
    zero vectors are rejected because they cannot be normalized. Malformed
    records raise ParseError with the line number; duplicate ids raise
    ValidationError.
    """
    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    dim: int | None = None
    for lineno, obj in read_jsonl(path):
        try:
            item_id = obj["item_id"]
            identity = obj["identity"]
            raw = obj["vector"]
        except KeyError as exc:
            raise ParseError(f"missing key {exc.args[0]!r}", path=path, line=lineno) from None
        if not isinstance(item_id, str) or not isinstance(identity, str):
            raise ParseError("item_id and identity must be strings", path=path, line=lineno)
        try:
            vector = as_float_vector(raw, "vector")
        except ValidationError as exc:
            raise ParseError(str(exc), path=path, line=lineno) from None
        if dim is None:
            dim = vector.shape[0]
        elif vector.shape[0] != dim:
            raise ParseError(
                f"vector has dim {vector.shape[0]}, expected {dim}", path=path, line=lineno
            )
        if item_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate item_id {item_id!r}")
        seen.add(item_id)
        if normalize:
            norm = float(np.linalg.norm(vector))
            if norm == 0.0:
                raise ValidationError(
                    f"{path}:{lineno}: zero vector for {item_id!r} cannot be normalized"
                )
            vector = vector / norm
        records.append(EmbeddingRecord(item_id, identity, vector))
    if not records:
        raise ValidationError(f"{path}: no records found")
    return EmbeddingSet(records, normalized=normalize)


def save_embeddings(embeddings: EmbeddingSet, path: str) -> None:
    """Write a set back to the JSONL interchange format."""
    write_jsonl(
        path,
        (
            {"item_id": rec.item_id, "identity": rec.identity, "vector": rec.vector.tolist()}
            for rec in embeddings.records
        ),
    )


def euclidean_distance(a, b) -> float:
    """L2 distance between two equal-length vectors."""
    va = as_float_vector(a, "a")
    vb = as_float_vector(b, "b")
    check_same_length(va, vb)
    return float(np.linalg.norm(va - vb))


def top_k_similar(
    embeddings: EmbeddingSet,
    query_id: str,
    k: int,
    exclude_same_identity: bool = True,
) -> list[tuple[str, float]]:
    """The k nearest items to a query, ascending by distance.

    The query itself is always excluded; with ``exclude_same_identity`` every
    item sharing the query's identity label is excluded too. Distance ties
    break lexicographically by item_id, which makes results reproducible.
    Returns min(k, eligible) entries.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    row = embeddings.row(query_id)
    dists = np.linalg.norm(embeddings.matrix - embeddings.matrix[row], axis=1)
    ids = np.array(embeddings.ids())
    mask = np.ones(len(embeddings), dtype=bool)
    mask[row] = False
    if exclude_same_identity:
        identities = np.array(embeddings.identities())
        mask &= identities != embeddings.identity(query_id)
    eligible = np.where(mask)[0]
    # lexsort: distance is the primary key, item_id breaks ties
    order = eligible[np.lexsort((ids[eligible], dists[eligible]))]
    return [(str(ids[i]), float(dists[i])) for i in order[:k]]
