"""The trainable projection head mapping base embeddings to similarity space.

An affine map W x + b with optional output normalization onto the unit
sphere. Normalization divides by sqrt(||u||^2 + 1e-12), which is smooth at
the origin; away from it the output norm is 1 within 1e-6. The head is the
similarity model: distances between projected vectors rank lookalikes.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_vector
from .errors import ParseError, ValidationError
from .store import EmbeddingRecord, EmbeddingSet

NORM_EPS = 1e-12

HEAD_FORMAT = "lookalike-projection-head"
HEAD_VERSION = 1


def smoothed_norm(u: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """sqrt(||u||^2 + 1e-12): the norm used wherever we later divide by it."""
    return np.sqrt(np.sum(np.square(u), axis=axis) + NORM_EPS)


@dataclass
class ProjectionHead:
    """Affine projection with optional unit-normalized output."""

    weights: np.ndarray  # (d_out, d_in)
    bias: np.ndarray  # (d_out,)
    normalize_output: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValidationError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValidationError(
                f"bias shape {self.bias.shape} does not match weights "
                f"{self.weights.shape}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValidationError("head parameters must be finite")

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]

    def forward(self, vector) -> np.ndarray:
        """Project one vector: W x + b, unit-normalized when configured."""
        x = as_float_vector(vector, "input")
        if x.shape[0] != self.d_in:
            raise ValidationError(f"input has dim {x.shape[0]}, head expects {self.d_in}")
        u = self.weights @ x + self.bias
        if self.normalize_output:
            return u / smoothed_norm(u)
        return u

    def forward_batch(self, matrix: np.ndarray) -> np.ndarray:
        """Project rows of an (n, d_in) matrix."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != self.d_in:
            raise ValidationError(f"expected (n, {self.d_in}) matrix, got {m.shape}")
        u = m @ self.weights.T + self.bias
        if self.normalize_output:
            return u / smoothed_norm(u, axis=1)[:, None]
        return u

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(self.weights.copy(), self.bias.copy(), self.normalize_output)


def identity_head(d_in: int, d_out: int | None = None, normalize_output: bool = True) -> ProjectionHead:
    """Head whose weights are the (possibly truncated) identity, bias zero."""
    d_out = d_in if d_out is None else d_out
    return ProjectionHead(np.eye(d_out, d_in), np.zeros(d_out), normalize_output)


def project_set(head: ProjectionHead, embeddings: EmbeddingSet) -> EmbeddingSet:
    """Apply the head to every record, keeping ids and identities."""
    projected = head.forward_batch(embeddings.matrix)
    records = [
        EmbeddingRecord(rec.item_id, rec.identity, row)
        for rec, row in zip(embeddings.records, projected)
    ]
    # normalized flag only when outputs are exactly on the unit sphere
    flag = head.normalize_output and bool(
        np.all(np.abs(np.linalg.norm(projected, axis=1) - 1.0) <= 1e-6)
    )
    return EmbeddingSet(records, normalized=flag)


def save_head(head: ProjectionHead, path: str) -> None:
    """Versioned JSON: dims, normalize flag, row-major weights, bias."""
    payload = {
        "format": HEAD_FORMAT,
        "version": HEAD_VERSION,
        "d_in": head.d_in,
        "d_out": head.d_out,
        "normalize_output": head.normalize_output,
        "weights": head.weights.ravel().tolist(),
        "bias": head.bias.tolist(),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f, separators=(",", ":"))
        f.write("\n")
    os.replace(tmp, path)


def load_head(path: str) -> ProjectionHead:
    with open(path, encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid head file ({exc.msg})", path=path) from exc
    if payload.get("format") != HEAD_FORMAT:
        raise ParseError("not a projection-head file", path=path)
    if payload.get("version") != HEAD_VERSION:
        raise ParseError(f"unsupported head version {payload.get('version')}", path=path)
    d_in, d_out = int(payload["d_in"]), int(payload["d_out"])
    weights = np.asarray(payload["weights"], dtype=np.float64)
    if weights.size != d_in * d_out:
        raise ParseError(f"weights length {weights.size} != {d_out}x{d_in}", path=path)
    return ProjectionHead(
        weights.reshape(d_out, d_in),
        np.asarray(payload["bias"], dtype=np.float64),
        bool(payload["normalize_output"]),
    )
