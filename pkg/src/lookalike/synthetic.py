"""Synthetic data with a hidden ground-truth metric and simulated workers.

Stands in for human annotators at desk scale: items are random unit vectors,
"perceived" distance is the Euclidean distance after a hidden linear
transform, and each simulated worker ranks candidates by that distance plus
i.i.d. Gaussian noise (a Thurstonian judgment model). Noise of zero recovers
the exact ground-truth order; growing noise degrades agreement, producing
graded triplet confidences. All outputs use the same record types and file
formats as the human-annotation path.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .aggregation import WorkerRanking
from .binning import PairOfPairsTask, PairVote
from .errors import ParseError, ValidationError
from .store import EmbeddingRecord, EmbeddingSet
from .tasks import RankingTask, derive_seed

METRIC_FORMAT = "lookalike-ground-truth-metric"
METRIC_VERSION = 1


@dataclass(frozen=True)
class GroundTruthMetric:
    """Hidden linear map; true perceptual distance is Euclidean after it."""

    transform: np.ndarray  # (d_prime, d)

    def __post_init__(self):
        t = np.asarray(self.transform, dtype=np.float64)
        object.__setattr__(self, "transform", t)
        if t.ndim != 2:
            raise ValidationError(f"transform must be 2-D, got shape {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValidationError("transform must be finite")
        if np.linalg.matrix_rank(t) < t.shape[0]:
            raise ValidationError("transform must have full row rank")

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.linalg.norm(self.transform @ (a - b)))

    def distances_to(self, query: np.ndarray, others: np.ndarray) -> np.ndarray:
        return np.linalg.norm((others - query) @ self.transform.T, axis=1)


@dataclass(frozen=True)
class WorkerModel:
    """One simulated annotator: distance-noise scale plus a private seed."""

    worker_id: str
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be finite and >= 0, got {self.noise_sigma}")


def gen_embeddings(n: int, d: int, n_identities: int, seed: int = 0) -> EmbeddingSet:
    """n unit-norm Gaussian vectors with identities assigned round-robin."""
    if not 1 <= n_identities <= n:
        raise ValidationError(f"need 1 <= n_identities <= n, got {n_identities} and {n}")
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(n, d))
    norms = np.linalg.norm(vectors, axis=1)
    while np.any(norms < 1e-12):  # essentially unreachable, but never divide by 0
        redraw = norms < 1e-12
        vectors[redraw] = rng.normal(size=(int(redraw.sum()), d))
        norms = np.linalg.norm(vectors, axis=1)
    vectors /= norms[:, None]
    records = [
        EmbeddingRecord(f"item-{i:05d}", f"person-{i % n_identities:05d}", vectors[i])
        for i in range(n)
    ]
    return EmbeddingSet(records, normalized=True)


def gen_metric(d: int, d_prime: int | None = None, seed: int = 0) -> GroundTruthMetric:
    """Random hidden metric: Gaussian entries scaled by 1/sqrt(d), full row rank."""
    d_prime = d if d_prime is None else d_prime
    rng = np.random.default_rng(seed)
    while True:
        transform = rng.normal(size=(d_prime, d)) / np.sqrt(d)
        if np.linalg.matrix_rank(transform) == d_prime:
            return GroundTruthMetric(transform)


def simulate_worker_ranking(
    task: RankingTask,
    embeddings: EmbeddingSet,
    metric: GroundTruthMetric,
    worker: WorkerModel,
) -> WorkerRanking:
    """The worker's submitted order: true distance plus per-candidate noise.

    Deterministic in (worker seed, task_id); different workers or tasks draw
    independent noise.
    """
    query = embeddings.vector(task.query_id)
    cand_matrix = np.stack([embeddings.vector(c) for c in task.candidates])
    noisy = metric.distances_to(query, cand_matrix)
    if worker.noise_sigma > 0:
        rng = np.random.default_rng(derive_seed(worker.seed, f"rank:{task.task_id}"))
        noisy = noisy + rng.normal(scale=worker.noise_sigma, size=noisy.shape)
    order = tuple(task.candidates[i] for i in np.argsort(noisy, kind="stable"))
    return WorkerRanking(worker_id=worker.worker_id, task_id=task.task_id, order=order)


def simulate_workforce(
    tasks: list[RankingTask],
    embeddings: EmbeddingSet,
    metric: GroundTruthMetric,
    n_workers: int,
    noise_sigma: float,
    seed: int = 0,
) -> list[WorkerRanking]:
    """Every worker ranks every task, mirroring the 10-workers-per-Hit setup."""
    workers = [
        WorkerModel(f"sim-worker-{w:03d}", noise_sigma, seed=int(w) + seed * 100_003)
        for w in range(n_workers)
    ]
    return [
        simulate_worker_ranking(task, embeddings, metric, worker)
        for task in tasks
        for worker in workers
    ]


def simulate_pair_votes(
    tasks: list[PairOfPairsTask],
    embeddings: EmbeddingSet,
    metric: GroundTruthMetric,
    n_workers: int,
    noise_sigma: float,
    seed: int = 0,
) -> list[PairVote]:
    """Votes on pair-of-pairs tasks under the same Thurstonian worker model.

    Each worker compares the two pairs' true distances with independent noise
    per pair; zero noise votes exactly with the hidden metric.
    """
    votes = []
    for task in tasks:
        va = embeddings.vector(task.pair_a[0]) - embeddings.vector(task.pair_a[1])
        vb = embeddings.vector(task.pair_b[0]) - embeddings.vector(task.pair_b[1])
        dist_a = float(np.linalg.norm(metric.transform @ va))
        dist_b = float(np.linalg.norm(metric.transform @ vb))
        for w in range(n_workers):
            rng = np.random.default_rng(
                derive_seed(int(w) + seed * 100_003, f"vote:{task.task_id}")
            )
            noise = rng.normal(scale=noise_sigma, size=2) if noise_sigma > 0 else (0.0, 0.0)
            choice = "A" if dist_a + noise[0] <= dist_b + noise[1] else "B"
            votes.append(PairVote(task.task_id, f"sim-worker-{w:03d}", choice))
    return votes


def save_metric(metric: GroundTruthMetric, path: str) -> None:
    payload = {
        "format": METRIC_FORMAT,
        "version": METRIC_VERSION,
        "d": metric.transform.shape[1],
        "d_prime": metric.transform.shape[0],
        "transform": metric.transform.ravel().tolist(),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f, separators=(",", ":"))
        f.write("\n")
    os.replace(tmp, path)


def load_metric(path: str) -> GroundTruthMetric:
    with open(path, encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid metric file ({exc.msg})", path=path) from exc
    if payload.get("format") != METRIC_FORMAT:
        raise ParseError("not a ground-truth metric file", path=path)
    d, d_prime = int(payload["d"]), int(payload["d_prime"])
    transform = np.asarray(payload["transform"], dtype=np.float64).reshape(d_prime, d)
    return GroundTruthMetric(transform)
