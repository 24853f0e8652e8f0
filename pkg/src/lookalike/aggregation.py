"""Aggregation of worker rankings into training signal.

Takes raw per-worker candidate orderings, drops lazy workers (those who on
average rearranged fewer than a threshold of images per task), computes
average positions per candidate, and mines confidence-weighted triplets:
one per unordered candidate pair, oriented so the majority-preferred item is
the positive. Exactly-tied pairs are dropped so every triplet's confidence
exceeds 0.5. Easy triplets pair a task candidate with a random item from
beyond the median base distance to the anchor and carry confidence 1.0.
"""

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ._validation import check_permutation
from .errors import NotFoundError, ValidationError
from .jsonl import read_jsonl, write_jsonl
from .store import EmbeddingSet
from .tasks import RankingTask

HARD = "hard"
EASY = "easy"


@dataclass(frozen=True)
class WorkerRanking:
    """One worker's submitted order for a task; index 0 = most similar."""

    worker_id: str
    task_id: str
    order: tuple[str, ...]


@dataclass(frozen=True)
class AggregatedTask:
    """Mean worker position per candidate (0 = ranked most similar)."""

    task_id: str
    query_id: str
    avg_position: dict[str, float]
    n_workers: int


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negative: str
    confidence: float
    kind: str = HARD

    def __post_init__(self):
        if len({self.anchor, self.positive, self.negative}) != 3:
            raise ValidationError("triplet items must be three distinct ids")
        if not 0.5 < self.confidence <= 1.0:
            raise ValidationError(
                f"confidence must lie in (0.5, 1], got {self.confidence}"
            )
        if self.kind not in (HARD, EASY):
            raise ValidationError(f"kind must be 'hard' or 'easy', got {self.kind!r}")
        if self.kind == EASY and self.confidence != 1.0:
            raise ValidationError("easy triplets carry confidence 1.0")


def _check_ranking(ranking: WorkerRanking, task: RankingTask) -> None:
    check_permutation(
        ranking.order,
        task.candidates,
        f"ranking by {ranking.worker_id!r} on {ranking.task_id!r}",
    )


def rearranged_count(ranking: WorkerRanking, task: RankingTask) -> int:
    """How many candidates sit at a different slot than they were presented."""
    _check_ranking(ranking, task)
    return sum(1 for got, shown in zip(ranking.order, task.presented()) if got != shown)


def filter_lazy_workers(
    rankings: list[WorkerRanking],
    tasks: list[RankingTask],
    min_avg_rearranged: float = 1.5,
) -> list[WorkerRanking]:
    """Drop every ranking from workers averaging under the rearranged threshold.

    The mean is over all of a worker's rankings; removal is all-or-nothing per
    worker. Idempotent: a second pass removes nobody new.
    """
    by_task = {t.task_id: t for t in tasks}
    counts: dict[str, list[int]] = defaultdict(list)
    for ranking in rankings:
        task = by_task.get(ranking.task_id)
        if task is None:
            raise ValidationError(
                f"ranking by {ranking.worker_id!r} references unknown task "
                f"{ranking.task_id!r}"
            )
        counts[ranking.worker_id].append(rearranged_count(ranking, task))
    lazy = {
        worker
        for worker, per_task in counts.items()
        if sum(per_task) / len(per_task) < min_avg_rearranged
    }
    return [r for r in rankings if r.worker_id not in lazy]


def average_positions(task: RankingTask, rankings: list[WorkerRanking]) -> AggregatedTask:
    """Mean index of each candidate over the surviving rankings for one task."""
    relevant = [r for r in rankings if r.task_id == task.task_id]
    if not relevant:
        raise ValidationError(f"task {task.task_id!r} has no surviving rankings")
    totals = {c: 0.0 for c in task.candidates}
    for ranking in relevant:
        _check_ranking(ranking, task)
        for pos, candidate in enumerate(ranking.order):
            totals[candidate] += pos
    n = len(relevant)
    return AggregatedTask(
        task_id=task.task_id,
        query_id=task.query_id,
        avg_position={c: totals[c] / n for c in task.candidates},
        n_workers=n,
    )


def extract_hard_triplets(task: RankingTask, rankings: list[WorkerRanking]) -> list[Triplet]:
    """One oriented triplet per unordered candidate pair, majority side positive.

    Confidence is the fraction of workers placing the positive above the
    negative; pairs split exactly 50/50 yield nothing. Six candidates give at
    most C(6,2) = 15 triplets.
    """
    relevant = [r for r in rankings if r.task_id == task.task_id]
    if not relevant:
        raise ValidationError(f"task {task.task_id!r} has no surviving rankings")
    positions = []
    for ranking in relevant:
        _check_ranking(ranking, task)
        positions.append({c: i for i, c in enumerate(ranking.order)})
    n = len(relevant)
    triplets = []
    cands = task.candidates
    for i in range(len(cands)):
        for j in range(i + 1, len(cands)):
            a, b = cands[i], cands[j]
            a_above = sum(1 for pos in positions if pos[a] < pos[b])
            frac = a_above / n
            if frac > 0.5:
                triplets.append(Triplet(task.query_id, a, b, frac, HARD))
            elif frac < 0.5:
                triplets.append(Triplet(task.query_id, b, a, 1.0 - frac, HARD))
            # frac == 0.5: no usable orientation, drop the pair
    return triplets


def easy_negative_pool(task: RankingTask, embeddings: EmbeddingSet) -> list[str]:
    """Items eligible as easy negatives for a task's anchor.

    Beyond the median of the anchor's distances to all other items (lower
    median for even counts), excluding the anchor's identity and the task's
    candidates.
    """
    if task.query_id not in embeddings:
        raise NotFoundError(f"anchor {task.query_id!r} not in embedding set")
    row = embeddings.row(task.query_id)
    dists = np.linalg.norm(embeddings.matrix - embeddings.matrix[row], axis=1)
    others = np.delete(dists, row)
    median = float(np.sort(others)[(others.size - 1) // 2])  # lower median
    anchor_identity = embeddings.identity(task.query_id)
    excluded = set(task.candidates) | {task.query_id}
    pool = [
        rec.item_id
        for rec, d in zip(embeddings.records, dists)
        if d > median and rec.item_id not in excluded and rec.identity != anchor_identity
    ]
    return pool


def sample_easy_triplet(
    task: RankingTask,
    embeddings: EmbeddingSet,
    rng: np.random.Generator,
    pool: list[str] | None = None,
) -> Triplet:
    """Random easy triplet: positive from the task, negative from beyond the median.

    The positive is uniform over the task's candidates and the negative
    uniform over ``easy_negative_pool`` (precomputable and passable via
    ``pool`` for tight training loops). Confidence is 1.0 by construction.
    """
    if pool is None:
        pool = easy_negative_pool(task, embeddings)
    if not pool:
        raise ValidationError(
            f"task {task.task_id!r}: no items beyond the median distance to sample from"
        )
    positive = task.candidates[int(rng.integers(0, len(task.candidates)))]
    negative = pool[int(rng.integers(0, len(pool)))]
    return Triplet(task.query_id, positive, negative, 1.0, EASY)


def sample_easy_triplets(
    tasks: list[RankingTask],
    embeddings: EmbeddingSet,
    count: int,
    seed: int = 0,
) -> list[Triplet]:
    """count easy triplets drawn round-robin over the tasks (e.g. one test set
    of easy triplets sized to match the hard set)."""
    if count < 0:
        raise ValidationError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(seed)
    eligible = []
    for task in tasks:
        pool = easy_negative_pool(task, embeddings)
        if pool:
            eligible.append((task, pool))
    if not eligible and count > 0:
        raise ValidationError("no task has a non-empty easy-negative pool")
    out = []
    for i in range(count):
        task, pool = eligible[i % len(eligible)]
        out.append(sample_easy_triplet(task, embeddings, rng, pool=pool))
    return out


def save_rankings(rankings: list[WorkerRanking], path: str) -> None:
    write_jsonl(
        path,
        (
            {"worker_id": r.worker_id, "task_id": r.task_id, "order": list(r.order)}
            for r in rankings
        ),
    )


def load_rankings(path: str) -> list[WorkerRanking]:
    rankings = []
    for lineno, obj in read_jsonl(path):
        try:
            rankings.append(
                WorkerRanking(
                    worker_id=obj["worker_id"],
                    task_id=obj["task_id"],
                    order=tuple(obj["order"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad ranking record: {exc}") from exc
    return rankings


def save_triplets(triplets: list[Triplet], path: str) -> None:
    write_jsonl(
        path,
        (
            {
                "anchor": t.anchor,
                "positive": t.positive,
                "negative": t.negative,
                "confidence": t.confidence,
                "kind": t.kind,
            }
            for t in triplets
        ),
    )


def load_triplets(path: str) -> list[Triplet]:
    triplets = []
    for lineno, obj in read_jsonl(path):
        try:
            triplets.append(
                Triplet(
                    anchor=obj["anchor"],
                    positive=obj["positive"],
                    negative=obj["negative"],
                    confidence=float(obj["confidence"]),
                    kind=obj.get("kind", HARD),
                )
            )
        except (KeyError, TypeError, ValidationError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad triplet record: {exc}") from exc
    return triplets
