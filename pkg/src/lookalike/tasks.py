"""Construction of ranking tasks: a query face plus its nearest candidates.

Each task pairs a query with its n nearest cross-identity items under the
base embedding, ordered by distance, plus a seeded random presentation order
for the annotation UI. Per-task randomness is derived from (master seed,
query_id) so generation parallelizes without losing determinism.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from ._validation import check_index_permutation
from .errors import ValidationError
from .jsonl import read_jsonl, write_jsonl
from .store import EmbeddingSet, top_k_similar


@dataclass(frozen=True)
class RankingTask:
    """A query plus candidates in similarity order and a presentation shuffle.

    ``candidates`` is ordered by ascending base distance to the query;
    ``presentation_order`` is the permutation applied for display, so slot s
    of the UI shows candidates[presentation_order[s]].
    """

    task_id: str
    query_id: str
    candidates: tuple[str, ...]
    presentation_order: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.candidates)) != len(self.candidates):
            raise ValidationError(f"task {self.task_id!r}: candidates must be distinct")
        if self.query_id in self.candidates:
            raise ValidationError(f"task {self.task_id!r}: query among its own candidates")
        check_index_permutation(self.presentation_order, len(self.candidates),
                                f"task {self.task_id!r} presentation_order")

    def presented(self) -> list[str]:
        """Candidate ids in the order a worker sees them."""
        return [self.candidates[i] for i in self.presentation_order]


def derive_seed(master_seed: int, key: str) -> np.random.SeedSequence:
    """Stable per-key seed stream, independent of iteration order."""
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return np.random.SeedSequence([master_seed, int.from_bytes(digest, "big")])


def build_ranking_tasks(
    embeddings: EmbeddingSet,
    query_ids: list[str],
    n_candidates: int = 6,
    seed: int = 0,
) -> list[RankingTask]:
    """One task per query: its n nearest cross-identity items, shuffled for display.

    Raises per query when fewer than n_candidates eligible items exist.
    """
    if n_candidates < 2:
        raise ValidationError(f"n_candidates must be >= 2, got {n_candidates}")
    if len(set(query_ids)) != len(query_ids):
        raise ValidationError("query_ids contain duplicates")
    tasks = []
    for i, query_id in enumerate(query_ids):
        nearest = top_k_similar(embeddings, query_id, n_candidates, exclude_same_identity=True)
        if len(nearest) < n_candidates:
            raise ValidationError(
                f"query {query_id!r} has only {len(nearest)} eligible candidates, "
                f"need {n_candidates}"
            )
        rng = np.random.default_rng(derive_seed(seed, query_id))
        order = tuple(int(x) for x in rng.permutation(n_candidates))
        tasks.append(
            RankingTask(
                task_id=f"task-{i:05d}",
                query_id=query_id,
                candidates=tuple(item for item, _ in nearest),
                presentation_order=order,
            )
        )
    return tasks


def sample_query_ids(embeddings: EmbeddingSet, n_queries: int, seed: int = 0) -> list[str]:
    """Uniform sample of n distinct item ids to use as queries."""
    ids = embeddings.ids()
    if n_queries > len(ids):
        raise ValidationError(f"cannot sample {n_queries} queries from {len(ids)} items")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ids), size=n_queries, replace=False)
    return [ids[i] for i in picked]


def save_tasks(tasks: list[RankingTask], path: str) -> None:
    write_jsonl(
        path,
        (
            {
                "task_id": t.task_id,
                "query_id": t.query_id,
                "candidates": list(t.candidates),
                "presentation_order": list(t.presentation_order),
            }
            for t in tasks
        ),
    )


def load_tasks(path: str) -> list[RankingTask]:
    tasks = []
    for lineno, obj in read_jsonl(path):
        try:
            tasks.append(
                RankingTask(
                    task_id=obj["task_id"],
                    query_id=obj["query_id"],
                    candidates=tuple(obj["candidates"]),
                    presentation_order=tuple(obj["presentation_order"]),
                )
            )
        except (KeyError, TypeError, ValidationError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad task record: {exc}") from exc
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate task_id")
    return tasks
