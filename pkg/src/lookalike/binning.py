"""Distance-bin analysis of cross-identity pairs.

Bins every cross-identity pair of an embedding set by base distance, builds
pair-of-pairs comparison tasks between bins, aggregates worker votes under an
agreement threshold into a bin matrix, and scores how often the lower-distance
pair was judged more similar (triangle accuracy).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .jsonl import read_jsonl, write_jsonl
from .store import EmbeddingSet

Pair = tuple[str, str]


@dataclass(frozen=True)
class DistanceBin:
    """Half-open distance interval [lower, upper)."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValidationError(f"bin lower {self.lower} must be < upper {self.upper}")


@dataclass(frozen=True)
class PairOfPairsTask:
    """One comparison unit: which of two pairs looks more alike?"""

    task_id: str
    pair_a: Pair
    pair_b: Pair
    bin_a: int
    bin_b: int

    def __post_init__(self):
        if self.bin_a == self.bin_b:
            raise ValidationError("pair-of-pairs task must span two different bins")


@dataclass(frozen=True)
class PairVote:
    task_id: str
    worker_id: str
    choice: str  # "A" or "B"

    def __post_init__(self):
        if self.choice not in ("A", "B"):
            raise ValidationError(f"choice must be 'A' or 'B', got {self.choice!r}")


@dataclass
class BinMatrix:
    """counts[i][j] = tasks where the bin-i pair beat the bin-j pair.

    Only tasks reaching the agreement threshold are counted, so
    counts[i][j] + counts[j][i] <= tasks_per_cell for every i != j.
    """

    counts: np.ndarray
    edges: list[float]
    tasks_per_cell: int

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    def check_invariants(self) -> None:
        c = self.counts
        if np.any(np.diagonal(c) != 0):
            raise ValidationError("bin matrix diagonal must be zero")
        if np.any(c + c.T > self.tasks_per_cell):
            raise ValidationError("counts[i][j] + counts[j][i] exceeds tasks_per_cell")

    def to_csv(self, path: str) -> None:
        """Header row carries each bin's distance upper bound."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([f"{u:.6g}" for u in self.edges[1:]])
            for row in self.counts:
                writer.writerow([int(v) for v in row])


def _cross_identity_pairs(embeddings: EmbeddingSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices (i, j) with i<j and distinct identities, plus their distances."""
    n = len(embeddings)
    iu, ju = np.triu_indices(n, k=1)
    identities = np.array(embeddings.identities())
    keep = identities[iu] != identities[ju]
    iu, ju = iu[keep], ju[keep]
    diffs = embeddings.matrix[iu] - embeddings.matrix[ju]
    dists = np.linalg.norm(diffs, axis=1)
    return iu, ju, dists


def decile_edges(embeddings: EmbeddingSet, n_bins: int = 10) -> list[float]:
    """Equal-count quantile edges over all cross-identity pair distances."""
    _, _, dists = _cross_identity_pairs(embeddings)
    if dists.size < n_bins:
        raise ValidationError(f"only {dists.size} cross-identity pairs for {n_bins} bins")
    qs = np.linspace(0.0, 1.0, n_bins + 1)
    edges = np.quantile(dists, qs)
    # nudge the top edge so the maximum-distance pair stays inside the last bin
    edges[-1] = np.nextafter(edges[-1], np.inf)
    if np.any(np.diff(edges) <= 0):
        raise ValidationError("degenerate distance distribution: quantile edges not increasing")
    return [float(e) for e in edges]


def bin_pairs(embeddings: EmbeddingSet, edges: list[float]) -> dict[int, list[Pair]]:
    """Assign every cross-identity pair to the half-open bin containing its distance.

    Pairs outside [edges[0], edges[-1]) are dropped. A distance equal to an
    interior edge belongs to the upper bin.
    """
    edges_arr = np.asarray(edges, dtype=float)
    if edges_arr.ndim != 1 or edges_arr.size < 2:
        raise ValidationError("need at least 2 bin edges")
    if np.any(np.diff(edges_arr) <= 0):
        raise ValidationError("bin edges must be strictly increasing")
    iu, ju, dists = _cross_identity_pairs(embeddings)
    bin_idx = np.searchsorted(edges_arr, dists, side="right") - 1
    inside = (bin_idx >= 0) & (bin_idx < edges_arr.size - 1)
    ids = embeddings.ids()
    binned: dict[int, list[Pair]] = {b: [] for b in range(edges_arr.size - 1)}
    for i, j, b in zip(iu[inside], ju[inside], bin_idx[inside]):
        binned[int(b)].append((ids[i], ids[j]))
    return binned


def _sample_without_replacement(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """k distinct integers from range(n) without materializing the range."""
    if n <= max(10_000, 4 * k):
        return rng.permutation(n)[:k]
    chosen: set[int] = set()
    while len(chosen) < k:
        for v in rng.integers(0, n, size=k - len(chosen)):
            chosen.add(int(v))
    return np.fromiter(chosen, dtype=np.int64, count=k)


def build_pair_comparison_tasks(
    binned: dict[int, list[Pair]], per_cell: int, seed: int
) -> list[PairOfPairsTask]:
    """Sample per_cell pair-of-pairs tasks for every unordered bin pair.

    Sampling is uniform without replacement over the cell's combination space
    (one pair from each bin) and deterministic under the seed. A cell with
    fewer than per_cell combinations raises an error naming the cell.
    """
    if per_cell < 1:
        raise ValidationError(f"per_cell must be >= 1, got {per_cell}")
    rng = np.random.default_rng(seed)
    bins = sorted(binned)
    tasks: list[PairOfPairsTask] = []
    serial = 0
    for pos, bi in enumerate(bins):
        for bj in bins[pos + 1 :]:
            n_i, n_j = len(binned[bi]), len(binned[bj])
            if n_i * n_j < per_cell:
                raise ValidationError(
                    f"cell ({bi}, {bj}) has only {n_i * n_j} pair combinations, "
                    f"need {per_cell}"
                )
            flat = _sample_without_replacement(rng, n_i * n_j, per_cell)
            for f in np.sort(flat):
                a = binned[bi][int(f) // n_j]
                b = binned[bj][int(f) % n_j]
                tasks.append(
                    PairOfPairsTask(
                        task_id=f"pp-{serial:06d}", pair_a=a, pair_b=b, bin_a=bi, bin_b=bj
                    )
                )
                serial += 1
    return tasks


def aggregate_pair_votes(
    tasks: list[PairOfPairsTask],
    votes: list[PairVote],
    agreement_threshold: float = 0.8,
    tasks_per_cell: int | None = None,
    edges: list[float] | None = None,
) -> BinMatrix:
    """Count, per bin pair, the tasks one side won with at least the threshold.

    A task contributes +1 to counts[i][j] iff the pair in bin i collected a
    vote share >= agreement_threshold; tasks below the threshold are ignored.
    Requires 0.5 < threshold <= 1 so at most one side can win.
    """
    if not 0.5 < agreement_threshold <= 1.0:
        raise ValidationError(
            f"agreement threshold must be in (0.5, 1], got {agreement_threshold}"
        )
    if not tasks:
        raise ValidationError("no tasks to aggregate")
    by_id = {t.task_id: t for t in tasks}
    tally: dict[str, list[int]] = {t.task_id: [0, 0] for t in tasks}
    seen: set[tuple[str, str]] = set()
    for vote in votes:
        if vote.task_id not in by_id:
            raise ValidationError(f"vote references unknown task {vote.task_id!r}")
        key = (vote.worker_id, vote.task_id)
        if key in seen:
            raise ValidationError(
                f"worker {vote.worker_id!r} voted twice on task {vote.task_id!r}"
            )
        seen.add(key)
        tally[vote.task_id][0 if vote.choice == "A" else 1] += 1
    n_bins = max(max(t.bin_a, t.bin_b) for t in tasks) + 1
    counts = np.zeros((n_bins, n_bins), dtype=np.int64)
    per_cell_counts: dict[tuple[int, int], int] = {}
    for task in tasks:
        votes_a, votes_b = tally[task.task_id]
        total = votes_a + votes_b
        if total == 0:
            raise ValidationError(f"task {task.task_id!r} has no votes")
        cell = (min(task.bin_a, task.bin_b), max(task.bin_a, task.bin_b))
        per_cell_counts[cell] = per_cell_counts.get(cell, 0) + 1
        if votes_a / total >= agreement_threshold:
            counts[task.bin_a, task.bin_b] += 1
        elif votes_b / total >= agreement_threshold:
            counts[task.bin_b, task.bin_a] += 1
    if tasks_per_cell is None:
        tasks_per_cell = max(per_cell_counts.values())
    if edges is None:
        edges = [float(i) for i in range(n_bins + 1)]  # bin indices stand in for edges
    matrix = BinMatrix(counts=counts, edges=list(edges), tasks_per_cell=tasks_per_cell)
    matrix.check_invariants()
    return matrix


def triangle_accuracy(matrix: BinMatrix, bin_subset: list[int] | None = None) -> float:
    """Share of counted comparisons agreeing with the distance ordering.

    Restricted to the given bins: upper-triangle counts (lower-distance pair
    won) over upper plus lower. Bins are in increasing distance order, so for
    i < j, counts[i][j] is a win for the embedding and counts[j][i] a loss.
    """
    subset = sorted(bin_subset) if bin_subset is not None else list(range(matrix.n_bins))
    if len(subset) < 2:
        raise ValidationError("triangle accuracy needs at least 2 bins")
    if subset[0] < 0 or subset[-1] >= matrix.n_bins:
        raise ValidationError(f"bin subset {subset} out of range")
    upper = 0
    lower = 0
    for a, bi in enumerate(subset):
        for bj in subset[a + 1 :]:
            upper += int(matrix.counts[bi, bj])
            lower += int(matrix.counts[bj, bi])
    if upper + lower == 0:
        raise UndefinedMetricError("no counted comparisons among the selected bins")
    return upper / (upper + lower)


def save_pair_tasks(tasks: list[PairOfPairsTask], path: str) -> None:
    write_jsonl(
        path,
        (
            {
                "task_id": t.task_id,
                "pair_a": list(t.pair_a),
                "pair_b": list(t.pair_b),
                "bin_a": t.bin_a,
                "bin_b": t.bin_b,
            }
            for t in tasks
        ),
    )


def load_pair_tasks(path: str) -> list[PairOfPairsTask]:
    tasks = []
    for lineno, obj in read_jsonl(path):
        try:
            tasks.append(
                PairOfPairsTask(
                    task_id=obj["task_id"],
                    pair_a=tuple(obj["pair_a"]),
                    pair_b=tuple(obj["pair_b"]),
                    bin_a=int(obj["bin_a"]),
                    bin_b=int(obj["bin_b"]),
                )
            )
        except (KeyError, TypeError, ValidationError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad pair task: {exc}") from exc
    return tasks


def save_pair_votes(votes: list[PairVote], path: str) -> None:
    write_jsonl(
        path,
        (
            {"task_id": v.task_id, "worker_id": v.worker_id, "choice": v.choice}
            for v in votes
        ),
    )


def load_pair_votes(path: str) -> list[PairVote]:
    votes = []
    for lineno, obj in read_jsonl(path):
        try:
            votes.append(PairVote(obj["task_id"], obj["worker_id"], obj["choice"]))
        except (KeyError, ValidationError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad vote: {exc}") from exc
    return votes
