"""Evaluation metrics for a similarity head against human (or simulated) data.

Covers triplet accuracy with a hard/easy breakdown, accuracy by confidence
bin, precision@k of the human-preferred top image, NDCG over six-item
rankings, head-vs-head top-image win rate, rank-based ROC-AUC, and attribute
Hamming analysis. All metrics are pure functions of their inputs; exact
distance ties in triplet accuracy count as incorrect.
"""

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .aggregation import EASY, HARD, AggregatedTask, Triplet
from .errors import UndefinedMetricError, ValidationError
from .projection import ProjectionHead
from .store import EmbeddingSet

CONFIDENCE_BIN_EDGES = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEFAULT_K_VALUES = (1, 2, 3, 4, 5)

Bin = tuple[float, float]


@dataclass
class EvalReport:
    """One evaluation run, mirroring the reported tables.

    ``total`` is the fraction correct over all triplets evaluated, which
    equals the mean of the hard and easy accuracies when the two populations
    have equal size.
    """

    hard_accuracy: float | None
    easy_accuracy: float | None
    total: float
    per_confidence_bin: dict[Bin, tuple[float | None, int]]
    precision_at_k: dict[int, float]
    mean_ndcg: float
    precision_skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "hard_accuracy": self.hard_accuracy,
            "easy_accuracy": self.easy_accuracy,
            "total": self.total,
            "per_confidence_bin": [
                {"low": low, "high": high, "accuracy": acc, "count": count}
                for (low, high), (acc, count) in self.per_confidence_bin.items()
            ],
            "precision_at_k": {str(k): v for k, v in self.precision_at_k.items()},
            "precision_skipped": self.precision_skipped,
            "mean_ndcg": self.mean_ndcg,
        }


@dataclass(frozen=True)
class RelevanceProfile:
    """Graded relevance per candidate: n_candidates minus average position."""

    relevance: dict[str, float]

    def __post_init__(self):
        n = len(self.relevance)
        for item, rel in self.relevance.items():
            if not 0.0 <= rel <= n:
                raise ValidationError(
                    f"relevance of {item!r} is {rel}, outside [0, {n}]"
                )

    @classmethod
    def from_aggregated(cls, task: AggregatedTask) -> "RelevanceProfile":
        n = len(task.avg_position)
        return cls({c: n - p for c, p in task.avg_position.items()})


def _embedded(head: ProjectionHead | None, base: EmbeddingSet) -> np.ndarray:
    if head is None:
        return base.matrix
    return head.forward_batch(base.matrix)


def _triplet_correct(
    embedded: np.ndarray, base: EmbeddingSet, triplets: list[Triplet]
) -> np.ndarray:
    rows = np.array(
        [
            (base.row(t.anchor), base.row(t.positive), base.row(t.negative))
            for t in triplets
        ]
    )
    anchors = embedded[rows[:, 0]]
    d_pos = np.linalg.norm(anchors - embedded[rows[:, 1]], axis=1)
    d_neg = np.linalg.norm(anchors - embedded[rows[:, 2]], axis=1)
    return d_pos < d_neg  # ties are incorrect


def triplet_accuracy(
    head: ProjectionHead | None,
    base: EmbeddingSet,
    triplets: list[Triplet],
) -> tuple[float, dict[str, tuple[float | None, int]]]:
    """Fraction of triplets whose positive lands closer than the negative.

    Returns the overall accuracy and a per-kind breakdown {kind: (accuracy,
    count)}; a kind with no triplets reports (None, 0). Pass ``head=None`` to
    score the raw base embedding.
    """
    if not triplets:
        raise ValidationError("need at least one triplet to evaluate")
    correct = _triplet_correct(_embedded(head, base), base, triplets)
    kinds = np.array([t.kind for t in triplets])
    breakdown: dict[str, tuple[float | None, int]] = {}
    for kind in (HARD, EASY):
        mask = kinds == kind
        count = int(mask.sum())
        breakdown[kind] = (float(correct[mask].mean()) if count else None, count)
    return float(correct.mean()), breakdown


def accuracy_by_confidence(
    head: ProjectionHead | None,
    base: EmbeddingSet,
    hard_triplets: list[Triplet],
    bin_edges: tuple[float, ...] = CONFIDENCE_BIN_EDGES,
) -> dict[Bin, tuple[float | None, int]]:
    """Triplet accuracy within half-open confidence bins, top bin closed.

    A confidence of exactly 1.0 lands in the last bin. Empty bins are
    reported with count 0 and accuracy None.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValidationError("bin edges must be strictly increasing, length >= 2")
    if not hard_triplets:
        raise ValidationError("need at least one triplet")
    conf = np.array([t.confidence for t in hard_triplets])
    idx = np.searchsorted(edges, conf, side="right") - 1
    idx[conf == edges[-1]] = edges.size - 2  # closed top bin
    correct = _triplet_correct(_embedded(head, base), base, hard_triplets)
    out: dict[Bin, tuple[float | None, int]] = {}
    for b in range(edges.size - 1):
        mask = idx == b
        count = int(mask.sum())
        acc = float(correct[mask].mean()) if count else None
        out[(float(edges[b]), float(edges[b + 1]))] = (acc, count)
    return out


def _model_candidate_order(
    embedded: np.ndarray, base: EmbeddingSet, query_id: str, candidates: list[str]
) -> list[str]:
    q = embedded[base.row(query_id)]
    dists = {c: float(np.linalg.norm(embedded[base.row(c)] - q)) for c in candidates}
    return sorted(candidates, key=lambda c: (dists[c], c))


def precision_top_k(
    head: ProjectionHead | None,
    base: EmbeddingSet,
    aggregated_tasks: list[AggregatedTask],
    k_values: tuple[int, ...] = DEFAULT_K_VALUES,
) -> tuple[dict[int, float], int]:
    """How often the human-preferred top candidate sits in the model's top k.

    The ground-truth top is the strict minimum of the average positions;
    tasks whose minimum is tied are skipped and tallied in the second return
    value. Rates are monotone non-decreasing in k.
    """
    if not aggregated_tasks:
        raise ValidationError("need at least one aggregated task")
    if any(k < 1 for k in k_values):
        raise ValidationError("k values must be >= 1")
    embedded = _embedded(head, base)
    hits = {k: 0 for k in k_values}
    skipped = 0
    used = 0
    for task in aggregated_tasks:
        if len(task.avg_position) < 2:
            raise ValidationError(f"task {task.task_id!r} has fewer than 2 candidates")
        best = min(task.avg_position.values())
        top = [c for c, p in task.avg_position.items() if p == best]
        if len(top) != 1:
            skipped += 1
            continue
        used += 1
        order = _model_candidate_order(
            embedded, base, task.query_id, list(task.avg_position)
        )
        rank = order.index(top[0])  # 0-based position in the model ranking
        for k in k_values:
            if rank < k:
                hits[k] += 1
    if used == 0:
        raise UndefinedMetricError("every task had a tied ground-truth top")
    return {k: hits[k] / used for k in k_values}, skipped


def ndcg6(model_order: list[str], relevance: RelevanceProfile) -> float:
    """Normalized discounted cumulative gain of a model's candidate order.

    Gain 2^rel - 1 at positions 1..n discounted by log2(i+1), normalized by
    the same sum under a relevance-descending order. All-zero relevance has
    no defined value.
    """
    rels = relevance.relevance
    if sorted(model_order) != sorted(rels):
        raise ValidationError("model_order must be a permutation of the candidates")

    def dcg(order):
        return sum(
            (2.0 ** rels[c] - 1.0) / math.log2(i + 1) for i, c in enumerate(order, start=1)
        )

    optimal = dcg(sorted(rels, key=lambda c: (-rels[c], c)))
    if optimal == 0.0:
        raise UndefinedMetricError("all relevances are zero; NDCG undefined")
    return dcg(model_order) / optimal


def mean_ndcg(
    head: ProjectionHead | None,
    base: EmbeddingSet,
    aggregated_tasks: list[AggregatedTask],
) -> float:
    """Average NDCG over tasks, ranking each task's candidates by the head."""
    if not aggregated_tasks:
        raise ValidationError("need at least one aggregated task")
    embedded = _embedded(head, base)
    scores = []
    for task in aggregated_tasks:
        order = _model_candidate_order(
            embedded, base, task.query_id, list(task.avg_position)
        )
        scores.append(ndcg6(order, RelevanceProfile.from_aggregated(task)))
    return float(np.mean(scores))


def top_image_winrate(
    aggregated_tasks: list[AggregatedTask],
    picks_a: dict[str, str],
    picks_b: dict[str, str],
) -> tuple[float, float, float]:
    """Compare two models' top picks by the workers' average positions.

    Returns (a_rate, b_rate, tie_rate): the share of tasks where model A's
    pick was ranked above model B's, below it, or exactly level. The three
    rates sum to 1.
    """
    if not aggregated_tasks:
        raise ValidationError("need at least one merged task")
    a_wins = b_wins = ties = 0
    for task in aggregated_tasks:
        try:
            pick_a = picks_a[task.task_id]
            pick_b = picks_b[task.task_id]
        except KeyError as exc:
            raise ValidationError(f"missing pick for task {task.task_id!r}") from exc
        if pick_a not in task.avg_position or pick_b not in task.avg_position:
            raise ValidationError(
                f"task {task.task_id!r}: picks must be among the ranked candidates"
            )
        pos_a = task.avg_position[pick_a]
        pos_b = task.avg_position[pick_b]
        if pos_a < pos_b:
            a_wins += 1
        elif pos_b < pos_a:
            b_wins += 1
        else:
            ties += 1
    n = len(aggregated_tasks)
    return a_wins / n, b_wins / n, ties / n


def roc_auc(scores: list[tuple[float, bool]]) -> float:
    """Rank-based AUC: P(same-identity distance < different-identity distance).

    Ties count one half, making this the Mann-Whitney estimator. Needs both
    classes present.
    """
    if not scores:
        raise UndefinedMetricError("no scores")
    dists = np.array([s[0] for s in scores], dtype=float)
    same = np.array([bool(s[1]) for s in scores])
    n_pos = int(same.sum())
    n_neg = int((~same).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both same- and different-identity pairs")
    # average ranks of the distances (1-based, ties share their mean rank)
    uniq, inverse, counts = np.unique(dists, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    avg_ranks = starts + (counts + 1) / 2.0
    ranks = avg_ranks[inverse]
    rank_sum_pos = float(ranks[same].sum())
    # pairs where the same-identity distance is LARGER (plus half the ties)
    u_pos = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return 1.0 - u_pos / (n_pos * n_neg)


def attribute_hamming_analysis(
    attributes: dict[str, np.ndarray],
    retrieval_lists: dict[str, list[str]],
) -> float:
    """Mean normalized Hamming distance between queries and their retrievals.

    ``attributes`` maps item ids to equal-length binary vectors; the result
    averages over every (query, retrieved item) pair.
    """
    if not retrieval_lists:
        raise ValidationError("no retrieval lists given")
    length: int | None = None
    vectors: dict[str, np.ndarray] = {}
    for item, raw in attributes.items():
        vec = np.asarray(raw)
        if vec.ndim != 1 or not np.all(np.isin(vec, (0, 1))):
            raise ValidationError(f"attributes of {item!r} must be a binary vector")
        if length is None:
            length = vec.shape[0]
        elif vec.shape[0] != length:
            raise ValidationError(
                f"attribute length mismatch for {item!r}: {vec.shape[0]} != {length}"
            )
        vectors[item] = vec.astype(np.int8)
    total = 0.0
    pairs = 0
    for query, retrieved in retrieval_lists.items():
        if not retrieved:
            raise ValidationError(f"empty retrieval list for {query!r}")
        if query not in vectors:
            raise ValidationError(f"no attributes for query {query!r}")
        for item in retrieved:
            if item not in vectors:
                raise ValidationError(f"no attributes for retrieved item {item!r}")
            total += float(np.sum(vectors[query] != vectors[item])) / length
            pairs += 1
    return total / pairs


def build_eval_report(
    head: ProjectionHead | None,
    base: EmbeddingSet,
    hard_triplets: list[Triplet],
    easy_triplets: list[Triplet],
    aggregated_tasks: list[AggregatedTask],
    k_values: tuple[int, ...] = DEFAULT_K_VALUES,
) -> EvalReport:
    """Run the full metric suite on one head."""
    total, breakdown = triplet_accuracy(head, base, hard_triplets + easy_triplets)
    per_bin = accuracy_by_confidence(head, base, hard_triplets)
    rates, skipped = precision_top_k(head, base, aggregated_tasks, k_values)
    return EvalReport(
        hard_accuracy=breakdown[HARD][0],
        easy_accuracy=breakdown[EASY][0],
        total=total,
        per_confidence_bin=per_bin,
        precision_at_k=rates,
        mean_ndcg=mean_ndcg(head, base, aggregated_tasks),
        precision_skipped=skipped,
    )


def save_report(report: EvalReport, path: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def write_report_csvs(report: EvalReport, directory: str) -> None:
    """Emit accuracy, per-confidence and precision tables as CSV files."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "triplet_accuracy.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["hard_accuracy", "easy_accuracy", "total"])
        writer.writerow([report.hard_accuracy, report.easy_accuracy, report.total])
    with open(os.path.join(directory, "accuracy_by_confidence.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["confidence_low", "confidence_high", "accuracy", "count"])
        for (low, high), (acc, count) in report.per_confidence_bin.items():
            writer.writerow([low, high, acc, count])
    with open(os.path.join(directory, "precision_at_k.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "rate"])
        for k, rate in sorted(report.precision_at_k.items()):
            writer.writerow([k, rate])
