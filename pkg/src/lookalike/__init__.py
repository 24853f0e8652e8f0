"""Perceptual face-similarity toolkit.

Learns a similarity embedding on top of precomputed base face embeddings:
builds ranking tasks, aggregates human (or simulated) rankings into
confidence-weighted triplets, trains a projection head with a triplet hinge
loss, and evaluates with triplet accuracy, NDCG, precision@k, ROC-AUC and
related metrics.
"""

from .aggregation import (
    AggregatedTask,
    Triplet,
    WorkerRanking,
    average_positions,
    extract_hard_triplets,
    filter_lazy_workers,
    sample_easy_triplet,
    sample_easy_triplets,
)
from .binning import (
    BinMatrix,
    DistanceBin,
    PairOfPairsTask,
    PairVote,
    aggregate_pair_votes,
    bin_pairs,
    build_pair_comparison_tasks,
    decile_edges,
    triangle_accuracy,
)
from .errors import (
    LookalikeError,
    NotFoundError,
    ParseError,
    UndefinedMetricError,
    ValidationError,
)
from .estimator import TripletEmbedder
from .evaluation import (
    EvalReport,
    RelevanceProfile,
    accuracy_by_confidence,
    attribute_hamming_analysis,
    build_eval_report,
    mean_ndcg,
    ndcg6,
    precision_top_k,
    roc_auc,
    top_image_winrate,
    triplet_accuracy,
)
from .projection import ProjectionHead, identity_head, load_head, project_set, save_head
from .store import (
    EmbeddingRecord,
    EmbeddingSet,
    euclidean_distance,
    load_embeddings,
    save_embeddings,
    top_k_similar,
)
from .synthetic import (
    GroundTruthMetric,
    WorkerModel,
    gen_embeddings,
    gen_metric,
    simulate_pair_votes,
    simulate_worker_ranking,
    simulate_workforce,
)
from .tasks import RankingTask, build_ranking_tasks, sample_query_ids
from .trainer import Adam, TrainConfig, train, triplet_loss, triplet_loss_gradient

__version__ = "0.1.0"
