"""Triplet-hinge training of the projection head.

The loss for one triplet (anchor a, positive p, negative n) is

    max(0, ||f(a) - f(p)|| - ||f(a) - f(n)|| + alpha)

pushing the positive closer to the anchor than the negative by the margin.
Gradients are derived analytically through the affine map and, when enabled,
the output-normalization Jacobian; every division by a norm uses
sqrt(||u||^2 + 1e-12) so a coincident pair can never produce a zero
denominator. Optimization is Adam over (weights, bias); batches mix hard
(human-mined) triplets with freshly sampled easy triplets.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .aggregation import Triplet, easy_negative_pool, sample_easy_triplet
from .errors import ValidationError
from .projection import ProjectionHead, smoothed_norm
from .store import EmbeddingSet
from .tasks import RankingTask

INIT_NOISE_SCALE = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    Defaults follow the reference setup: margin 0.05, Adam at learning rate
    1e-4, batches of 32, and an even split between easy and hard triplets.
    """

    alpha: float = 0.05
    learning_rate: float = 1e-4
    batch_size: int = 32
    easy_prob: float = 0.5
    epochs: int = 30
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    d_out: int | None = None
    normalize_output: bool = True

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.easy_prob <= 1.0:
            raise ValidationError(f"easy_prob must lie in [0, 1], got {self.easy_prob}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")


class Adam:
    """Adam optimizer state over a list of parameter arrays.

    Keeps first/second-moment accumulators per parameter and a step counter;
    ``step`` applies one bias-corrected update in place.
    """

    def __init__(self, params: list[np.ndarray], learning_rate: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * np.square(g)
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def triplet_loss(f_a, f_p, f_n, alpha: float) -> float:
    """Hinge over embedded distances: max(0, d(a,p) - d(a,n) + alpha)."""
    fa = np.asarray(f_a, dtype=np.float64)
    fp = np.asarray(f_p, dtype=np.float64)
    fn = np.asarray(f_n, dtype=np.float64)
    if not (fa.shape == fp.shape == fn.shape):
        raise ValidationError("triplet embeddings must share one dimension")
    if not all(np.all(np.isfinite(v)) for v in (fa, fp, fn)):
        raise ValidationError("triplet embeddings must be finite")
    if alpha <= 0:
        raise ValidationError(f"alpha must be > 0, got {alpha}")
    d_pos = float(np.linalg.norm(fa - fp))
    d_neg = float(np.linalg.norm(fa - fn))
    return max(0.0, d_pos - d_neg + alpha)


def _normalization_jacobian(u: np.ndarray) -> np.ndarray:
    """Jacobian of u -> u / sqrt(||u||^2 + eps)."""
    s = smoothed_norm(u)
    return np.eye(u.shape[0]) / s - np.outer(u, u) / s**3


def triplet_loss_gradient(
    head: ProjectionHead,
    raw_a,
    raw_p,
    raw_n,
    alpha: float,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Analytic (d_weights, d_bias, loss) of the single-triplet loss.

    Inputs are raw base-embedding vectors; the loss is evaluated through the
    head's forward map. An inactive hinge (slack <= 0) yields zero gradients.
    """
    xs = [np.asarray(v, dtype=np.float64) for v in (raw_a, raw_p, raw_n)]
    us = [head.weights @ x + head.bias for x in xs]
    if head.normalize_output:
        fs = [u / smoothed_norm(u) for u in us]
    else:
        fs = us
    loss = triplet_loss(fs[0], fs[1], fs[2], alpha)
    d_w = np.zeros_like(head.weights)
    d_b = np.zeros_like(head.bias)
    if loss <= 0.0:
        return d_w, d_b, 0.0
    # direction of d||f_a - f_x|| with the smoothed denominator
    diff_p = fs[0] - fs[1]
    diff_n = fs[0] - fs[2]
    e_p = diff_p / smoothed_norm(diff_p)
    e_n = diff_n / smoothed_norm(diff_n)
    d_fs = [e_p - e_n, -e_p, e_n]  # dL/df for anchor, positive, negative
    for x, u, d_f in zip(xs, us, d_fs):
        if head.normalize_output:
            d_u = _normalization_jacobian(u) @ d_f
        else:
            d_u = d_f
        d_w += np.outer(d_u, x)
        d_b += d_u
    return d_w, d_b, loss


def _resolve(embeddings: EmbeddingSet, triplets: list[Triplet]) -> None:
    for t in triplets:
        for item in (t.anchor, t.positive, t.negative):
            if item not in embeddings:
                raise ValidationError(f"triplet references unknown item {item!r}")


def init_head(d_in: int, config: TrainConfig, rng: np.random.Generator) -> ProjectionHead:
    """Identity-like start: (truncated) identity weights plus small noise."""
    d_out = config.d_out if config.d_out is not None else d_in
    weights = np.eye(d_out, d_in) + rng.normal(scale=INIT_NOISE_SCALE, size=(d_out, d_in))
    return ProjectionHead(weights, np.zeros(d_out), config.normalize_output)


def train(
    base: EmbeddingSet,
    hard_triplets: list[Triplet],
    tasks: list[RankingTask],
    config: TrainConfig,
) -> tuple[ProjectionHead, list[float]]:
    """Fit a projection head on hard triplets plus sampled easy triplets.

    Every batch slot draws an easy triplet with probability ``easy_prob``
    (positive from a random task, negative from beyond that anchor's median
    distance), otherwise a uniformly chosen hard triplet. One epoch makes
    ceil(n_hard / batch_size) Adam steps on batch-mean gradients. Returns the
    trained head and the per-epoch mean triplet loss; fully deterministic
    under ``config.seed``.
    """
    if not hard_triplets:
        raise ValidationError("need at least one hard triplet to train")
    _resolve(base, hard_triplets)
    if config.easy_prob > 0.0 and not tasks:
        raise ValidationError("easy_prob > 0 requires ranking tasks to sample from")
    for task in tasks:
        if task.query_id not in base:
            raise ValidationError(f"task {task.task_id!r} anchor missing from embeddings")
    rng = np.random.default_rng(config.seed)
    head = init_head(base.dim, config, rng)
    params = [head.weights, head.bias]
    optimizer = Adam(
        params,
        learning_rate=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        epsilon=config.adam_epsilon,
    )
    pools: dict[str, list[str]] = {}
    vec = base.vector
    n_hard = len(hard_triplets)
    batches_per_epoch = -(-n_hard // config.batch_size)
    curve: list[float] = []
    for _ in range(config.epochs):
        epoch_losses: list[float] = []
        for _ in range(batches_per_epoch):
            g_w = np.zeros_like(head.weights)
            g_b = np.zeros_like(head.bias)
            for _ in range(config.batch_size):
                if config.easy_prob > 0.0 and rng.random() < config.easy_prob:
                    task = tasks[int(rng.integers(0, len(tasks)))]
                    pool = pools.get(task.task_id)
                    if pool is None:
                        pool = pools.setdefault(task.task_id, easy_negative_pool(task, base))
                    triplet = sample_easy_triplet(task, base, rng, pool=pool)
                else:
                    triplet = hard_triplets[int(rng.integers(0, n_hard))]
                d_w, d_b, loss = triplet_loss_gradient(
                    head, vec(triplet.anchor), vec(triplet.positive), vec(triplet.negative),
                    config.alpha,
                )
                g_w += d_w
                g_b += d_b
                epoch_losses.append(loss)
            optimizer.step(params, [g_w / config.batch_size, g_b / config.batch_size])
        curve.append(float(np.mean(epoch_losses)))
    return head, curve


def save_loss_curve(curve: list[float], path: str) -> None:
    """CSV of (epoch, mean_loss) rows."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(curve):
            writer.writerow([epoch, repr(float(loss))])
