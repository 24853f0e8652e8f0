"""Scikit-learn style estimator around the triplet trainer.

``TripletEmbedder`` exposes the projection head as a fit/transform component:
fit consumes an EmbeddingSet plus mined triplets (and ranking tasks when easy
sampling is enabled), transform maps raw base vectors into the learned
similarity space. Hyperparameters mirror TrainConfig, so ``get_params`` /
``set_params`` / ``clone`` compose with pipelines and searches.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .aggregation import Triplet
from .errors import ValidationError
from .store import EmbeddingSet
from .tasks import RankingTask
from .trainer import TrainConfig, train


class TripletEmbedder(BaseEstimator, TransformerMixin):
    """Learns an affine similarity projection from ranked triplets.

    Parameters follow the trainer defaults: hinge margin ``alpha``, Adam
    ``learning_rate``, ``batch_size``, the probability ``easy_prob`` of
    filling a batch slot with a sampled easy triplet, ``epochs`` and ``seed``.
    ``d_out=None`` keeps the input dimensionality.
    """

    def __init__(
        self,
        alpha: float = 0.05,
        learning_rate: float = 1e-4,
        batch_size: int = 32,
        easy_prob: float = 0.5,
        epochs: int = 30,
        seed: int = 0,
        d_out: int | None = None,
        normalize_output: bool = True,
        adam_beta1: float = 0.9,
        adam_beta2: float = 0.999,
        adam_epsilon: float = 1e-8,
    ):
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.easy_prob = easy_prob
        self.epochs = epochs
        self.seed = seed
        self.d_out = d_out
        self.normalize_output = normalize_output
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_epsilon = adam_epsilon

    def _config(self) -> TrainConfig:
        return TrainConfig(
            alpha=self.alpha,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            easy_prob=self.easy_prob,
            epochs=self.epochs,
            seed=self.seed,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_epsilon=self.adam_epsilon,
            d_out=self.d_out,
            normalize_output=self.normalize_output,
        )

    def fit(self, X: EmbeddingSet, y=None, *, triplets: list[Triplet],
            tasks: list[RankingTask] = ()):
        """Train the head on an embedding set and its mined hard triplets.

        ``tasks`` supply the anchors and candidate pools for easy-triplet
        sampling; required whenever ``easy_prob > 0``.
        """
        if not isinstance(X, EmbeddingSet):
            raise ValidationError("X must be an EmbeddingSet")
        self.head_, self.loss_curve_ = train(X, list(triplets), list(tasks), self._config())
        self.n_features_in_ = X.dim
        return self

    def transform(self, X) -> np.ndarray:
        """Project raw base vectors (n, d_in) into the similarity space."""
        check_is_fitted(self, "head_")
        X = check_array(X, dtype=np.float64)
        return self.head_.forward_batch(X)
