"""scikit-learn estimator facade over the federated simulator.

`FederatedProbeClassifier` behaves like any sklearn classifier: construct
with hyperparameters, `fit(X, y)` on precomputed feature vectors, then
`predict`/`predict_proba`/`score`.  Internally `fit` partitions the samples
across simulated clients, trains the configured head with federated
averaging, and keeps the final global head.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .features import FeatureDataset
from .heads import ova_probs, predict, softmax_probs
from .optim import AdamWConfig
from .simulation import (
    METHODS,
    NoiseConfig,
    PartitionConfig,
    RunConfig,
    StageConfig,
    train_federated,
)

__all__ = ["FederatedProbeClassifier"]


class FederatedProbeClassifier(ClassifierMixin, BaseEstimator):
    """Linear classifier trained by simulated federated averaging.

    Parameters mirror the simulator: `method` picks the head and schedule
    ("lp_softmax", "ova_plain", or "ova_two_stage"), `partition` controls
    how fit data is spread across the simulated clients.

    >>> clf = FederatedProbeClassifier(rounds=5, num_clients=4, random_state=0)
    >>> clf.fit(X, y).predict(X_new)        # doctest: +SKIP
    """

    def __init__(self, method: str = "ova_two_stage", rounds: int = 10,
                 num_clients: int = 10, participation: float = 1.0,
                 partition: str = "iid", shard_k: int = 1, dirichlet_p: float = 0.1,
                 dirichlet_alpha: float = 0.001, zipf_s: float = 2.0,
                 local_epochs: int = 3, batch_size: int = 50, lr: float = 0.01,
                 weight_decay: float = 1e-4, stage1_rounds: int = 1,
                 anchor_fraction: float = 0.1, fit_intercept: bool = True,
                 random_state: int = 0):
        self.method = method
        self.rounds = rounds
        self.num_clients = num_clients
        self.participation = participation
        self.partition = partition
        self.shard_k = shard_k
        self.dirichlet_p = dirichlet_p
        self.dirichlet_alpha = dirichlet_alpha
        self.zipf_s = zipf_s
        self.local_epochs = local_epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.stage1_rounds = stage1_rounds
        self.anchor_fraction = anchor_fraction
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    def _run_config(self) -> RunConfig:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        return RunConfig(
            rounds=self.rounds,
            num_clients=self.num_clients,
            participation=self.participation,
            seeds=(self.random_state,),
            method=self.method,
            with_bias=self.fit_intercept,
            stage=StageConfig(
                stage1_rounds=self.stage1_rounds,
                anchor_fraction=self.anchor_fraction,
                local_epochs=self.local_epochs,
                batch_size=self.batch_size,
            ),
            optimizer=AdamWConfig(lr=self.lr, weight_decay=self.weight_decay),
            partition=PartitionConfig(
                scheme=self.partition,
                shard_k=self.shard_k,
                dirichlet_p=self.dirichlet_p,
                dirichlet_alpha=self.dirichlet_alpha,
                zipf_s=self.zipf_s,
            ),
            noise=NoiseConfig(),
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValueError("need at least two classes to fit")
        dataset = FeatureDataset(
            X.astype(np.float32), encoded.astype(np.int64), int(self.classes_.shape[0])
        )
        head = train_federated(self._run_config(), dataset, self.random_state)
        self.head_model_ = head
        self.coef_ = head.weights
        self.intercept_ = head.bias if head.bias is not None else np.zeros(head.num_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "head_model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.head_model_.scores(X)

    def predict(self, X):
        check_is_fitted(self, "head_model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.classes_[predict(self.head_model_, X)]

    def predict_proba(self, X):
        """Class probabilities: softmax rows for the softmax head, per-class
        sigmoid scores renormalized to sum to one for one-vs-all heads."""
        check_is_fitted(self, "head_model_")
        X = check_array(X, dtype=np.float64)
        if self.head_model_.kind == "softmax":
            return softmax_probs(self.head_model_, X)
        q = ova_probs(self.head_model_, X)
        return q / q.sum(axis=1, keepdims=True)
