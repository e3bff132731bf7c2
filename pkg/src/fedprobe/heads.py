"""Linear classification heads over frozen features.

Two interpretations of the same K x d weight matrix:

* ``softmax`` - a coupled multinomial-logistic head trained with mean
  cross-entropy.  Every class shares the normalizing denominator, so any
  sample moves every row of the gradient.
* ``ova`` - K independent binary logistic heads, one per class, each trained
  with target ``1[y == c]``.  Row c of the gradient depends only on row c of
  the weights and on the samples assigned to head c, which is what makes
  per-class masking (positive-only and anchor/negative schedules) possible.

All gradients follow the descent convention: they are gradients of the mean
loss, so an update is ``w -= lr * grad``.  Per-head losses average over the
samples the head actually sees, keeping one learning-rate scale across
training modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_feature_matrix, check_label_vector

__all__ = [
    "HeadModel",
    "BatchGradient",
    "softmax_probs",
    "ova_probs",
    "softmax_grad",
    "ova_grad",
    "softmax_loss",
    "ova_loss",
    "predict",
]

HEAD_KINDS = ("softmax", "ova")


@dataclass
class HeadModel:
    """K x d float64 weight matrix plus optional per-class bias."""

    weights: np.ndarray
    bias: np.ndarray | None
    kind: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError(f"weights must be 2-D (K, d), got shape {self.weights.shape}")
        if self.kind not in HEAD_KINDS:
            raise ValueError(f"kind must be one of {HEAD_KINDS}, got {self.kind!r}")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.shape != (self.weights.shape[0],):
                raise ValueError(
                    f"bias shape {self.bias.shape} does not match {self.weights.shape[0]} classes"
                )
        if not np.isfinite(self.weights).all() or (
            self.bias is not None and not np.isfinite(self.bias).all()
        ):
            raise ValueError("head parameters must be finite")

    @classmethod
    def zeros(cls, num_classes: int, dim: int, kind: str, with_bias: bool = True) -> "HeadModel":
        bias = np.zeros(num_classes) if with_bias else None
        return cls(np.zeros((num_classes, dim)), bias, kind)

    @classmethod
    def gaussian(cls, num_classes: int, dim: int, kind: str, std: float, seed: int,
                 with_bias: bool = True) -> "HeadModel":
        rng = np.random.default_rng(seed)
        weights = rng.standard_normal((num_classes, dim)) * std
        bias = np.zeros(num_classes) if with_bias else None
        return cls(weights, bias, kind)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "HeadModel":
        return HeadModel(self.weights.copy(), None if self.bias is None else self.bias.copy(),
                         self.kind)

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Per-class linear scores, shape (B, K)."""
        s = X @ self.weights.T
        if self.bias is not None:
            s = s + self.bias
        return s

    def wire_bytes(self) -> int:
        """Size of the parameters serialized as float32 for transport."""
        n = self.weights.size * 4
        if self.bias is not None:
            n += self.bias.size * 4
        return n


@dataclass
class BatchGradient:
    """Descent gradient of a head over one batch.

    `row_counts[c]` is the number of samples head c averaged over; rows with
    a zero count carry exactly-zero gradients and should not be stepped.
    """

    d_weights: np.ndarray
    d_bias: np.ndarray | None
    sample_count: int
    row_counts: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.d_weights).all() or (
            self.d_bias is not None and not np.isfinite(self.d_bias).all()
        ):
            raise ValueError("gradient is not finite")


def _check_batch(model: HeadModel, X) -> np.ndarray:
    X = check_feature_matrix(X, name="features_batch")
    if X.shape[1] != model.dim:
        raise ValueError(f"batch dim {X.shape[1]} does not match head dim {model.dim}")
    return X


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax_probs(model: HeadModel, X) -> np.ndarray:
    """Row-stochastic class probabilities, computed with max-subtraction."""
    if model.kind != "softmax":
        raise ValueError(f"softmax_probs needs a softmax head, got {model.kind!r}")
    s = model.scores(_check_batch(model, X))
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def ova_probs(model: HeadModel, X) -> np.ndarray:
    """Independent per-class sigmoid scores in (0, 1); rows need not sum to 1."""
    if model.kind != "ova":
        raise ValueError(f"ova_probs needs an ova head, got {model.kind!r}")
    return _stable_sigmoid(model.scores(_check_batch(model, X)))


def _resolve_mask(class_mask, batch: int, num_classes: int) -> np.ndarray:
    if class_mask is None:
        return np.ones((batch, num_classes), dtype=bool)
    mask = np.asarray(class_mask, dtype=bool)
    if mask.shape == (num_classes,):
        return np.broadcast_to(mask, (batch, num_classes))
    if mask.shape == (batch, num_classes):
        return mask
    raise ValueError(
        f"class_mask must have shape ({num_classes},) or ({batch}, {num_classes}), "
        f"got {mask.shape}"
    )


def softmax_grad(model: HeadModel, X, labels) -> BatchGradient:
    """Gradient of the mean cross-entropy loss over the batch."""
    X = _check_batch(model, X)
    y = check_label_vector(labels, model.num_classes, n_samples=X.shape[0])
    b = X.shape[0]
    resid = softmax_probs(model, X)
    resid[np.arange(b), y] -= 1.0
    d_weights = resid.T @ X / b
    d_bias = resid.mean(axis=0) if model.bias is not None else None
    return BatchGradient(d_weights, d_bias, b, np.full(model.num_classes, b, dtype=np.int64))


def ova_grad(model: HeadModel, X, labels, class_mask=None) -> BatchGradient:
    """Per-head gradients of the mean binary logistic loss.

    `class_mask` selects which (sample, head) pairs participate: a length-K
    vector trains the selected heads on the whole batch, a (B, K) matrix
    gives each head its own sample slice.  Head c averages over its own
    slice; heads with an empty slice receive exactly-zero rows.
    """
    if model.kind != "ova":
        raise ValueError(f"ova_grad needs an ova head, got {model.kind!r}")
    X = _check_batch(model, X)
    y = check_label_vector(labels, model.num_classes, n_samples=X.shape[0])
    b, k = X.shape[0], model.num_classes
    mask = _resolve_mask(class_mask, b, k)
    q = _stable_sigmoid(model.scores(X))
    resid = q.copy()
    resid[np.arange(b), y] -= 1.0
    resid = np.where(mask, resid, 0.0)
    counts = mask.sum(axis=0)
    denom = np.maximum(counts, 1)
    d_weights = (resid.T @ X) / denom[:, None]
    d_bias = resid.sum(axis=0) / denom if model.bias is not None else None
    return BatchGradient(d_weights, d_bias, b, counts.astype(np.int64))


def softmax_loss(model: HeadModel, X, labels) -> float:
    """Mean cross-entropy; the objective softmax_grad differentiates."""
    X = _check_batch(model, X)
    y = check_label_vector(labels, model.num_classes, n_samples=X.shape[0])
    s = model.scores(X)
    m = s.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(s - m).sum(axis=1)) + m[:, 0]
    return float(np.mean(log_z - s[np.arange(X.shape[0]), y]))


def ova_loss(model: HeadModel, X, labels, class_mask=None) -> float:
    """Sum over heads of the mean binary logistic loss on each head's slice."""
    if model.kind != "ova":
        raise ValueError(f"ova_loss needs an ova head, got {model.kind!r}")
    X = _check_batch(model, X)
    y = check_label_vector(labels, model.num_classes, n_samples=X.shape[0])
    b, k = X.shape[0], model.num_classes
    mask = _resolve_mask(class_mask, b, k)
    s = model.scores(X)
    targets = np.zeros((b, k))
    targets[np.arange(b), y] = 1.0
    # log(1 + exp(-s)) + (1 - t) * s, evaluated stably
    losses = np.maximum(s, 0.0) - targets * s + np.log1p(np.exp(-np.abs(s)))
    counts = np.maximum(mask.sum(axis=0), 1)
    return float((np.where(mask, losses, 0.0).sum(axis=0) / counts).sum())


def predict(model: HeadModel, X) -> np.ndarray:
    """Argmax of the per-class scores; exact ties go to the lowest class.

    Valid for both head kinds: the softmax argmax equals the logit argmax,
    and sigmoid is monotone in the logit.
    """
    return np.argmax(model.scores(_check_batch(model, X)), axis=1)
