"""Evaluation protocol, feature-geometry metrics, drift diagnostics, costs.

Accuracy curves are compared to a paired IID reference through the relative
ratio (non-IID accuracy / IID accuracy x 100); convergence speed is the
first round reaching 95% of a reference final accuracy; label-noise damage
is the relative decline of final accuracy versus a clean run.  Geometry
summarizes how compact and separated the feature clusters are, and the
drift report decomposes client gradients into local bias, global bias, and
variance around the weighted mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .heads import HeadModel, ova_grad, predict, softmax_grad
from .validation import check_feature_matrix, check_label_vector, derive_rng

__all__ = [
    "RoundRecord",
    "GeometryReport",
    "DriftReport",
    "CostSummary",
    "DegenerateGeometryError",
    "accuracy",
    "relative_ratio",
    "acc_at_95",
    "geometry",
    "drift_report",
    "decline_rate",
    "cost_accounting",
]


class DegenerateGeometryError(ValueError):
    """Raised when a geometry metric is undefined for the given data."""


@dataclass
class RoundRecord:
    """What one federated round produced.

    `rel_ratio_pct` is filled in once the run is paired with its IID
    reference; byte counts are exact serialized head sizes and therefore
    deterministic, wall times are measurements.
    """

    round_index: int               # 1-based
    accuracy: float
    participants: int
    up_bytes_per_client: int
    down_bytes_per_client: int
    rel_ratio_pct: float | None = None
    client_seconds_mean: float = 0.0
    server_seconds: float = 0.0
    drift: "DriftReport | None" = None

    @property
    def up_bytes_total(self) -> int:
        return self.up_bytes_per_client * self.participants

    @property
    def down_bytes_total(self) -> int:
        return self.down_bytes_per_client * self.participants


@dataclass(frozen=True)
class GeometryReport:
    alignment: float  # mean squared distance over within-class pairs (NaN if no class has 2+)
    intra: float      # mean squared distance of samples to their class mean
    inter: float      # mean squared distance between distinct class means
    ratio: float      # intra / inter


@dataclass(frozen=True)
class DriftReport:
    local_bias_norms: np.ndarray   # per client, ||grad_i - grad_global||
    global_bias_norm: float        # ||sum_i p_i grad_i - grad_global||
    variance: float                # sum_i p_i ||grad_i - weighted mean||^2
    skipped_clients: tuple[int, ...] = ()


@dataclass(frozen=True)
class CostSummary:
    rounds: int
    client_seconds_mean: float
    server_seconds_mean: float
    up_bytes_total: int
    down_bytes_total: int
    seconds_total: float


def accuracy(model: HeadModel, features, labels) -> float:
    """Fraction of correct predictions on a clean evaluation set."""
    X = check_feature_matrix(features)
    if X.shape[0] == 0:
        raise ValueError("evaluation set is empty")
    y = check_label_vector(labels, model.num_classes, n_samples=X.shape[0])
    return float(np.mean(predict(model, X) == y))


def relative_ratio(noniid_curve, iid_curve) -> np.ndarray:
    """Element-wise non-IID / IID accuracy, as a percentage."""
    a = np.asarray(noniid_curve, dtype=np.float64)
    b = np.asarray(iid_curve, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"curve lengths differ: {a.shape} vs {b.shape}")
    if np.any(b <= 0):
        raise ValueError("IID accuracy is zero at some round; ratio undefined")
    return a / b * 100.0


def acc_at_95(curve, reference_final: float) -> int | None:
    """First 1-based round whose accuracy reaches 95% of `reference_final`.

    Returns None when the curve never gets there.
    """
    curve = np.asarray(curve, dtype=np.float64)
    if curve.size == 0:
        raise ValueError("empty accuracy curve")
    hits = np.flatnonzero(curve >= 0.95 * reference_final)
    return int(hits[0]) + 1 if hits.size else None


def geometry(features, labels, *, max_pairs: int = 100_000, seed: int = 0) -> GeometryReport:
    """Alignment / intra / inter / ratio of a labeled feature set.

    Alignment averages squared distances over within-class ordered pairs,
    exactly when there are at most `max_pairs` of them and over a seeded
    uniform subsample otherwise.  Requires >= 2 classes with samples;
    alignment is NaN when no class has two samples; a zero inter-class
    spread leaves the ratio undefined and raises.
    """
    X = check_feature_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise ValueError("labels must match features")
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateGeometryError("need at least two classes with samples")

    means = np.stack([X[y == c].mean(axis=0) for c in classes])
    intra = float(np.mean(((X - means[np.searchsorted(classes, y)]) ** 2).sum(axis=1)))

    diffs = means[:, None, :] - means[None, :, :]
    sq = (diffs**2).sum(axis=2)
    iu = np.triu_indices(classes.size, k=1)
    inter = float(sq[iu].mean())

    counts = np.array([(y == c).sum() for c in classes])
    pair_counts = counts * (counts - 1)
    total_pairs = int(pair_counts.sum())
    if total_pairs == 0:
        alignment = float("nan")
    elif total_pairs <= max_pairs:
        acc = 0.0
        for c in classes:
            xc = X[y == c]
            if xc.shape[0] < 2:
                continue
            d = xc[:, None, :] - xc[None, :, :]
            acc += (d**2).sum()
        alignment = float(acc / total_pairs)
    else:
        rng = derive_rng(seed, 0x6E0)
        # sample ordered pairs class-proportionally, rejecting self-pairs
        draws = max_pairs
        class_of_pair = rng.choice(classes.size, size=draws, p=pair_counts / total_pairs)
        acc = 0.0
        for ci in range(classes.size):
            m = int((class_of_pair == ci).sum())
            if m == 0:
                continue
            xc = X[y == classes[ci]]
            a = rng.integers(xc.shape[0], size=m)
            b = rng.integers(xc.shape[0] - 1, size=m)
            b = b + (b >= a)  # uniform over indices != a
            acc += ((xc[a] - xc[b]) ** 2).sum()
        alignment = float(acc / draws)

    if inter == 0.0:
        raise DegenerateGeometryError("inter-class spread is zero; ratio undefined")
    return GeometryReport(alignment, intra, inter, intra / inter)


def _full_batch_grad(model: HeadModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    if model.kind == "softmax":
        g = softmax_grad(model, X, y)
    else:
        g = ova_grad(model, X, y)
    parts = [g.d_weights.ravel()]
    if g.d_bias is not None:
        parts.append(g.d_bias)
    return np.concatenate(parts)


def drift_report(model: HeadModel, client_sets, global_features, global_labels) -> DriftReport:
    """Full-batch gradient drift diagnostics at the given head.

    `client_sets` is a list of (features, labels) pairs.  Clients are
    weighted by sample count, so the weighted mean of client gradients
    equals the global gradient whenever the clients partition the global
    set (the global-bias norm is then zero up to rounding).
    """
    g_global = _full_batch_grad(model, check_feature_matrix(global_features),
                                np.asarray(global_labels, dtype=np.int64))
    grads, weights, skipped = [], [], []
    for i, (Xc, yc) in enumerate(client_sets):
        Xc = np.asarray(Xc, dtype=np.float64)
        if Xc.shape[0] == 0:
            skipped.append(i)
            continue
        grads.append(_full_batch_grad(model, Xc, np.asarray(yc, dtype=np.int64)))
        weights.append(Xc.shape[0])
    if not grads:
        raise ValueError("every client is empty")
    G = np.stack(grads)
    p = np.asarray(weights, dtype=np.float64)
    p /= p.sum()
    local_bias = np.linalg.norm(G - g_global, axis=1)
    weighted_mean = p @ G
    global_bias = float(np.linalg.norm(weighted_mean - g_global))
    variance = float(p @ ((G - weighted_mean) ** 2).sum(axis=1))
    return DriftReport(local_bias, global_bias, variance, tuple(skipped))


def decline_rate(noisy_final_acc: float, clean_final_acc: float) -> float:
    """Relative accuracy loss under label noise, in percent."""
    if not clean_final_acc > 0:
        raise ValueError("clean accuracy must be positive")
    return (clean_final_acc - noisy_final_acc) / clean_final_acc * 100.0


def cost_accounting(records) -> CostSummary:
    """Aggregate per-round time and communication into one summary."""
    records = list(records)
    if not records:
        raise ValueError("no round records")
    client_means = [r.client_seconds_mean for r in records]
    server = [r.server_seconds for r in records]
    return CostSummary(
        rounds=len(records),
        client_seconds_mean=float(np.mean(client_means)),
        server_seconds_mean=float(np.mean(server)),
        up_bytes_total=int(sum(r.up_bytes_total for r in records)),
        down_bytes_total=int(sum(r.down_bytes_total for r in records)),
        seconds_total=float(np.sum(client_means) + np.sum(server)),
    )
