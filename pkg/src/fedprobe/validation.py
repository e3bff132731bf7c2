"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

__all__ = ["check_feature_matrix", "check_label_vector", "derive_rng"]


def check_feature_matrix(X, *, dtype=np.float64, name: str = "features") -> np.ndarray:
    """Coerce X to a 2-D float array and reject empty or non-finite input."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D (n_samples, dim), got shape {X.shape}")
    n, d = X.shape
    if n < 1 or d < 1:
        raise ValueError(f"{name} must have at least one sample and one dimension, got {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contain NaN or Inf entries")
    return X


def check_label_vector(y, num_classes: int, *, n_samples: int | None = None,
                       name: str = "labels") -> np.ndarray:
    """Coerce y to a 1-D int64 array with entries in [0, num_classes)."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        rounded = np.asarray(y, dtype=np.float64)
        if not np.all(rounded == np.floor(rounded)):
            raise ValueError(f"{name} must be integers")
    y = y.astype(np.int64)
    if n_samples is not None and y.shape[0] != n_samples:
        raise ValueError(f"{name} length {y.shape[0]} does not match {n_samples} samples")
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ValueError(
            f"{name} must lie in [0, {num_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y


def derive_rng(*key: int) -> np.random.Generator:
    """Deterministic generator from an integer key tuple.

    Used to give every randomized sub-step of a run (client sampling, batch
    shuffling, anchor selection, noise) its own reproducible stream.
    """
    return np.random.default_rng(np.random.SeedSequence(key))
