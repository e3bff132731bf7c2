"""Label corruption for robustness experiments.

Only injection lives here: symmetric (uniform over the other classes) and
asymmetric (circular next-class) flips, each applied independently per label
with probability `ratio`.  Evaluation labels are never corrupted by the
simulator; robustness is read off clean-accuracy decline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_label_vector

__all__ = ["NoiseSpec", "inject_noise"]

_KINDS = ("symmetric", "asymmetric")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    ratio: float
    seed: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0, 1], got {self.ratio}")


def inject_noise(labels, num_classes: int, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return (noisy_labels, flip_mask); deterministic in (labels, spec).

    symmetric: a flipped label is redrawn uniformly from the other
    `num_classes - 1` classes, so it never maps to itself.
    asymmetric: a flipped label becomes (label + 1) mod num_classes.
    """
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    labels = check_label_vector(labels, num_classes)
    rng = np.random.default_rng(spec.seed)
    flip = rng.random(labels.shape[0]) < spec.ratio
    if spec.kind == "symmetric":
        # offset in [1, K) keeps the draw uniform over the other classes
        offsets = rng.integers(1, num_classes, size=labels.shape[0])
    else:
        offsets = np.ones(labels.shape[0], dtype=np.int64)
    noisy = labels.copy()
    noisy[flip] = (labels[flip] + offsets[flip]) % num_classes
    return noisy, noisy != labels
