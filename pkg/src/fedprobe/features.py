"""Frozen-feature datasets, the binary feature-file format, and a synthetic generator.

Training never touches raw inputs or an encoder: everything downstream
consumes precomputed feature vectors carried by :class:`FeatureDataset`.
Datasets round-trip bit-exactly through a small little-endian binary format
(magic ``FOVA``) so that feature files are portable across languages.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .validation import check_label_vector

__all__ = [
    "FeatureDataset",
    "SyntheticSpec",
    "FeatureFileError",
    "CorruptHeaderError",
    "PayloadSizeError",
    "LabelRangeError",
    "load_features",
    "save_features",
    "generate_synthetic",
    "l2_normalized",
]

MAGIC = b"FOVA"
FORMAT_VERSION = 1

# header after the magic: version u32, n_samples u64, dim u32, num_classes u32,
# meta blob length u32; all little-endian
_HEADER = struct.Struct("<IQIII")


class FeatureFileError(Exception):
    """Base class for feature-file load/save failures."""


class CorruptHeaderError(FeatureFileError):
    """Magic, version, or header fields are unreadable or invalid."""


class PayloadSizeError(FeatureFileError):
    """Declared sample count/dimension disagrees with the payload length."""


class LabelRangeError(FeatureFileError):
    """A stored label falls outside [0, num_classes)."""


@dataclass(frozen=True)
class FeatureDataset:
    """Immutable set of precomputed feature vectors with integer labels.

    features: (n_samples, dim) float32, finite.
    labels:   (n_samples,) int64 in [0, num_classes).
    meta:     free-form string map (encoder name, source, extraction seed, ...).
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        n, d = feats.shape
        if n < 1 or d < 1:
            raise ValueError(f"need at least one sample and one dimension, got {feats.shape}")
        if not np.isfinite(feats).all():
            raise ValueError("features contain NaN or Inf entries")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        labels = check_label_vector(self.labels, self.num_classes, n_samples=n)
        meta = dict(self.meta)
        for k, v in meta.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ValueError("meta must map strings to strings")
        feats.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "meta", meta)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureDataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.meta == other.meta
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


def _encode_meta(meta: dict[str, str]) -> bytes:
    # canonical JSON so identical meta maps always serialize to identical bytes
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_features(dataset: FeatureDataset, path) -> None:
    """Write a dataset to `path` in the FOVA binary format.

    Guarantees ``load_features(path)`` returns a dataset equal to `dataset`
    on every field, and that equal datasets produce byte-identical files.
    """
    # revalidate: instances forged around the constructor must not reach disk
    FeatureDataset(dataset.features, dataset.labels, dataset.num_classes, dataset.meta)
    meta_blob = _encode_meta(dataset.meta)
    header = MAGIC + _HEADER.pack(
        FORMAT_VERSION, dataset.n_samples, dataset.dim, dataset.num_classes, len(meta_blob)
    )
    feats = np.ascontiguousarray(dataset.features, dtype="<f4")
    labels = np.ascontiguousarray(dataset.labels, dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(meta_blob)
        fh.write(feats.tobytes())
        fh.write(labels.tobytes())


def load_features(path) -> FeatureDataset:
    """Read a FOVA feature file, validating every dataset invariant.

    Raises CorruptHeaderError, PayloadSizeError, or LabelRangeError for the
    three malformed-input classes; byte-identical files always yield equal
    in-memory datasets.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + _HEADER.size:
        raise CorruptHeaderError(f"{path}: file shorter than the fixed header")
    if blob[: len(MAGIC)] != MAGIC:
        raise CorruptHeaderError(f"{path}: bad magic {blob[:len(MAGIC)]!r}")
    version, n, d, k, meta_len = _HEADER.unpack_from(blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CorruptHeaderError(f"{path}: unsupported format version {version}")
    if n < 1 or d < 1 or k < 2:
        raise CorruptHeaderError(f"{path}: invalid header counts n={n} d={d} k={k}")
    offset = len(MAGIC) + _HEADER.size
    if len(blob) < offset + meta_len:
        raise CorruptHeaderError(f"{path}: declared meta length {meta_len} overruns the file")
    try:
        meta = json.loads(blob[offset : offset + meta_len].decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptHeaderError(f"{path}: meta blob is not valid JSON") from exc
    if not isinstance(meta, dict) or any(
        not isinstance(k_, str) or not isinstance(v, str) for k_, v in meta.items()
    ):
        raise CorruptHeaderError(f"{path}: meta blob is not a string map")
    offset += meta_len

    feat_bytes = n * d * 4
    label_bytes = n * 4
    expected = offset + feat_bytes + label_bytes
    if len(blob) != expected:
        raise PayloadSizeError(
            f"{path}: header declares {n} samples x {d} dims "
            f"({expected} bytes total) but file has {len(blob)} bytes"
        )
    feats = np.frombuffer(blob, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=offset + feat_bytes)
    if labels.size and labels.max() >= k:
        bad = int(labels.max())
        raise LabelRangeError(f"{path}: label {bad} out of range for {k} classes")
    return FeatureDataset(feats, labels.astype(np.int64), int(k), meta)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a Gaussian-cluster feature set used in desk-scale runs.

    Class centroids are placed deterministically from the seed along random
    orthonormal directions, pairwise at least `centroid_separation` apart;
    samples are isotropic Gaussians around them.  `split` selects an
    independent sample-noise stream while keeping the centroids fixed, so a
    train/eval pair shares one cluster geometry (split 0 and 1 by
    convention).
    """

    num_classes: int
    dim: int
    samples_per_class: int
    centroid_separation: float
    within_class_std: float
    seed: int
    split: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.centroid_separation < 0:
            raise ValueError("centroid_separation must be >= 0")
        if not self.within_class_std > 0:
            raise ValueError("within_class_std must be > 0")


# common-offset length, in units of the class separation; mimics encoder
# features, whose class structure is a small deviation around a dominant
# shared mean rather than a set of clusters centered at the origin
_OFFSET_SCALE = 2.5


def synthetic_centroids(spec: SyntheticSpec) -> np.ndarray:
    """Deterministic (num_classes, dim) centroid matrix for a spec.

    Class directions are random orthonormal vectors scaled by the
    separation; with a spare dimension available, all centroids additionally
    share one large offset along a further orthogonal direction, mimicking
    encoder features whose class structure rides on a dominant common mean.
    The offset is a pure translation, so pairwise centroid distances
    (>= separation by construction) and every geometry metric are
    unaffected by it.
    """
    rng = np.random.default_rng(spec.seed)
    k, d = spec.num_classes, spec.dim
    m = min(k, d)
    n_dirs = min(k + 1, d)
    basis, r = np.linalg.qr(rng.standard_normal((d, n_dirs)))
    basis = basis * np.sign(np.diag(r))  # canonical sign, QR is sign-ambiguous
    offset = np.zeros(d)
    if n_dirs > m:
        offset = _OFFSET_SCALE * spec.centroid_separation * basis[:, m]
    centroids = np.empty((k, d))
    for c in range(k):
        # reuse directions with growing multiples once classes outnumber
        # dims; every centroid pair stays >= separation apart
        centroids[c] = offset + spec.centroid_separation * (1 + c // m) * basis[:, c % m]
    return centroids


def generate_synthetic(spec: SyntheticSpec) -> FeatureDataset:
    """Generate `num_classes * samples_per_class` Gaussian-cluster features.

    Pure function of the spec: identical specs give identical datasets.
    """
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, spec.split)))
    centroids = synthetic_centroids(spec)
    n_per = spec.samples_per_class
    feats = np.empty((spec.num_classes * n_per, spec.dim), dtype=np.float64)
    for c in range(spec.num_classes):
        noise = rng.standard_normal((n_per, spec.dim)) * spec.within_class_std
        feats[c * n_per : (c + 1) * n_per] = centroids[c] + noise
    labels = np.repeat(np.arange(spec.num_classes, dtype=np.int64), n_per)
    meta = {
        "generator": "synthetic-gaussian",
        "separation": repr(spec.centroid_separation),
        "std": repr(spec.within_class_std),
        "seed": str(spec.seed),
        "split": str(spec.split),
    }
    return FeatureDataset(feats.astype(np.float32), labels, spec.num_classes, meta)


def l2_normalized(dataset: FeatureDataset) -> FeatureDataset:
    """Copy of the dataset with unit-norm rows (zero rows left untouched)."""
    feats = dataset.features.astype(np.float64)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return FeatureDataset(
        (feats / norms).astype(np.float32), dataset.labels, dataset.num_classes, dataset.meta
    )
