"""Feature dataset, file format, and synthetic generator tests."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedprobe.features import (
    FORMAT_VERSION,
    MAGIC,
    CorruptHeaderError,
    FeatureDataset,
    LabelRangeError,
    PayloadSizeError,
    SyntheticSpec,
    generate_synthetic,
    l2_normalized,
    load_features,
    save_features,
    synthetic_centroids,
)
from fedprobe.metrics import geometry


def small_dataset():
    return FeatureDataset(
        np.array([[1, 0, 0], [0, 1, 0]], dtype=np.float32),
        np.array([0, 1]),
        2,
        {"encoder": "none"},
    )


def forge(features, labels, num_classes, meta):
    """Build a FeatureDataset bypassing validation, for negative tests."""
    ds = object.__new__(FeatureDataset)
    object.__setattr__(ds, "features", np.asarray(features, dtype=np.float32))
    object.__setattr__(ds, "labels", np.asarray(labels, dtype=np.int64))
    object.__setattr__(ds, "num_classes", num_classes)
    object.__setattr__(ds, "meta", meta)
    return ds


class TestInvariants:
    def test_valid_construction(self):
        ds = small_dataset()
        assert ds.n_samples == 2 and ds.dim == 3 and ds.num_classes == 2

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN or Inf"):
            FeatureDataset(np.array([[np.nan, 0.0]]), np.array([0]), 2)

    def test_rejects_inf(self):
        with pytest.raises(ValueError, match="NaN or Inf"):
            FeatureDataset(np.array([[np.inf, 0.0]]), np.array([0]), 2)

    def test_rejects_label_out_of_range(self):
        with pytest.raises(ValueError, match="must lie in"):
            FeatureDataset(np.zeros((2, 2)), np.array([0, 2]), 2)

    def test_rejects_single_class(self):
        with pytest.raises(ValueError, match="num_classes"):
            FeatureDataset(np.zeros((2, 2)), np.array([0, 0]), 1)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            FeatureDataset(np.zeros((0, 2)), np.array([]), 2)

    def test_immutable_after_construction(self):
        ds = small_dataset()
        with pytest.raises(ValueError):
            ds.features[0, 0] = 5.0
        with pytest.raises(ValueError):
            ds.labels[0] = 1


class TestRoundTrip:
    def test_exact_values(self, tmp_path):
        ds = small_dataset()
        path = tmp_path / "t.fova"
        save_features(ds, path)
        loaded = load_features(path)
        assert loaded == ds
        assert loaded.features.dtype == np.float32

    def test_empty_meta(self, tmp_path):
        ds = FeatureDataset(np.eye(2, dtype=np.float32), np.array([0, 1]), 2)
        path = tmp_path / "t.fova"
        save_features(ds, path)
        assert load_features(path).meta == {}

    def test_byte_identical_files_for_equal_datasets(self, tmp_path):
        ds = small_dataset()
        save_features(ds, tmp_path / "a.fova")
        save_features(ds, tmp_path / "b.fova")
        assert (tmp_path / "a.fova").read_bytes() == (tmp_path / "b.fova").read_bytes()

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(1, 20),
        d=st.integers(1, 8),
        k=st.integers(2, 5),
        seed=st.integers(0, 2**31 - 1),
        meta=st.dictionaries(st.text(max_size=8), st.text(max_size=8), max_size=3),
    )
    def test_roundtrip_property(self, tmp_path_factory, n, d, k, seed, meta):
        rng = np.random.default_rng(seed)
        ds = FeatureDataset(
            rng.standard_normal((n, d)).astype(np.float32),
            rng.integers(0, k, size=n),
            k,
            meta,
        )
        path = tmp_path_factory.mktemp("rt") / "t.fova"
        save_features(ds, path)
        assert load_features(path) == ds

    def test_save_rejects_forged_nan(self, tmp_path):
        bad = forge([[np.nan, 0.0]], [0], 2, {})
        with pytest.raises(ValueError):
            save_features(bad, tmp_path / "bad.fova")
        assert not (tmp_path / "bad.fova").exists()


class TestMalformedFiles:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.fova"
        save_features(small_dataset(), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptHeaderError, match="magic"):
            load_features(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "t.fova"
        save_features(small_dataset(), path)
        blob = bytearray(path.read_bytes())
        struct.pack_into("<I", blob, 4, FORMAT_VERSION + 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptHeaderError, match="version"):
            load_features(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "t.fova"
        path.write_bytes(MAGIC + b"\x01")
        with pytest.raises(CorruptHeaderError, match="shorter"):
            load_features(path)

    def test_declared_rows_exceed_payload(self, tmp_path):
        # header says 5 samples, payload carries 4 rows
        meta = b"{}"
        header = MAGIC + struct.pack("<IQIII", FORMAT_VERSION, 5, 3, 2, len(meta))
        feats = np.zeros((4, 3), dtype="<f4").tobytes()
        labels = np.zeros(4, dtype="<u4").tobytes()
        path = tmp_path / "t.fova"
        path.write_bytes(header + meta + feats + labels)
        with pytest.raises(PayloadSizeError, match="declares 5 samples"):
            load_features(path)

    def test_trailing_garbage(self, tmp_path):
        path = tmp_path / "t.fova"
        save_features(small_dataset(), path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(PayloadSizeError):
            load_features(path)

    def test_label_out_of_range(self, tmp_path):
        # label 7 with 5 declared classes
        meta = b"{}"
        header = MAGIC + struct.pack("<IQIII", FORMAT_VERSION, 2, 2, 5, len(meta))
        feats = np.zeros((2, 2), dtype="<f4").tobytes()
        labels = np.array([0, 7], dtype="<u4").tobytes()
        path = tmp_path / "t.fova"
        path.write_bytes(header + meta + feats + labels)
        with pytest.raises(LabelRangeError, match="label 7"):
            load_features(path)

    def test_meta_not_json(self, tmp_path):
        meta = b"not-json"
        header = MAGIC + struct.pack("<IQIII", FORMAT_VERSION, 1, 1, 2, len(meta))
        payload = np.zeros((1, 1), dtype="<f4").tobytes() + np.zeros(1, dtype="<u4").tobytes()
        path = tmp_path / "t.fova"
        path.write_bytes(header + meta + payload)
        with pytest.raises(CorruptHeaderError, match="JSON"):
            load_features(path)

    def test_header_layout_is_the_documented_one(self, tmp_path):
        ds = small_dataset()
        path = tmp_path / "t.fova"
        save_features(ds, path)
        blob = path.read_bytes()
        assert blob[:4] == b"FOVA"
        version, n, d, k, meta_len = struct.unpack_from("<IQIII", blob, 4)
        assert (version, n, d, k) == (FORMAT_VERSION, 2, 3, 2)
        meta = json.loads(blob[28 : 28 + meta_len])
        assert meta == {"encoder": "none"}


class TestSynthetic:
    def test_deterministic(self):
        spec = SyntheticSpec(3, 5, 4, 2.0, 0.5, seed=11)
        assert generate_synthetic(spec) == generate_synthetic(spec)

    def test_split_changes_samples_not_centroids(self):
        a = SyntheticSpec(3, 8, 50, 4.0, 0.5, seed=1, split=0)
        b = SyntheticSpec(3, 8, 50, 4.0, 0.5, seed=1, split=1)
        assert np.array_equal(synthetic_centroids(a), synthetic_centroids(b))
        assert not np.array_equal(generate_synthetic(a).features, generate_synthetic(b).features)

    def test_shape_and_labels(self):
        ds = generate_synthetic(SyntheticSpec(4, 6, 10, 3.0, 0.2, seed=0))
        assert ds.n_samples == 40 and ds.dim == 6
        assert np.array_equal(np.bincount(ds.labels), [10, 10, 10, 10])

    def test_centroid_pairwise_separation(self):
        for k, d in [(4, 16), (5, 3), (7, 2)]:
            spec = SyntheticSpec(k, d, 1, 3.0, 0.1, seed=5)
            cents = synthetic_centroids(spec)
            for i in range(k):
                for j in range(i + 1, k):
                    assert np.linalg.norm(cents[i] - cents[j]) >= 3.0 - 1e-9

    def test_degenerate_spread(self):
        spec = SyntheticSpec(3, 4, 5, 5.0, 1e-9, seed=2)
        ds = generate_synthetic(spec)
        cents = synthetic_centroids(spec)
        dev = np.abs(ds.features - cents[ds.labels].astype(np.float32))
        assert dev.max() < 1e-6

    def test_tight_clusters_have_tiny_ratio(self):
        ds = generate_synthetic(SyntheticSpec(2, 2, 10, 10.0, 0.01, seed=0))
        report = geometry(ds.features, ds.labels)
        assert report.ratio < 0.01

    def test_ratio_monotone_in_separation(self):
        # widening centroids with fixed spread never increases intra/inter
        for seed in range(5):
            ratios = []
            for sep in (2.0, 4.0, 8.0):
                ds = generate_synthetic(SyntheticSpec(4, 8, 30, sep, 0.5, seed=seed))
                ratios.append(geometry(ds.features, ds.labels).ratio)
            assert ratios[0] >= ratios[1] >= ratios[2]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(1, 4, 5, 1.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            SyntheticSpec(3, 4, 5, -1.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            SyntheticSpec(3, 4, 5, 1.0, 0.0, seed=0)


def test_l2_normalized_rows():
    ds = generate_synthetic(SyntheticSpec(3, 6, 5, 4.0, 0.3, seed=9))
    normed = l2_normalized(ds)
    norms = np.linalg.norm(normed.features.astype(np.float64), axis=1)
    assert np.allclose(norms, 1.0, atol=1e-6)
    assert np.array_equal(normed.labels, ds.labels)
