"""Partitioner tests: scheme contracts, determinism, disjoint coverage."""

import numpy as np
import pytest

from fedprobe.features import FeatureDataset, SyntheticSpec, generate_synthetic
from fedprobe.partition import (
    PartitionError,
    largest_remainder,
    partition_dirichlet_bernoulli,
    partition_feature_cluster,
    partition_from_manifest,
    partition_iid,
    partition_shard,
    partition_stats,
    partition_to_manifest,
    partition_zipf,
)


def balanced_dataset(num_classes=10, per_class=10, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    n = num_classes * per_class
    labels = np.repeat(np.arange(num_classes), per_class)
    labels = labels[rng.permutation(n)]  # interleave so sorting matters
    return FeatureDataset(
        rng.standard_normal((n, dim)).astype(np.float32), labels, num_classes
    )


def assert_disjoint_cover(part):
    merged = np.concatenate([a for a in part.assignments])
    assert merged.size == part.n_samples
    assert np.array_equal(np.sort(merged), np.arange(part.n_samples))


class TestIid:
    def test_even_split(self):
        ds = balanced_dataset(10, 10)
        part = partition_iid(ds, 10, seed=0)
        assert np.array_equal(part.sizes(), np.full(10, 10))

    def test_remainder_split(self):
        ds = balanced_dataset(num_classes=2, per_class=50, dim=2)
        # 101 samples cannot come from a balanced builder; craft directly
        rng = np.random.default_rng(0)
        ds = FeatureDataset(
            rng.standard_normal((101, 2)).astype(np.float32),
            rng.integers(0, 2, size=101), 2,
        )
        part = partition_iid(ds, 10, seed=3)
        assert sorted(part.sizes()) == [10] * 9 + [11]

    def test_deterministic(self):
        ds = balanced_dataset()
        a = partition_iid(ds, 7, seed=5)
        b = partition_iid(ds, 7, seed=5)
        assert all(np.array_equal(x, y) for x, y in zip(a.assignments, b.assignments))

    def test_too_many_clients(self):
        ds = balanced_dataset(2, 2)
        with pytest.raises(PartitionError):
            partition_iid(ds, 5, seed=0)


class TestShard:
    def test_one_class_per_client(self):
        ds = balanced_dataset(10, 10)
        part = partition_shard(ds, 10, 1, seed=0)
        stats = partition_stats(part, ds)
        assert np.array_equal(stats.effective_classes, np.ones(10))

    def test_at_most_two_classes(self):
        ds = balanced_dataset(10, 10)
        part = partition_shard(ds, 5, 2, seed=1)
        stats = partition_stats(part, ds)
        assert stats.effective_classes.max() <= 2

    def test_one_sample_shards(self):
        ds = balanced_dataset(5, 4)  # N = 20 = M*k with M=10, k=2
        part = partition_shard(ds, 10, 2, seed=2)
        assert np.array_equal(part.sizes(), np.full(10, 2))

    def test_class_bound_over_seeds(self):
        # per-class counts are multiples of the shard size, so the bound is exact
        ds = balanced_dataset(10, 20)
        for seed in range(10):
            stats = partition_stats(partition_shard(ds, 20, 1, seed=seed), ds)
            assert stats.effective_classes.max() == 1

    def test_too_many_shards(self):
        ds = balanced_dataset(2, 2)
        with pytest.raises(PartitionError):
            partition_shard(ds, 3, 2, seed=0)


class TestDirichletBernoulli:
    def test_single_client_gets_everything(self):
        ds = balanced_dataset(3, 5)
        part = partition_dirichlet_bernoulli(ds, 1, p=1.0, alpha=0.5, seed=0)
        assert part.sizes()[0] == ds.n_samples

    def test_huge_alpha_is_nearly_uniform(self):
        # statistical: each class splits within 10% of n_c / M
        ds = balanced_dataset(5, 100, seed=1)
        hits = 0
        for seed in range(5):
            part = partition_dirichlet_bernoulli(ds, 4, p=1.0, alpha=1e6, seed=seed)
            stats = partition_stats(part, ds)
            expected = 100 / 4
            if np.all(np.abs(stats.class_histograms - expected) <= 0.1 * 100):
                hits += 1
        assert hits == 5

    def test_tiny_alpha_concentrates(self):
        ds = balanced_dataset(10, 50, seed=2)
        medians = []
        for seed in range(5):
            part = partition_dirichlet_bernoulli(ds, 20, p=0.1, alpha=0.001, seed=seed)
            stats = partition_stats(part, ds)
            occupied = stats.effective_classes[stats.counts > 0]
            medians.append(np.median(occupied))
        assert np.median(medians) <= 2

    def test_full_coverage_with_possible_empty_clients(self):
        ds = balanced_dataset(4, 25, seed=3)
        for seed in range(10):
            part = partition_dirichlet_bernoulli(ds, 30, p=0.2, alpha=0.5, seed=seed)
            assert_disjoint_cover(part)

    def test_parameter_validation(self):
        ds = balanced_dataset(2, 4)
        with pytest.raises(PartitionError):
            partition_dirichlet_bernoulli(ds, 2, p=0.0, alpha=1.0, seed=0)
        with pytest.raises(PartitionError):
            partition_dirichlet_bernoulli(ds, 2, p=0.5, alpha=0.0, seed=0)

    def test_orphan_resampling_exhaustion(self):
        ds = balanced_dataset(2, 4)
        with pytest.raises(PartitionError, match="resamples"):
            # p so small that a present client is essentially impossible
            partition_dirichlet_bernoulli(ds, 1, p=1e-12, alpha=1.0, seed=0,
                                          max_resamples=5)


class TestZipf:
    def test_exact_counts_for_49(self):
        # shares 1 : 1/4 : 1/9 over 49 samples are exactly 36, 9, 4
        rng = np.random.default_rng(0)
        ds = FeatureDataset(
            rng.standard_normal((49, 2)).astype(np.float32),
            rng.integers(0, 2, size=49), 2,
        )
        part = partition_zipf(ds, 3, s=2.0, seed=0)
        assert list(part.sizes()) == [36, 9, 4]

    def test_uniform_limit(self):
        ds = balanced_dataset(4, 25)
        part = partition_zipf(ds, 4, s=1e-9, seed=1)
        assert list(part.sizes()) == [25, 25, 25, 25]

    def test_single_client(self):
        ds = balanced_dataset(2, 5)
        part = partition_zipf(ds, 1, s=2.0, seed=0)
        assert part.sizes()[0] == ds.n_samples

    def test_counts_sorted_descending_and_nonzero(self):
        ds = balanced_dataset(5, 200, seed=4)
        for s in (0.5, 1.0, 2.0, 3.0):
            for seed in range(5):
                sizes = partition_zipf(ds, 12, s=s, seed=seed).sizes()
                assert np.all(np.diff(sizes) <= 0)
                assert sizes.min() >= 1

    def test_count_ratios_track_power_law(self):
        ds = balanced_dataset(5, 2000, seed=5)  # N = 10000
        sizes = partition_zipf(ds, 8, s=2.0, seed=0).sizes()
        for i, size in enumerate(sizes):
            # +-1 rounding in both numerator and denominator
            assert abs(size / sizes[0] - (i + 1) ** -2.0) <= 2.5 / sizes[0]

    def test_labels_not_skewed(self):
        # quantity skew only: the big client's class mix stays near uniform
        ds = balanced_dataset(4, 500, seed=6)
        part = partition_zipf(ds, 4, s=2.0, seed=3)
        stats = partition_stats(part, ds)
        big = stats.class_histograms[0] / stats.counts[0]
        assert np.abs(big - 0.25).max() < 0.05


class TestFeatureCluster:
    def test_separated_blobs_go_to_distinct_clients(self):
        # each class is M well-separated blobs; purity per client >= 0.99
        rng = np.random.default_rng(7)
        m = 4
        feats, labels, blob_ids = [], [], []
        for c in range(3):
            for blob in range(m):
                center = np.zeros(6)
                center[blob] = 50.0 * (c + 1)
                pts = center + 0.01 * rng.standard_normal((20, 6))
                feats.append(pts)
                labels.extend([c] * 20)
                blob_ids.extend([blob] * 20)
        ds = FeatureDataset(np.vstack(feats).astype(np.float32), np.array(labels), 3)
        blob_ids = np.array(blob_ids)
        part = partition_feature_cluster(ds, m, seed=0)
        assert_disjoint_cover(part)
        for idx in part.assignments:
            for c in range(3):
                mine = blob_ids[idx][ds.labels[idx] == c]
                if mine.size:
                    top = np.bincount(mine).max()
                    assert top / mine.size >= 0.99

    def test_single_client(self):
        ds = balanced_dataset(3, 5)
        part = partition_feature_cluster(ds, 1, seed=0)
        assert part.sizes()[0] == ds.n_samples

    def test_identical_features_balanced(self):
        feats = np.ones((20, 3), dtype=np.float32)
        feats[10:] *= -1.0  # two classes at two points
        labels = np.array([0] * 10 + [1] * 10)
        ds = FeatureDataset(feats, labels, 2)
        part = partition_feature_cluster(ds, 4, seed=0)
        stats = partition_stats(part, ds)
        for c in range(2):
            counts = stats.class_histograms[:, c]
            assert counts.max() - counts.min() <= 1

    def test_strict_mode_rejects_small_class(self):
        ds = balanced_dataset(3, 2)
        with pytest.raises(PartitionError, match="fewer than"):
            partition_feature_cluster(ds, 5, seed=0)
        part = partition_feature_cluster(ds, 5, seed=0, strict=False)
        assert_disjoint_cover(part)


class TestStats:
    def test_counts_sum(self):
        ds = balanced_dataset(4, 10)
        part = partition_iid(ds, 4, seed=0)
        stats = partition_stats(part, ds)
        assert stats.counts.sum() == ds.n_samples
        assert np.array_equal(stats.class_histograms.sum(axis=1), stats.counts)

    def test_shard1_histograms_single_entry(self):
        ds = balanced_dataset(10, 10)
        stats = partition_stats(partition_shard(ds, 10, 1, seed=0), ds)
        assert np.all((stats.class_histograms > 0).sum(axis=1) == 1)

    def test_iid_histogram_roughly_uniform(self):
        ds = balanced_dataset(10, 100, seed=8)
        dev = []
        for seed in range(5):
            stats = partition_stats(partition_iid(ds, 10, seed=seed), ds)
            expected = stats.counts[:, None] / 10
            dev.append(np.abs(stats.class_histograms - expected).max())
        assert np.median(dev) < 12  # ~3.6 sigma for hypergeometric cell counts

    def test_empty_client_zero_row(self):
        ds = balanced_dataset(2, 10)
        for seed in range(20):
            part = partition_dirichlet_bernoulli(ds, 10, p=0.15, alpha=0.01, seed=seed)
            stats = partition_stats(part, ds)
            empty = np.flatnonzero(part.sizes() == 0)
            if empty.size:
                assert np.all(stats.class_histograms[empty] == 0)
                return
        pytest.skip("no empty client realized in 20 seeds")


class TestProperties:
    def test_disjoint_coverage_all_schemes(self):
        ds = generate_synthetic(SyntheticSpec(5, 6, 30, 4.0, 0.8, seed=0))
        builders = [
            lambda s: partition_iid(ds, 7, seed=s),
            lambda s: partition_shard(ds, 5, 1, seed=s),
            lambda s: partition_shard(ds, 5, 2, seed=s),
            lambda s: partition_dirichlet_bernoulli(ds, 6, 0.4, 0.3, seed=s),
            lambda s: partition_zipf(ds, 6, 2.0, seed=s),
            lambda s: partition_feature_cluster(ds, 4, seed=s),
        ]
        for seed in range(8):
            for build in builders:
                assert_disjoint_cover(build(seed))

    def test_all_schemes_deterministic(self):
        ds = generate_synthetic(SyntheticSpec(4, 5, 25, 4.0, 0.5, seed=1))
        for build in [
            lambda s: partition_iid(ds, 5, seed=s),
            lambda s: partition_shard(ds, 4, 2, seed=s),
            lambda s: partition_dirichlet_bernoulli(ds, 5, 0.5, 0.2, seed=s),
            lambda s: partition_zipf(ds, 5, 1.5, seed=s),
            lambda s: partition_feature_cluster(ds, 3, seed=s),
        ]:
            a, b = build(9), build(9)
            assert all(np.array_equal(x, y) for x, y in zip(a.assignments, b.assignments))


class TestManifest:
    def test_roundtrip(self):
        ds = balanced_dataset(4, 10)
        part = partition_shard(ds, 4, 1, seed=3)
        doc = partition_to_manifest(part)
        back = partition_from_manifest(doc)
        assert back.scheme == part.scheme and back.num_clients == part.num_clients
        for a, b in zip(part.assignments, back.assignments):
            assert np.array_equal(np.sort(a), np.sort(b))


def test_largest_remainder_exact():
    counts = largest_remainder(49, np.array([36 / 49, 9 / 49, 4 / 49]))
    assert list(counts) == [36, 9, 4]
    counts = largest_remainder(10, np.array([0.26, 0.26, 0.48]))
    assert counts.sum() == 10
