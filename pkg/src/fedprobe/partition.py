"""Client/sample assignments: IID plus five heterogeneity patterns.

Every scheme is a pure function of (dataset, parameters, seed) and returns a
:class:`Partition` whose index lists are pairwise disjoint and cover the
dataset exactly.  Label-based skew (shards, Bernoulli-Dirichlet), quantity
skew (Zipf) and feature skew (per-class k-means clustering) all reduce to
this one representation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureDataset

__all__ = [
    "Partition",
    "PartitionStats",
    "PartitionError",
    "partition_iid",
    "partition_shard",
    "partition_dirichlet_bernoulli",
    "partition_zipf",
    "partition_feature_cluster",
    "partition_stats",
    "partition_to_manifest",
    "partition_from_manifest",
]

# schemes where empty clients are an accepted outcome rather than a bug
_ALLOWS_EMPTY = {"dirichlet", "cluster"}


class PartitionError(Exception):
    pass


@dataclass(frozen=True)
class Partition:
    """Assignment of sample indices to clients."""

    assignments: tuple[np.ndarray, ...]
    num_clients: int
    scheme: str
    params: dict
    seed: int
    n_samples: int

    def __post_init__(self):
        if len(self.assignments) != self.num_clients:
            raise PartitionError(
                f"{len(self.assignments)} index lists for {self.num_clients} clients"
            )
        frozen = []
        total = 0
        for idx in self.assignments:
            arr = np.asarray(idx, dtype=np.int64)
            arr.flags.writeable = False
            frozen.append(arr)
            total += arr.size
        merged = np.concatenate(frozen) if frozen else np.empty(0, dtype=np.int64)
        if total != self.n_samples or not np.array_equal(
            np.sort(merged), np.arange(self.n_samples)
        ):
            raise PartitionError("assignments must disjointly cover all sample indices")
        if self.scheme not in _ALLOWS_EMPTY and any(a.size == 0 for a in frozen):
            raise PartitionError(f"scheme {self.scheme!r} produced an empty client")
        object.__setattr__(self, "assignments", tuple(frozen))

    def sizes(self) -> np.ndarray:
        return np.array([a.size for a in self.assignments], dtype=np.int64)


@dataclass(frozen=True)
class PartitionStats:
    """Per-client sample counts, class histograms, and distinct-class counts."""

    counts: np.ndarray            # (M,)
    class_histograms: np.ndarray  # (M, K)
    effective_classes: np.ndarray # (M,)


def largest_remainder(total: int, proportions: np.ndarray) -> np.ndarray:
    """Round `total * proportions` to integers summing exactly to `total`.

    Floors first, then hands out the remainder by descending fractional part
    (ties to the lower index).
    """
    proportions = np.asarray(proportions, dtype=np.float64)
    raw = total * proportions / proportions.sum()
    counts = np.floor(raw).astype(np.int64)
    fractions = raw - counts
    for idx in np.argsort(-fractions, kind="stable")[: total - counts.sum()]:
        counts[idx] += 1
    return counts


def partition_iid(dataset: FeatureDataset, num_clients: int, seed: int) -> Partition:
    """Split samples uniformly at random; sizes differ by at most one."""
    n = dataset.n_samples
    if num_clients < 1:
        raise PartitionError("need at least one client")
    if num_clients > n:
        raise PartitionError(f"cannot give {num_clients} clients >= 1 of {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(perm, num_clients)
    return Partition(tuple(parts), num_clients, "iid", {}, seed, n)


def partition_shard(dataset: FeatureDataset, num_clients: int, shards_per_client: int,
                    seed: int) -> Partition:
    """Sort by label, cut into `num_clients * shards_per_client` contiguous
    shards, and deal `shards_per_client` shards to each client.

    When per-class counts are multiples of the shard size, every client ends
    up with at most `shards_per_client` distinct classes.
    """
    n = dataset.n_samples
    n_shards = num_clients * shards_per_client
    if shards_per_client < 1:
        raise PartitionError("shards_per_client must be >= 1")
    if n_shards > n:
        raise PartitionError(f"{n_shards} shards exceed {n} samples")
    order = np.argsort(dataset.labels, kind="stable")  # (label, original index)
    shard_size = n // n_shards
    shards = [order[i * shard_size : (i + 1) * shard_size] for i in range(n_shards)]
    # remainder rides along with the last shard
    shards[-1] = np.concatenate([shards[-1], order[n_shards * shard_size :]])
    perm = np.random.default_rng(seed).permutation(n_shards)
    parts = tuple(
        np.concatenate([shards[j] for j in perm[i * shards_per_client : (i + 1) * shards_per_client]])
        for i in range(num_clients)
    )
    return Partition(parts, num_clients, "shard", {"shards_per_client": shards_per_client}, seed, n)


def partition_dirichlet_bernoulli(dataset: FeatureDataset, num_clients: int, p: float,
                                  alpha: float, seed: int,
                                  max_resamples: int = 100) -> Partition:
    """Bernoulli(p) class presence per (client, class), then per-class
    Dirichlet(alpha) proportions over the present clients.

    A class whose presence row comes up all-zero is redrawn up to
    `max_resamples` times; clients may legitimately end up empty (they join
    aggregation with weight zero).
    """
    if not 0 < p <= 1:
        raise PartitionError(f"presence probability must be in (0, 1], got {p}")
    if not alpha > 0:
        raise PartitionError(f"alpha must be > 0, got {alpha}")
    n, k = dataset.n_samples, dataset.num_classes
    rng = np.random.default_rng(seed)
    presence = rng.random((k, num_clients)) < p
    for c in range(k):
        tries = 0
        while not presence[c].any():
            tries += 1
            if tries > max_resamples:
                raise PartitionError(
                    f"class {c} has no present client after {max_resamples} resamples"
                )
            presence[c] = rng.random(num_clients) < p
    buckets: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
    for c in range(k):
        idx = np.flatnonzero(dataset.labels == c)
        idx = idx[rng.permutation(idx.size)]
        present = np.flatnonzero(presence[c])
        shares = rng.dirichlet(np.full(present.size, alpha))
        counts = largest_remainder(idx.size, shares)
        start = 0
        for client, cnt in zip(present, counts):
            buckets[client].append(idx[start : start + cnt])
            start += cnt
    parts = tuple(
        np.concatenate(b) if b else np.empty(0, dtype=np.int64) for b in buckets
    )
    return Partition(parts, num_clients, "dirichlet", {"p": p, "alpha": alpha}, seed, n)


def partition_zipf(dataset: FeatureDataset, num_clients: int, s: float, seed: int) -> Partition:
    """Quantity skew: client i receives a share proportional to (i+1)^-s.

    Labels are untouched; sample identity is assigned uniformly at random to
    match the targets (largest-remainder rounding, minimum one per client).
    """
    if not s > 0:
        raise PartitionError(f"zipf exponent must be > 0, got {s}")
    n = dataset.n_samples
    if n < num_clients:
        raise PartitionError(f"{n} samples cannot give {num_clients} clients >= 1 each")
    shares = np.arange(1, num_clients + 1, dtype=np.float64) ** (-s)
    counts = largest_remainder(n, shares / shares.sum())
    # rounding can zero out tail clients; top them up from the last-largest
    # count so the realized counts stay sorted descending
    while counts.min() == 0:
        donor = num_clients - 1 - int(np.argmax(counts[::-1]))
        counts[donor] -= 1
        counts[int(np.argmin(counts != 0))] += 1
    perm = np.random.default_rng(seed).permutation(n)
    bounds = np.cumsum(counts)[:-1]
    parts = tuple(np.split(perm, bounds))
    return Partition(parts, num_clients, "zipf", {"s": s}, seed, n)


def _sq_dists(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (X**2).sum(axis=1)[:, None] - 2.0 * (X @ centroids.T) + (centroids**2).sum(axis=1)
    return np.maximum(d, 0.0)


def _kmeans_assign(X: np.ndarray, k: int, rng: np.random.Generator,
                   n_iters: int = 50) -> np.ndarray:
    """Deterministic k-means labels: k-means++ seeding from `rng`, fixed
    iteration budget, nearest-centroid ties to the lowest centroid index,
    and exact final ties distributed round-robin across the tied centroids.
    """
    n = X.shape[0]
    if n <= k:
        return np.arange(n, dtype=np.int64)  # one sample per cluster, rest empty
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            centroids[j] = X[rng.choice(n, p=d2 / total)]
        else:
            centroids[j] = X[j % n]  # all remaining points coincide with a seed
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))
    for _ in range(n_iters):
        labels = _sq_dists(X, centroids).argmin(axis=1)
        new = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = X[members].mean(axis=0)
        if np.array_equal(new, centroids):
            break
        centroids = new
    dist = _sq_dists(X, centroids)
    labels = dist.argmin(axis=1)
    best = dist[np.arange(n), labels]
    tied = dist == best[:, None]
    multi = np.flatnonzero(tied.sum(axis=1) > 1)
    if multi.size:
        # balance samples whose nearest centroids coincide exactly (degenerate
        # clusters): cycle each tie group through its centroid indices
        groups: dict[tuple[int, ...], list[int]] = {}
        for i in multi:
            groups.setdefault(tuple(np.flatnonzero(tied[i])), []).append(int(i))
        for tie_set, members in sorted(groups.items()):
            for pos, i in enumerate(sorted(members)):
                labels[i] = tie_set[pos % len(tie_set)]
    return labels


def partition_feature_cluster(dataset: FeatureDataset, num_clients: int, seed: int,
                              strict: bool = True) -> Partition:
    """Within every class, k-means the features into `num_clients` clusters
    and hand cluster j of each class to client j."""
    n, k_classes = dataset.n_samples, dataset.num_classes
    rng = np.random.default_rng(seed)
    feats = dataset.features.astype(np.float64)
    buckets: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
    for c in range(k_classes):
        idx = np.flatnonzero(dataset.labels == c)
        if idx.size < num_clients and strict:
            raise PartitionError(
                f"class {c} has {idx.size} samples, fewer than {num_clients} clients"
            )
        if idx.size == 0:
            continue
        labels = _kmeans_assign(feats[idx], num_clients, rng)
        for j in range(num_clients):
            buckets[j].append(idx[labels == j])
    parts = tuple(
        np.concatenate(b) if b else np.empty(0, dtype=np.int64) for b in buckets
    )
    return Partition(parts, num_clients, "cluster", {"strict": strict}, seed, n)


def partition_stats(partition: Partition, dataset: FeatureDataset) -> PartitionStats:
    """Summarize a partition; counts always sum to the assigned total."""
    k = dataset.num_classes
    hists = np.zeros((partition.num_clients, k), dtype=np.int64)
    for i, idx in enumerate(partition.assignments):
        if idx.size:
            hists[i] = np.bincount(dataset.labels[idx], minlength=k)
    counts = hists.sum(axis=1)
    return PartitionStats(counts, hists, (hists > 0).sum(axis=1))


def partition_to_manifest(partition: Partition) -> dict:
    """JSON-ready audit record: client -> sorted index list plus scheme info."""
    return {
        "scheme": partition.scheme,
        "params": partition.params,
        "seed": partition.seed,
        "num_clients": partition.num_clients,
        "n_samples": partition.n_samples,
        "assignments": [sorted(int(i) for i in a) for a in partition.assignments],
    }


def partition_from_manifest(manifest: dict) -> Partition:
    return Partition(
        tuple(np.asarray(a, dtype=np.int64) for a in manifest["assignments"]),
        int(manifest["num_clients"]),
        str(manifest["scheme"]),
        dict(manifest["params"]),
        int(manifest["seed"]),
        int(manifest["n_samples"]),
    )
