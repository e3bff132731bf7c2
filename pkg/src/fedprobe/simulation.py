"""The federated training loop.

Each round: sample participants, run local training from the shared global
head, aggregate with size-weighted averaging, evaluate.  One-vs-all heads
support a two-stage curriculum: the first `stage1_rounds` rounds train each
head only on its own positives (pulling weights toward class centroids),
later rounds train on all local samples as negatives plus a small anchor
subset of positives per class.  Softmax heads and the no-curriculum arm use
plain mini-batch training.

Everything is a pure function of (config, dataset, seed): participant
draws, batch order, and anchor choices all come from streams derived from
(seed, round, client), and clients are processed in ascending id so results
do not depend on scheduling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureDataset
from .heads import HeadModel, ova_grad, softmax_grad
from .metrics import RoundRecord, accuracy, drift_report
from .noise import NoiseSpec, inject_noise
from .optim import AdamWConfig, AdamWState, adamw_step, sgd_step
from .partition import (
    Partition,
    partition_dirichlet_bernoulli,
    partition_feature_cluster,
    partition_iid,
    partition_shard,
    partition_zipf,
)
from .validation import derive_rng

__all__ = [
    "ClientUpdate",
    "StageConfig",
    "PartitionConfig",
    "NoiseConfig",
    "RunConfig",
    "SimState",
    "METHODS",
    "SCHEMES",
    "DEFAULT_SEEDS",
    "local_train_stage1",
    "local_train_stage2",
    "local_train_plain",
    "fedavg",
    "run_round",
    "run_experiment",
    "train_federated",
]

METHODS = ("lp_softmax", "ova_plain", "ova_two_stage")
SCHEMES = ("iid", "shard-1", "shard-2", "dirichlet", "zipf", "cluster")
DEFAULT_SEEDS = (0, 42, 777, 1337, 15254)

# stream tags for derive_rng keys
_TAG_SAMPLING, _TAG_LOCAL, _TAG_ANCHOR, _TAG_NOISE = 1, 2, 3, 4


@dataclass
class ClientUpdate:
    """Post-local-training head parameters plus the client's sample count.

    `opt_state` is the client-local optimizer state after training; it is
    never aggregated and only kept when optimizer persistence is enabled.
    """

    weights: np.ndarray
    bias: np.ndarray | None
    n: int
    client_id: int
    train_seconds: float = 0.0
    upload_bytes: int = 0
    opt_state: "AdamWState | None" = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("sample count must be >= 0")
        if not np.isfinite(self.weights).all() or (
            self.bias is not None and not np.isfinite(self.bias).all()
        ):
            raise ValueError("client update parameters must be finite")


@dataclass(frozen=True)
class StageConfig:
    stage1_rounds: int = 1
    anchor_fraction: float = 0.1
    local_epochs: int = 3
    batch_size: int = 50
    resample_anchors_per_epoch: bool = False

    def __post_init__(self):
        if self.stage1_rounds < 0:
            raise ValueError("stage1_rounds must be >= 0")
        if not 0.0 <= self.anchor_fraction <= 1.0:
            raise ValueError("anchor_fraction must be in [0, 1]")
        if self.local_epochs < 0:
            raise ValueError("local_epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class PartitionConfig:
    scheme: str = "iid"
    shard_k: int = 1
    dirichlet_p: float = 0.1
    dirichlet_alpha: float = 0.001
    zipf_s: float = 2.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    def build(self, dataset: FeatureDataset, num_clients: int, seed: int) -> Partition:
        if self.scheme == "iid":
            return partition_iid(dataset, num_clients, seed)
        if self.scheme == "shard-1":
            return partition_shard(dataset, num_clients, 1, seed)
        if self.scheme == "shard-2":
            return partition_shard(dataset, num_clients, 2, seed)
        if self.scheme == "dirichlet":
            return partition_dirichlet_bernoulli(
                dataset, num_clients, self.dirichlet_p, self.dirichlet_alpha, seed
            )
        if self.scheme == "zipf":
            return partition_zipf(dataset, num_clients, self.zipf_s, seed)
        return partition_feature_cluster(dataset, num_clients, seed)


@dataclass(frozen=True)
class NoiseConfig:
    kind: str = "none"  # none | symmetric | asymmetric
    ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "symmetric", "asymmetric"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("noise ratio must be in [0, 1]")


@dataclass(frozen=True)
class RunConfig:
    """Everything one federated run depends on, apart from the data."""

    rounds: int = 50
    num_clients: int = 100
    participation: float = 1.0
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    method: str = "ova_two_stage"
    with_bias: bool = True
    init_std: float = 0.0  # 0 -> zero init; > 0 -> Gaussian init
    stage: StageConfig = field(default_factory=StageConfig)
    optimizer: AdamWConfig = field(default_factory=AdamWConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    persist_optimizer_state: bool = False
    record_drift: bool = False

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if not 0.0 < self.participation <= 1.0:
            raise ValueError("participation must be in (0, 1]")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.init_std < 0:
            raise ValueError("init_std must be >= 0")

    @property
    def head_kind(self) -> str:
        return "softmax" if self.method == "lp_softmax" else "ova"

    @property
    def two_stage(self) -> bool:
        return self.method == "ova_two_stage"


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _finish(model: HeadModel, n: int, client_id: int, t0: float,
            opt: "_LocalOptimizer | None" = None) -> ClientUpdate:
    return ClientUpdate(
        model.weights, model.bias, n, client_id,
        train_seconds=time.perf_counter() - t0,
        upload_bytes=model.wire_bytes(),
        opt_state=None if opt is None or opt.plain_lr is not None else opt.state,
    )


class _LocalOptimizer:
    """Per-client optimizer wrapper: AdamW by default, plain gradient steps
    when `plain_lr` is given (used by exactness tests)."""

    def __init__(self, model: HeadModel, cfg: AdamWConfig, plain_lr: float | None = None,
                 state: AdamWState | None = None):
        self.cfg = cfg
        self.plain_lr = plain_lr
        self.state = state if state is not None else AdamWState.init(model, cfg)

    def step(self, model, grad, row_mask=None):
        if self.plain_lr is not None:
            return sgd_step(model, grad, self.plain_lr, row_mask)
        model, self.state = adamw_step(model, grad, self.state, row_mask)
        return model


def local_train_stage1(global_head: HeadModel, X, y, stage: StageConfig, opt_cfg: AdamWConfig,
                       rng: np.random.Generator, *, client_id: int = 0,
                       plain_lr: float | None = None,
                       opt_state: AdamWState | None = None) -> ClientUpdate:
    """Positive-only local training: each sample updates only its own class's
    head with target one, so heads of classes absent locally return unchanged.
    """
    if global_head.kind != "ova":
        raise ValueError("stage training requires a one-vs-all head")
    t0 = time.perf_counter()
    n = X.shape[0]
    model = global_head.copy()
    if n == 0:
        return _finish(model, 0, client_id, t0)
    opt = _LocalOptimizer(model, opt_cfg, plain_lr, opt_state)
    k = model.num_classes
    for _ in range(stage.local_epochs):
        for batch in _batches(n, stage.batch_size, rng):
            yb = y[batch]
            mask = np.zeros((batch.size, k), dtype=bool)
            mask[np.arange(batch.size), yb] = True
            grad = ova_grad(model, X[batch], yb, mask)
            model = opt.step(model, grad, row_mask=grad.row_counts > 0)
    return _finish(model, n, client_id, t0, opt)


def _choose_anchors(y: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean anchor flags: ceil(fraction * count) positives per present class."""
    flags = np.zeros(y.shape[0], dtype=bool)
    if fraction <= 0.0:
        return flags
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        keep = min(idx.size, math.ceil(fraction * idx.size))
        flags[rng.choice(idx, size=keep, replace=False)] = True
    return flags


def local_train_stage2(global_head: HeadModel, X, y, stage: StageConfig, opt_cfg: AdamWConfig,
                       rng: np.random.Generator, anchor_rng: np.random.Generator, *,
                       client_id: int = 0, plain_lr: float | None = None,
                       opt_state: AdamWState | None = None) -> ClientUpdate:
    """Anchored positive+negative training: every sample is a negative for
    all other heads, while each head keeps only an anchor subset of its own
    positives.  Heads with no training pairs at all return unchanged.
    """
    if global_head.kind != "ova":
        raise ValueError("stage training requires a one-vs-all head")
    t0 = time.perf_counter()
    n = X.shape[0]
    model = global_head.copy()
    if n == 0:
        return _finish(model, 0, client_id, t0)
    opt = _LocalOptimizer(model, opt_cfg, plain_lr, opt_state)
    k = model.num_classes
    anchors = _choose_anchors(y, stage.anchor_fraction, anchor_rng)
    for _ in range(stage.local_epochs):
        if stage.resample_anchors_per_epoch:
            anchors = _choose_anchors(y, stage.anchor_fraction, anchor_rng)
        for batch in _batches(n, stage.batch_size, rng):
            yb = y[batch]
            mask = np.ones((batch.size, k), dtype=bool)
            mask[np.arange(batch.size), yb] = anchors[batch]
            grad = ova_grad(model, X[batch], yb, mask)
            model = opt.step(model, grad, row_mask=grad.row_counts > 0)
    return _finish(model, n, client_id, t0, opt)


def local_train_plain(global_head: HeadModel, X, y, stage: StageConfig, opt_cfg: AdamWConfig,
                      rng: np.random.Generator, *, client_id: int = 0,
                      plain_lr: float | None = None,
                      opt_state: AdamWState | None = None) -> ClientUpdate:
    """Standard mini-batch training: softmax cross-entropy or full-mask
    one-vs-all, depending on the head kind."""
    t0 = time.perf_counter()
    n = X.shape[0]
    model = global_head.copy()
    if n == 0:
        return _finish(model, 0, client_id, t0)
    opt = _LocalOptimizer(model, opt_cfg, plain_lr, opt_state)
    for _ in range(stage.local_epochs):
        for batch in _batches(n, stage.batch_size, rng):
            if model.kind == "softmax":
                grad = softmax_grad(model, X[batch], y[batch])
            else:
                grad = ova_grad(model, X[batch], y[batch])
            model = opt.step(model, grad)
    return _finish(model, n, client_id, t0, opt)


def fedavg(updates: list[ClientUpdate], fallback_head: HeadModel) -> HeadModel:
    """Size-weighted parameter mean; returns the fallback when every
    participating client is empty.  Summation runs in ascending client id so
    the result is independent of arrival order."""
    total = sum(u.n for u in updates)
    if total == 0:
        return fallback_head.copy()
    has_bias = fallback_head.bias is not None
    weights = np.zeros_like(fallback_head.weights)
    bias = np.zeros_like(fallback_head.bias) if has_bias else None
    for u in sorted(updates, key=lambda u: u.client_id):
        if u.weights.shape != fallback_head.weights.shape:
            raise ValueError(
                f"update shape {u.weights.shape} does not match head {fallback_head.weights.shape}"
            )
        if (u.bias is None) != (not has_bias):
            raise ValueError("updates disagree with the head about bias presence")
        if u.n == 0:
            continue
        p = u.n / total
        weights += p * u.weights
        if has_bias:
            bias += p * u.bias
    return HeadModel(weights, bias, fallback_head.kind)


@dataclass
class SimState:
    """Mutable state threaded through run_round."""

    config: RunConfig
    seed: int
    model: HeadModel
    client_features: list[np.ndarray]
    client_labels: list[np.ndarray]
    eval_features: np.ndarray | None
    eval_labels: np.ndarray | None
    opt_states: dict[int, AdamWState] = field(default_factory=dict)


def _init_head(config: RunConfig, num_classes: int, dim: int, seed: int) -> HeadModel:
    if config.init_std > 0:
        return HeadModel.gaussian(num_classes, dim, config.head_kind, config.init_std,
                                  seed, config.with_bias)
    return HeadModel.zeros(num_classes, dim, config.head_kind, config.with_bias)


def run_round(state: SimState, round_index: int, rng: np.random.Generator) -> tuple[SimState, RoundRecord]:
    """Execute one round: sample clients, train locally, aggregate, evaluate."""
    cfg = state.config
    m = math.ceil(cfg.participation * cfg.num_clients)
    participants = np.sort(rng.choice(cfg.num_clients, size=m, replace=False))
    stage1 = cfg.two_stage and round_index < cfg.stage.stage1_rounds
    down_bytes = state.model.wire_bytes()

    updates = []
    for cid in participants:
        cid = int(cid)
        X, y = state.client_features[cid], state.client_labels[cid]
        local_rng = derive_rng(state.seed, _TAG_LOCAL, round_index, cid)
        opt_state = state.opt_states.get(cid) if cfg.persist_optimizer_state else None
        kwargs = dict(client_id=cid, opt_state=opt_state)
        if cfg.head_kind == "softmax" or not cfg.two_stage:
            update = local_train_plain(state.model, X, y, cfg.stage, cfg.optimizer,
                                       local_rng, **kwargs)
        elif stage1:
            update = local_train_stage1(state.model, X, y, cfg.stage, cfg.optimizer,
                                        local_rng, **kwargs)
        else:
            anchor_rng = derive_rng(state.seed, _TAG_ANCHOR, round_index, cid)
            update = local_train_stage2(state.model, X, y, cfg.stage, cfg.optimizer,
                                        local_rng, anchor_rng, **kwargs)
        if cfg.persist_optimizer_state and update.opt_state is not None:
            state.opt_states[cid] = update.opt_state
        updates.append(update)

    t0 = time.perf_counter()
    new_model = fedavg(updates, state.model)
    server_seconds = time.perf_counter() - t0
    state.model = new_model

    if state.eval_features is not None:
        acc = accuracy(new_model, state.eval_features, state.eval_labels)
    else:
        acc = float("nan")
    drift = None
    if cfg.record_drift:
        sets = [(state.client_features[i], state.client_labels[i]) for i in range(cfg.num_clients)]
        drift = drift_report(
            new_model,
            sets,
            np.concatenate([s[0] for s in sets if s[0].shape[0]]),
            np.concatenate([s[1] for s in sets if s[1].shape[0]]),
        )
    record = RoundRecord(
        round_index=round_index + 1,
        accuracy=acc,
        participants=m,
        up_bytes_per_client=new_model.wire_bytes(),
        down_bytes_per_client=down_bytes,
        client_seconds_mean=float(np.mean([u.train_seconds for u in updates])),
        server_seconds=server_seconds,
        drift=drift,
    )
    return state, record


def _prepare_state(config: RunConfig, dataset: FeatureDataset, seed: int,
                   eval_set: FeatureDataset | None) -> SimState:
    part = config.partition.build(dataset, config.num_clients, seed)
    labels = dataset.labels
    if config.noise.kind != "none" and config.noise.ratio > 0:
        noise_seed = int(derive_rng(seed, _TAG_NOISE).integers(2**63))
        spec = NoiseSpec(config.noise.kind, config.noise.ratio, noise_seed)
        labels, _ = inject_noise(labels, dataset.num_classes, spec)
    feats = dataset.features.astype(np.float64)
    client_X = [feats[idx] for idx in part.assignments]
    client_y = [labels[idx] for idx in part.assignments]
    return SimState(
        config=config,
        seed=seed,
        model=_init_head(config, dataset.num_classes, dataset.dim, seed),
        client_features=client_X,
        client_labels=client_y,
        eval_features=eval_set.features.astype(np.float64) if eval_set is not None else None,
        eval_labels=eval_set.labels if eval_set is not None else None,
    )


def run_experiment(config: RunConfig, dataset: FeatureDataset,
                   eval_set: FeatureDataset | None) -> dict[int, list[RoundRecord]]:
    """Run the configured arm once per seed: partition, corrupt labels,
    train for `rounds` rounds.  Deterministic in (config, dataset, seed)."""
    results: dict[int, list[RoundRecord]] = {}
    for seed in config.seeds:
        state = _prepare_state(config, dataset, seed, eval_set)
        records = []
        for t in range(config.rounds):
            state, record = run_round(state, t, derive_rng(seed, _TAG_SAMPLING, t))
            records.append(record)
        results[seed] = records
    return results


def train_federated(config: RunConfig, dataset: FeatureDataset, seed: int) -> HeadModel:
    """Train one arm for one seed and return the final global head."""
    state = _prepare_state(config, dataset, seed, None)
    for t in range(config.rounds):
        state, _ = run_round(state, t, derive_rng(seed, _TAG_SAMPLING, t))
    return state.model
