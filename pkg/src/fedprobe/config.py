"""Declarative experiment configs and run manifests.

One TOML file describes a whole grid: a data source (feature files or a
synthetic recipe), the shared run parameters, and the method x partition
(x noise) arms to sweep.  Validation reports every violation at once, and a
resolved config hashes stably so manifests can certify what produced a set
of outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .features import FeatureDataset, SyntheticSpec
from .optim import AdamWConfig
from .simulation import (
    DEFAULT_SEEDS,
    METHODS,
    SCHEMES,
    NoiseConfig,
    PartitionConfig,
    RunConfig,
    StageConfig,
)

__all__ = [
    "ConfigError",
    "normalize_scheme",
    "DataConfig",
    "ExperimentConfig",
    "validate_config",
    "load_config",
    "config_hash",
    "dataset_fingerprint",
    "build_manifest",
]

TOOL_VERSION = "0.1.0"

_SCHEME_ALIASES = {
    "shard1": "shard-1",
    "shard_1": "shard-1",
    "shard2": "shard-2",
    "shard_2": "shard-2",
}


def normalize_scheme(name: str) -> str:
    """Map spelling variants (shard1, shard_2, ...) to canonical scheme tags."""
    return _SCHEME_ALIASES.get(name, name)


class ConfigError(Exception):
    """Carries every validation failure found in a config document."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class DataConfig:
    train_path: str | None = None
    eval_path: str | None = None
    synthetic: SyntheticSpec | None = None
    eval_per_class: int = 50
    normalize: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    """A resolved experiment grid: data plus arm matrices."""

    data: DataConfig
    run: RunConfig                      # template; method/partition filled per arm
    methods: tuple[str, ...]
    schemes: tuple[str, ...]            # non-IID arms; the IID reference always runs

    def arm_config(self, method: str, scheme: str) -> RunConfig:
        part = PartitionConfig(
            scheme=scheme,
            shard_k=self.run.partition.shard_k,
            dirichlet_p=self.run.partition.dirichlet_p,
            dirichlet_alpha=self.run.partition.dirichlet_alpha,
            zipf_s=self.run.partition.zipf_s,
        )
        return RunConfig(
            rounds=self.run.rounds,
            num_clients=self.run.num_clients,
            participation=self.run.participation,
            seeds=self.run.seeds,
            method=method,
            with_bias=self.run.with_bias,
            init_std=self.run.init_std,
            stage=self.run.stage,
            optimizer=self.run.optimizer,
            partition=part,
            noise=self.run.noise,
            persist_optimizer_state=self.run.persist_optimizer_state,
            record_drift=self.run.record_drift,
        )


def _get(table: dict, key: str, default, expected, errors: list[str], where: str):
    value = table.get(key, default)
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, expected) or isinstance(value, bool) != (expected is bool):
        errors.append(f"{where}.{key}: expected {getattr(expected, '__name__', expected)}, "
                      f"got {value!r}")
        return default
    return value


def validate_config(text: str) -> ExperimentConfig:
    """Parse and fully default a config document.

    Raises ConfigError listing all violations rather than stopping at the
    first one.
    """
    errors: list[str] = []
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"not valid TOML: {exc}"]) from exc

    data_tbl = doc.get("data", {})
    run_tbl = doc.get("run", {})
    opt_tbl = doc.get("optimizer", {})
    stage_tbl = doc.get("two_stage", {})
    part_tbl = doc.get("partitions", {})
    noise_tbl = doc.get("noise", {})
    known = {"data", "run", "optimizer", "two_stage", "partitions", "noise"}
    for key in doc:
        if key not in known:
            errors.append(f"unknown section [{key}]")

    train_path = data_tbl.get("train")
    eval_path = data_tbl.get("eval")
    synth_tbl = data_tbl.get("synthetic")
    synthetic = None
    eval_per_class = 50
    if synth_tbl is not None:
        try:
            synthetic = SyntheticSpec(
                num_classes=int(synth_tbl.get("classes", 10)),
                dim=int(synth_tbl.get("dim", 64)),
                samples_per_class=int(synth_tbl.get("train_per_class", 100)),
                centroid_separation=float(synth_tbl.get("separation", 6.0)),
                within_class_std=float(synth_tbl.get("std", 1.0)),
                seed=int(synth_tbl.get("seed", 7)),
            )
            eval_per_class = int(synth_tbl.get("eval_per_class", 50))
            if eval_per_class < 1:
                errors.append("data.synthetic.eval_per_class must be >= 1")
        except (ValueError, TypeError) as exc:
            errors.append(f"data.synthetic: {exc}")
    if synthetic is None and train_path is None:
        errors.append("data: provide either data.train (a feature file) or [data.synthetic]")
    if synthetic is None and train_path is not None and eval_path is None:
        errors.append("data: data.eval is required when training from a feature file")
    if synthetic is not None and train_path is not None:
        errors.append("data: data.train and [data.synthetic] are mutually exclusive")
    normalize = _get(data_tbl, "normalize", False, bool, errors, "data")

    rounds = _get(run_tbl, "rounds", 50, int, errors, "run")
    clients = _get(run_tbl, "clients", 100, int, errors, "run")
    participation = _get(run_tbl, "participation", 1.0, float, errors, "run")
    seeds = run_tbl.get("seeds", list(DEFAULT_SEEDS))
    if not isinstance(seeds, list) or not seeds or not all(
        isinstance(s, int) and not isinstance(s, bool) for s in seeds
    ):
        errors.append("run.seeds: expected a non-empty list of integers")
        seeds = list(DEFAULT_SEEDS)
    if len(set(seeds)) != len(seeds):
        errors.append("run.seeds: seeds must be distinct")
    local_epochs = _get(run_tbl, "local_epochs", 3, int, errors, "run")
    batch_size = _get(run_tbl, "batch_size", 50, int, errors, "run")
    with_bias = _get(run_tbl, "bias", True, bool, errors, "run")
    init_std = _get(run_tbl, "init_std", 0.0, float, errors, "run")
    persist_opt = _get(run_tbl, "persist_optimizer_state", False, bool, errors, "run")
    record_drift = _get(run_tbl, "record_drift", False, bool, errors, "run")
    methods = run_tbl.get("methods", list(METHODS))
    if not isinstance(methods, list) or not methods:
        errors.append("run.methods: expected a non-empty list")
        methods = list(METHODS)
    for m in methods:
        if m not in METHODS:
            errors.append(f"run.methods: unknown method {m!r}; choose from {sorted(METHODS)}")
    if len(set(methods)) != len(methods):
        errors.append("run.methods: methods must be distinct")

    lr = _get(opt_tbl, "lr", 0.01, float, errors, "optimizer")
    weight_decay = _get(opt_tbl, "weight_decay", 1e-4, float, errors, "optimizer")
    beta1 = _get(opt_tbl, "beta1", 0.9, float, errors, "optimizer")
    beta2 = _get(opt_tbl, "beta2", 0.999, float, errors, "optimizer")
    eps = _get(opt_tbl, "eps", 1e-8, float, errors, "optimizer")

    stage1_rounds = _get(stage_tbl, "stage1_rounds", 1, int, errors, "two_stage")
    anchor_fraction = _get(stage_tbl, "anchor_fraction", 0.1, float, errors, "two_stage")
    resample = _get(stage_tbl, "resample_anchors_per_epoch", False, bool, errors, "two_stage")

    raw_schemes = part_tbl.get("schemes", ["shard-1"])
    if not isinstance(raw_schemes, list) or not raw_schemes:
        errors.append("partitions.schemes: expected a non-empty list")
        raw_schemes = ["shard-1"]
    schemes = []
    for s in raw_schemes:
        s = normalize_scheme(s)
        if s not in SCHEMES:
            errors.append(
                f"partitions.schemes: unknown scheme {s!r}; choose from {sorted(SCHEMES)}"
            )
        elif s in schemes:
            errors.append(f"partitions.schemes: duplicate scheme {s!r}")
        else:
            schemes.append(s)
    shard_k = _get(part_tbl, "shard_k", 1, int, errors, "partitions")
    dirichlet_p = _get(part_tbl, "dirichlet_p", 0.1, float, errors, "partitions")
    dirichlet_alpha = _get(part_tbl, "dirichlet_alpha", 0.001, float, errors, "partitions")
    zipf_s = _get(part_tbl, "zipf_s", 2.0, float, errors, "partitions")

    noise_kind = _get(noise_tbl, "kind", "none", str, errors, "noise")
    noise_ratio = _get(noise_tbl, "ratio", 0.0, float, errors, "noise")

    # range checks up front so every violation is reported in one pass,
    # not just the first one a dataclass constructor happens to hit
    range_checks = [
        (rounds >= 1, "run.rounds must be >= 1"),
        (clients >= 1, "run.clients must be >= 1"),
        (0.0 < participation <= 1.0, "run.participation must be in (0, 1]"),
        (local_epochs >= 0, "run.local_epochs must be >= 0"),
        (batch_size >= 1, "run.batch_size must be >= 1"),
        (init_std >= 0, "run.init_std must be >= 0"),
        (lr > 0, "optimizer.lr must be > 0"),
        (weight_decay >= 0, "optimizer.weight_decay must be >= 0"),
        (0 <= beta1 < 1 and 0 <= beta2 < 1, "optimizer betas must lie in [0, 1)"),
        (eps > 0, "optimizer.eps must be > 0"),
        (stage1_rounds >= 0, "two_stage.stage1_rounds must be >= 0"),
        (0.0 <= anchor_fraction <= 1.0, "two_stage.anchor_fraction must be in [0, 1]"),
        (shard_k >= 1, "partitions.shard_k must be >= 1"),
        (dirichlet_alpha > 0, "partitions.dirichlet_alpha must be > 0"),
        (0 < dirichlet_p <= 1, "partitions.dirichlet_p must be in (0, 1]"),
        (zipf_s > 0, "partitions.zipf_s must be > 0"),
        (0.0 <= noise_ratio <= 1.0, "noise.ratio must be in [0, 1]"),
        (noise_kind in ("none", "symmetric", "asymmetric"),
         f"noise: unknown noise kind {noise_kind!r}"),
    ]
    for ok, message in range_checks:
        if not ok:
            errors.append(message)
    if errors:
        raise ConfigError(errors)

    def build(cls, name, /, **kwargs):
        try:
            return cls(**kwargs)
        except ValueError as exc:
            errors.append(f"{name}: {exc}")
            return None

    optimizer = build(AdamWConfig, "optimizer", lr=lr, weight_decay=weight_decay,
                      beta1=beta1, beta2=beta2, eps=eps)
    stage = build(StageConfig, "two_stage", stage1_rounds=stage1_rounds,
                  anchor_fraction=anchor_fraction, local_epochs=local_epochs,
                  batch_size=batch_size, resample_anchors_per_epoch=resample)
    noise_cfg = build(NoiseConfig, "noise", kind=noise_kind, ratio=noise_ratio)
    partition = build(PartitionConfig, "partitions",
                      scheme=schemes[0] if schemes else "iid", shard_k=shard_k,
                      dirichlet_p=dirichlet_p, dirichlet_alpha=dirichlet_alpha, zipf_s=zipf_s)
    run = None
    if not errors:
        run = build(RunConfig, "run", rounds=rounds, num_clients=clients,
                    participation=participation, seeds=tuple(seeds), method=methods[0],
                    with_bias=with_bias, init_std=init_std, stage=stage,
                    optimizer=optimizer, partition=partition, noise=noise_cfg,
                    persist_optimizer_state=persist_opt, record_drift=record_drift)
    if errors or run is None:
        raise ConfigError(errors or ["config could not be resolved"])
    return ExperimentConfig(
        data=DataConfig(train_path, eval_path, synthetic, eval_per_class, normalize),
        run=run,
        methods=tuple(methods),
        schemes=tuple(schemes),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_config(fh.read())


def _canonical(config: ExperimentConfig) -> dict:
    return {
        "data": asdict(config.data),
        "run": asdict(config.run),
        "methods": list(config.methods),
        "schemes": list(config.schemes),
        "format": 1,
    }


def config_hash(config: ExperimentConfig) -> str:
    """Stable digest of every semantically meaningful field."""
    blob = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def dataset_fingerprint(dataset: FeatureDataset) -> str:
    h = hashlib.sha256()
    h.update(f"{dataset.n_samples}|{dataset.dim}|{dataset.num_classes}".encode())
    h.update(np.ascontiguousarray(dataset.features, dtype="<f4").tobytes())
    h.update(np.ascontiguousarray(dataset.labels, dtype="<u4").tobytes())
    return h.hexdigest()


def build_manifest(config: ExperimentConfig, train: FeatureDataset,
                   eval_set: FeatureDataset, output_files: list[str]) -> dict:
    return {
        "tool_version": TOOL_VERSION,
        "config_hash": config_hash(config),
        "seeds": list(config.run.seeds),
        "train_fingerprint": dataset_fingerprint(train),
        "eval_fingerprint": dataset_fingerprint(eval_set),
        "outputs": sorted(output_files),
    }

