"""Command-line experiment runner.

Subcommands:
  run              execute a configured method x partition grid over seeds,
                   writing per-round CSVs, timing sidecars, and a manifest
  synth            generate a synthetic Gaussian-cluster feature file
  geometry         feature-geometry report for a feature file
  drift            gradient-drift diagnostics for a partitioned feature file
  partition-stats  per-client sample/class summary, optional JSON manifest

Round CSVs contain only deterministic columns (accuracy, relative ratio,
byte counts); wall-clock measurements go to a separate timing sidecar so
that reruns of the same config produce byte-identical CSV outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    build_manifest,
    load_config,
    normalize_scheme,
)
from .features import (
    FeatureDataset,
    FeatureFileError,
    SyntheticSpec,
    generate_synthetic,
    l2_normalized,
    load_features,
    save_features,
)
from .heads import HeadModel
from .metrics import accuracy, geometry, drift_report, relative_ratio
from .partition import partition_stats, partition_to_manifest
from .simulation import PartitionConfig, RunConfig, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

ROUNDS_HEADER = ["run_id", "seed", "t", "acc", "rel_ratio_pct", "up_bytes", "down_bytes"]


def _atomic_write(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _load_datasets(cfg: ExperimentConfig) -> tuple[FeatureDataset, FeatureDataset]:
    if cfg.data.synthetic is not None:
        spec = cfg.data.synthetic
        train = generate_synthetic(spec)
        eval_spec = SyntheticSpec(
            spec.num_classes, spec.dim, cfg.data.eval_per_class,
            spec.centroid_separation, spec.within_class_std,
            seed=spec.seed, split=1,
        )
        eval_set = generate_synthetic(eval_spec)
    else:
        train = load_features(cfg.data.train_path)
        eval_set = load_features(cfg.data.eval_path)
        if train.dim != eval_set.dim or train.num_classes != eval_set.num_classes:
            raise FeatureFileError(
                "train and eval feature files disagree on dimension or class count"
            )
    if cfg.data.normalize:
        train, eval_set = l2_normalized(train), l2_normalized(eval_set)
    return train, eval_set


def _run_arm(args: tuple) -> tuple[str, str, dict[int, list[float]], dict]:
    """Worker: run one (method, scheme) arm over all seeds.

    Returns accuracy curves per seed plus everything needed to write the
    output files afterwards, in deterministic order.
    """
    cfg, train, eval_set, method, scheme = args
    arm = cfg.arm_config(method, scheme)
    results = run_experiment(arm, train, eval_set)
    curves = {seed: [r.accuracy for r in recs] for seed, recs in results.items()}
    extras = {
        seed: {
            "participants": [r.participants for r in recs],
            "up_bytes": [r.up_bytes_total for r in recs],
            "down_bytes": [r.down_bytes_total for r in recs],
            "client_seconds_mean": [r.client_seconds_mean for r in recs],
            "server_seconds": [r.server_seconds for r in recs],
        }
        for seed, recs in results.items()
    }
    return method, scheme, curves, extras


def _rounds_csv(run_id: str, seed: int, curve: list[float], ratios: list[float],
                extras: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROUNDS_HEADER)
    for t, acc in enumerate(curve):
        writer.writerow([
            run_id, seed, t + 1, repr(float(acc)), repr(float(ratios[t])),
            extras["up_bytes"][t], extras["down_bytes"][t],
        ])
    return buf.getvalue()


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print("invalid config:", file=sys.stderr)
        for err in exc.errors:
            print(f"  - {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seeds:
        run = cfg.run
        cfg = ExperimentConfig(
            data=cfg.data,
            run=RunConfig(**{**_run_kwargs(run), "seeds": tuple(args.seeds)}),
            methods=cfg.methods,
            schemes=cfg.schemes,
        )
    try:
        train, eval_set = _load_datasets(cfg)
    except (FeatureFileError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    os.makedirs(args.out_dir, exist_ok=True)
    tasks = [
        (cfg, train, eval_set, method, scheme)
        for method in cfg.methods
        for scheme in ["iid", *cfg.schemes]
    ]
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                outcomes = list(pool.map(_run_arm, tasks))
        else:
            outcomes = [_run_arm(t) for t in tasks]
    except (ValueError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    by_arm = {(m, s): (curves, extras) for m, s, curves, extras in outcomes}
    written: list[str] = []
    for method in cfg.methods:
        iid_curves, _ = by_arm[(method, "iid")]
        for scheme in ["iid", *cfg.schemes]:
            curves, extras = by_arm[(method, scheme)]
            run_id = f"{method}__{scheme}"
            for seed in cfg.run.seeds:
                ratios = relative_ratio(curves[seed], iid_curves[seed])
                name = f"rounds__{run_id}__seed{seed}.csv"
                _atomic_write(
                    os.path.join(args.out_dir, name),
                    _rounds_csv(run_id, seed, curves[seed], list(ratios), extras[seed]),
                )
                written.append(name)
                timing = {
                    "run_id": run_id,
                    "seed": seed,
                    "client_seconds_mean": extras[seed]["client_seconds_mean"],
                    "server_seconds": extras[seed]["server_seconds"],
                }
                _atomic_write(
                    os.path.join(args.out_dir, f"timings__{run_id}__seed{seed}.json"),
                    json.dumps(timing, indent=2) + "\n",
                )
    manifest = build_manifest(cfg, train, eval_set, written)
    _atomic_write(
        os.path.join(args.out_dir, "manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    print(f"wrote {len(written)} round files and manifest.json to {args.out_dir}")
    return EXIT_OK


def _run_kwargs(run: RunConfig) -> dict:
    return {
        "rounds": run.rounds, "num_clients": run.num_clients,
        "participation": run.participation, "seeds": run.seeds, "method": run.method,
        "with_bias": run.with_bias, "init_std": run.init_std, "stage": run.stage,
        "optimizer": run.optimizer, "partition": run.partition, "noise": run.noise,
        "persist_optimizer_state": run.persist_optimizer_state,
        "record_drift": run.record_drift,
    }


def _cmd_synth(args) -> int:
    meta = {}
    for item in args.meta or []:
        if "=" not in item:
            print(f"error: --meta needs key=value, got {item!r}", file=sys.stderr)
            return EXIT_CONFIG
        key, value = item.split("=", 1)
        meta[key] = value
    try:
        spec = SyntheticSpec(args.classes, args.dim, args.per_class,
                             args.separation, args.std, args.seed)
    except ValueError as exc:
        print(f"invalid synthetic spec: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    dataset = generate_synthetic(spec)
    if meta:
        dataset = FeatureDataset(dataset.features, dataset.labels,
                                 dataset.num_classes, {**dataset.meta, **meta})
    save_features(dataset, args.out)
    print(f"wrote {dataset.n_samples} x {dataset.dim} features to {args.out}")
    return EXIT_OK


def _cmd_geometry(args) -> int:
    try:
        dataset = load_features(args.features)
    except (FeatureFileError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        report = geometry(dataset.features, dataset.labels)
    except ValueError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    lines = "alignment,intra,inter,ratio\n" + ",".join(
        repr(v) for v in (report.alignment, report.intra, report.inter, report.ratio)
    ) + "\n"
    if args.out:
        _atomic_write(args.out, lines)
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def _partition_from_args(args, dataset: FeatureDataset):
    part_cfg = PartitionConfig(
        scheme=normalize_scheme(args.scheme),
        shard_k=args.shard_k, dirichlet_p=args.dirichlet_p,
        dirichlet_alpha=args.dirichlet_alpha, zipf_s=args.zipf_s,
    )
    return part_cfg.build(dataset, args.clients, args.seed)


def _cmd_drift(args) -> int:
    try:
        dataset = load_features(args.features)
    except (FeatureFileError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    part = _partition_from_args(args, dataset)
    model = HeadModel.zeros(dataset.num_classes, dataset.dim, args.head)
    feats = dataset.features.astype(np.float64)
    sets = [(feats[idx], dataset.labels[idx]) for idx in part.assignments]
    report = drift_report(model, sets, feats, dataset.labels)
    doc = {
        "scheme": part.scheme,
        "head": args.head,
        "local_bias_norms": [float(v) for v in report.local_bias_norms],
        "local_bias_mean": float(np.mean(report.local_bias_norms)),
        "global_bias_norm": report.global_bias_norm,
        "variance": report.variance,
        "skipped_clients": list(report.skipped_clients),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_partition_stats(args) -> int:
    try:
        dataset = load_features(args.features)
    except (FeatureFileError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    part = _partition_from_args(args, dataset)
    stats = partition_stats(part, dataset)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["client", "samples", "effective_classes"])
    for i in range(part.num_clients):
        writer.writerow([i, int(stats.counts[i]), int(stats.effective_classes[i])])
    sys.stdout.write(buf.getvalue())
    if args.export:
        _atomic_write(args.export, json.dumps(partition_to_manifest(part), indent=2) + "\n")
    return EXIT_OK


def _add_partition_args(parser) -> None:
    parser.add_argument("--scheme", required=True,
                        help="iid | shard-1 | shard-2 | dirichlet | zipf | cluster")
    parser.add_argument("--clients", type=int, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--shard-k", type=int, default=1)
    parser.add_argument("--dirichlet-p", type=float, default=0.1)
    parser.add_argument("--dirichlet-alpha", type=float, default=0.001)
    parser.add_argument("--zipf-s", type=float, default=2.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedprobe",
        description="Deterministic federated linear-probing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment grid")
    p_run.add_argument("--config", required=True, help="TOML experiment config")
    p_run.add_argument("--out-dir", required=True)
    p_run.add_argument("--seeds", type=int, nargs="*", help="override config seeds")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel arm workers")
    p_run.set_defaults(func=_cmd_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic feature file")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--classes", type=int, default=10)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--per-class", type=int, default=100)
    p_synth.add_argument("--separation", type=float, default=6.0)
    p_synth.add_argument("--std", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--meta", nargs="*", help="extra key=value meta entries")
    p_synth.set_defaults(func=_cmd_synth)

    p_geom = sub.add_parser("geometry", help="feature-geometry report")
    p_geom.add_argument("--features", required=True)
    p_geom.add_argument("--out")
    p_geom.set_defaults(func=_cmd_geometry)

    p_drift = sub.add_parser("drift", help="gradient-drift diagnostics")
    p_drift.add_argument("--features", required=True)
    p_drift.add_argument("--head", choices=["softmax", "ova"], default="softmax")
    p_drift.add_argument("--out")
    _add_partition_args(p_drift)
    p_drift.set_defaults(func=_cmd_drift)

    p_stats = sub.add_parser("partition-stats", help="per-client partition summary")
    p_stats.add_argument("--features", required=True)
    p_stats.add_argument("--export", help="write the client->indices JSON manifest here")
    _add_partition_args(p_stats)
    p_stats.set_defaults(func=_cmd_partition_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
