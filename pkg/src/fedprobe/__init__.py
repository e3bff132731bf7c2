"""Deterministic federated linear-probing simulator with one-vs-all heads."""

from .estimator import FederatedProbeClassifier
from .features import (
    FeatureDataset,
    SyntheticSpec,
    generate_synthetic,
    l2_normalized,
    load_features,
    save_features,
)
from .heads import (
    HeadModel,
    ova_grad,
    ova_probs,
    predict,
    softmax_grad,
    softmax_probs,
)
from .metrics import (
    DriftReport,
    GeometryReport,
    RoundRecord,
    acc_at_95,
    accuracy,
    cost_accounting,
    decline_rate,
    drift_report,
    geometry,
    relative_ratio,
)
from .noise import NoiseSpec, inject_noise
from .optim import AdamWConfig, AdamWState, adamw_step
from .partition import (
    Partition,
    PartitionStats,
    partition_dirichlet_bernoulli,
    partition_feature_cluster,
    partition_iid,
    partition_shard,
    partition_stats,
    partition_zipf,
)
from .simulation import (
    ClientUpdate,
    NoiseConfig,
    PartitionConfig,
    RunConfig,
    StageConfig,
    fedavg,
    local_train_plain,
    local_train_stage1,
    local_train_stage2,
    run_experiment,
    run_round,
    train_federated,
)

__version__ = "0.1.0"
