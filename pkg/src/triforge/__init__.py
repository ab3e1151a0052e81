"""Controlled triplet and adversarial training for face-forgery detection.

The package builds identity- and time-aligned triplets from a dataset
manifest, trains a shared embedding with a detached binary detection head
and a gradient-reversed forgery-family discriminator, and evaluates the
result with threshold-free ranking metrics.  A deterministic synthetic
dataset generator makes the whole pipeline runnable on a laptop.
"""

from .exceptions import (
    CheckpointError,
    ConfigError,
    EvaluationError,
    ManifestError,
    ModelError,
    TrainingError,
    TriforgeError,
    TripletFormationError,
)
from .records import (
    FAKE,
    FFPP_CATEGORIES,
    REAL,
    Manifest,
    SampleRecord,
    Triplet,
    build_triplet_set,
    expected_triplet_count,
    form_triplets,
    halve,
    load_manifest,
    save_manifest,
)
from .synth import (
    GeneratorConfig,
    ImageStore,
    artifact_mask,
    in_memory_manifest,
    make_synthetic_dataset,
    render_fake_frame,
    render_real_frame,
)
from .ops import GrlConfig, detach, detach_backward, grl_apply, grl_backward
from .network import (
    BackboneConfig,
    ForgeryNet,
    ModelConfig,
    ParameterInfo,
    apply_bitfit_mask,
    parameter_counts,
)
from .losses import (
    EPS,
    LossBreakdown,
    bce_logit_grad,
    bce_loss,
    bce_loss_grad,
    ce_logit_grad,
    forgery_ce_grad,
    forgery_ce_loss,
    total_loss,
    triplet_loss,
    triplet_loss_grad,
)
from .training import (
    TrainConfig,
    TrainResult,
    TrainState,
    epoch_order,
    init_train_state,
    load_checkpoint,
    read_loss_log,
    save_checkpoint,
    train,
    train_step,
)
from .metrics import (
    EvalReport,
    EvalRow,
    RocCurve,
    auc_pairwise_oracle,
    auc_trapezoid,
    evaluate,
    log_loss,
    read_report,
    roc_curve,
    tsne_export,
    write_report,
)
from .config import PRESETS, RunConfig, build_train_config, load_run_config

__version__ = "0.1.0"

__all__ = [
    "BackboneConfig",
    "CheckpointError",
    "ConfigError",
    "EPS",
    "EvalReport",
    "EvalRow",
    "EvaluationError",
    "FAKE",
    "FFPP_CATEGORIES",
    "ForgeryNet",
    "GeneratorConfig",
    "GrlConfig",
    "ImageStore",
    "LossBreakdown",
    "Manifest",
    "ManifestError",
    "ModelConfig",
    "ModelError",
    "PRESETS",
    "ParameterInfo",
    "REAL",
    "RocCurve",
    "RunConfig",
    "SampleRecord",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "TrainingError",
    "TriforgeError",
    "Triplet",
    "TripletFormationError",
    "apply_bitfit_mask",
    "artifact_mask",
    "auc_pairwise_oracle",
    "auc_trapezoid",
    "bce_logit_grad",
    "bce_loss",
    "bce_loss_grad",
    "build_train_config",
    "build_triplet_set",
    "ce_logit_grad",
    "detach",
    "detach_backward",
    "epoch_order",
    "evaluate",
    "expected_triplet_count",
    "forgery_ce_grad",
    "forgery_ce_loss",
    "form_triplets",
    "grl_apply",
    "grl_backward",
    "halve",
    "init_train_state",
    "in_memory_manifest",
    "load_checkpoint",
    "load_manifest",
    "load_run_config",
    "log_loss",
    "make_synthetic_dataset",
    "parameter_counts",
    "read_loss_log",
    "read_report",
    "render_fake_frame",
    "render_real_frame",
    "roc_curve",
    "save_checkpoint",
    "save_manifest",
    "total_loss",
    "train",
    "train_step",
    "triplet_loss",
    "triplet_loss_grad",
    "tsne_export",
    "write_report",
]
