"""Gradient routing, the optimization loop, and training-state persistence.

A training step embeds all three triplet elements with the shared backbone,
then routes three loss signals back through it:

* the triplet term pulls same-authenticity frames together (weight ``alpha``),
* the detection head trains on binary cross-entropy but, when detached, sends
  no gradient into the backbone,
* the forgery-family head trains on cross-entropy scaled by ``beta`` while the
  reversal layer flips the sign of what reaches the backbone (scale
  ``grl_lambda``).

Zero-weighted terms are skipped rather than multiplied by zero so that, for
example, a run with ``beta = 0`` is bitwise identical to one with the
discriminator absent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import losses, ops
from .checkpoint import read_container, write_container
from .exceptions import CheckpointError, ConfigError, TrainingError
from .network import (
    FINETUNE_MODES,
    BackboneConfig,
    ForgeryNet,
    ModelConfig,
    ParameterInfo,
    apply_bitfit_mask,
)
from .records import REAL, Manifest, build_triplet_set
from .synth import ImageStore

LOSS_LOG_FIELDS = ("epoch", "step", "bce", "triplet", "forgery", "total")

# Per-mode defaults; everything else shares the class defaults below.
MODE_DEFAULTS = {
    "full": {"learning_rate": 1e-4, "batch_size": 4, "beta": 1.0, "epochs": 30},
    "bitfit": {"learning_rate": 2e-5, "batch_size": 8, "beta": 0.5, "epochs": 7},
}


@dataclass(frozen=True)
class TrainConfig:
    finetune_mode: str = "full"
    learning_rate: float = 1e-4
    batch_size: int = 4
    epochs: int = 30
    margin: float = 1.0
    margin_sign: int = 1
    grl_lambda: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    detach_head: bool = True
    reverse_gradient: bool = True
    optimizer: str = "adam"
    seed: int = 0
    # Empty means "every fake category present in the manifest".
    included_categories: tuple = ()
    checkpoint_every: int = 1  # epochs between snapshots; 0 keeps only the final one
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # Model shape.
    backbone_kind: str = "toy_cnn"
    image_size: int = 32
    in_channels: int = 3
    channels: tuple = (8, 16, 32)
    embed_dim: int = 128
    disc_hidden: int = 64
    normalize_embeddings: bool = False

    def __post_init__(self):
        if self.finetune_mode not in FINETUNE_MODES:
            raise ConfigError(
                f"unknown finetune mode {self.finetune_mode!r}; choose from {FINETUNE_MODES}"
            )
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.margin < 0:
            raise ConfigError(f"margin must be non-negative, got {self.margin}")
        if self.margin_sign not in (1, -1):
            raise ConfigError(f"margin_sign must be +1 or -1, got {self.margin_sign}")
        for name in ("grl_lambda", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.checkpoint_every < 0:
            raise ConfigError(f"checkpoint_every must be non-negative, got {self.checkpoint_every}")
        if self.optimizer != "adam":
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; only 'adam' is implemented")
        object.__setattr__(self, "included_categories", tuple(self.included_categories))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))

    @classmethod
    def for_mode(cls, mode: str, **overrides) -> "TrainConfig":
        """A config carrying the published per-mode defaults, then overrides."""
        if mode not in MODE_DEFAULTS:
            raise ConfigError(f"unknown finetune mode {mode!r}; choose from {FINETUNE_MODES}")
        merged = dict(MODE_DEFAULTS[mode])
        merged.update(overrides)
        return cls(finetune_mode=mode, **merged)

    def model_config(self, categories) -> ModelConfig:
        backbone = BackboneConfig(
            kind=self.backbone_kind,
            image_size=self.image_size,
            in_channels=self.in_channels,
            channels=self.channels,
            embed_dim=self.embed_dim,
            normalize=self.normalize_embeddings,
        )
        return ModelConfig(backbone=backbone, categories=tuple(categories), disc_hidden=self.disc_hidden)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["included_categories"] = list(self.included_categories)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AdamState:
    """First and second moment accumulators for the trainable parameters."""

    m: dict
    v: dict
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: ForgeryNet, beta1: float, beta2: float, eps: float) -> "AdamState":
        m = {i.name: np.zeros(i.shape) for i in net.infos if i.trainable}
        v = {i.name: np.zeros(i.shape) for i in net.infos if i.trainable}
        return cls(m=m, v=v, step_count=0, beta1=beta1, beta2=beta2, eps=eps)


@dataclass
class TrainState:
    net: ForgeryNet
    adam: AdamState
    epoch: int = 0  # completed epochs
    step: int = 0  # global optimizer steps
    seed: int = 0
    train_config: dict | None = None


@dataclass
class TrainResult:
    state: TrainState
    log: list
    out_dir: Path
    checkpoint_path: Path
    loss_log_path: Path
    triplet_count: int


def init_train_state(cfg: TrainConfig, categories) -> TrainState:
    """Fresh model, fine-tune mask, and zeroed optimizer moments."""
    net = ForgeryNet.build(cfg.model_config(categories), seed=cfg.seed)
    net.infos = apply_bitfit_mask(net.infos, cfg.finetune_mode)
    adam = AdamState.for_net(net, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return TrainState(net=net, adam=adam, seed=cfg.seed, train_config=cfg.to_dict())


def _assemble_batch(batch, net: ForgeryNet, store: ImageStore):
    """Stack a triplet batch into (images, labels, category targets).

    The layout is all anchors, then all positives, then all negatives, so a
    slice of size ``len(batch)`` recovers each role.
    """
    if not batch:
        raise TrainingError("train_step: empty batch")
    records = [t.anchor for t in batch] + [t.positive for t in batch] + [t.negative for t in batch]
    images = store.batch(records)
    labels = np.array([float(r.label) for r in records])
    cat_index = {c: i for i, c in enumerate(net.config.categories)}
    try:
        targets = np.array([cat_index[r.forgery_category] for r in records])
    except KeyError as exc:
        raise TrainingError(
            f"batch contains category {exc.args[0]!r} unknown to the model "
            f"(model categories: {net.config.categories})"
        ) from exc
    return images, labels, targets


def _loss_terms_and_grads(net: ForgeryNet, images, labels, targets, n_triplets: int,
                          cfg: TrainConfig):
    """Forward pass, loss terms, and parameter gradients for one batch."""
    e, e_cache = net.embed_with_cache(images)
    b = n_triplets
    e_a, e_p, e_n = e[:b], e[b:2 * b], e[2 * b:]

    triplet_val = losses.triplet_loss(e_a, e_p, e_n, cfg.margin, cfg.margin_sign)

    det_in = ops.detach(e) if cfg.detach_head else e
    det_probs, det_cache = net.detect_with_cache(det_in)
    bce_val = losses.bce_loss(det_probs, labels)

    grl = ops.GrlConfig(lambda_=cfg.grl_lambda)
    disc_in = ops.grl_apply(e, grl)
    disc_probs, disc_cache = net.discriminate_with_cache(disc_in)
    forgery_val = losses.forgery_ce_loss(disc_probs, targets)

    for name, value in (("bce", bce_val), ("triplet", triplet_val), ("forgery", forgery_val)):
        if not np.isfinite(value):
            raise TrainingError(f"non-finite {name} loss; training cannot continue")

    grads: dict = {}
    d_e = np.zeros_like(e)

    if cfg.alpha != 0.0:
        da, dp, dn = losses.triplet_loss_grad(e_a, e_p, e_n, cfg.margin, cfg.margin_sign)
        d_e[:b] += cfg.alpha * da
        d_e[b:2 * b] += cfg.alpha * dp
        d_e[2 * b:] += cfg.alpha * dn

    d_logit = losses.bce_logit_grad(det_probs, labels)
    det_grads, d_e_det = net.detect_backward(det_cache, d_logit)
    grads.update(det_grads)
    if cfg.detach_head:
        d_e_det = ops.detach_backward(d_e_det)
    else:
        d_e += d_e_det

    if cfg.beta != 0.0:
        d_logits = cfg.beta * losses.ce_logit_grad(disc_probs, targets)
        disc_grads, d_e_disc = net.discriminate_backward(disc_cache, d_logits)
        grads.update(disc_grads)
        if cfg.grl_lambda != 0.0:
            if cfg.reverse_gradient:
                d_e += ops.grl_backward(d_e_disc, grl)
            else:
                d_e += cfg.grl_lambda * d_e_disc

    grads.update(net.embed_backward(e_cache, d_e))
    breakdown = losses.total_loss(bce_val, triplet_val, forgery_val, cfg.alpha, cfg.beta,
                                  cfg.grl_lambda, cfg.margin)
    return breakdown, grads


def _adam_update(net: ForgeryNet, adam: AdamState, grads: dict, lr: float):
    """One Adam step over the trainable parameters, in a fixed name order.

    Frozen parameters are never touched, so they stay bitwise identical
    across any number of steps.
    """
    adam.step_count += 1
    t = adam.step_count
    bias1 = 1.0 - adam.beta1 ** t
    bias2 = 1.0 - adam.beta2 ** t
    for info in net.infos:
        if not info.trainable:
            continue
        g = grads.get(info.name)
        if g is None:
            g = np.zeros(info.shape)
        m = adam.m[info.name]
        v = adam.v[info.name]
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * (g * g)
        net.params[info.name] -= lr * (m / bias1) / (np.sqrt(v / bias2) + adam.eps)


def train_step(batch, state: TrainState, cfg: TrainConfig, store: ImageStore | None = None):
    """Run one optimization step on a triplet batch; returns (state, breakdown)."""
    if store is None:
        store = ImageStore()
    images, labels, targets = _assemble_batch(batch, state.net, store)
    breakdown, grads = _loss_terms_and_grads(state.net, images, labels, targets, len(batch), cfg)
    _adam_update(state.net, state.adam, grads, cfg.learning_rate)
    state.step += 1
    return state, breakdown


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """The shuffle order for one epoch, derived from (seed, epoch) alone.

    Keyed derivation means a resumed run replays the exact per-epoch orders
    of an uninterrupted one without having to persist generator state.
    """
    return np.random.default_rng([seed, 31, epoch]).permutation(n)


def _append_log_rows(path: Path, rows):
    """Append loss rows; floats are written with repr so they parse back exactly."""
    new_file = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(LOSS_LOG_FIELDS)
        for epoch, step, bd in rows:
            writer.writerow([epoch, step, repr(bd.bce), repr(bd.triplet),
                             repr(bd.forgery), repr(bd.total)])


def read_loss_log(path) -> list:
    """Parse a loss log back into dict rows with exact float values."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LOSS_LOG_FIELDS:
            raise TrainingError(f"{path}: unexpected loss log header {reader.fieldnames!r}")
        rows = []
        for row in reader:
            rows.append({
                "epoch": int(row["epoch"]),
                "step": int(row["step"]),
                "bce": float(row["bce"]),
                "triplet": float(row["triplet"]),
                "forgery": float(row["forgery"]),
                "total": float(row["total"]),
            })
    return rows


def train(manifest: Manifest, cfg: TrainConfig, out_dir, resume_from=None) -> TrainResult:
    """Train on every triplet the manifest supports, checkpointing per epoch.

    ``resume_from`` restores a snapshot and continues through ``cfg.epochs``;
    because batch orders are keyed by (seed, epoch), the resumed run takes
    exactly the steps the uninterrupted run would have.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    included = cfg.included_categories
    if not included:
        included = tuple(c for c in manifest.categories() if c != REAL)
    triplets = build_triplet_set(manifest, included)
    if not triplets:
        raise TrainingError("manifest yields no triplets; nothing to train on")
    categories = (REAL,) + tuple(sorted(included))

    if resume_from is not None:
        state = load_checkpoint(resume_from)
        expected = cfg.model_config(categories)
        if state.net.config != expected:
            raise CheckpointError(
                "checkpoint model does not match the requested configuration "
                f"({state.net.config.to_dict()} vs {expected.to_dict()})"
            )
        if state.seed != cfg.seed:
            raise TrainingError(
                f"checkpoint was trained with seed {state.seed}, requested {cfg.seed}; "
                "resuming across seeds would break replay"
            )
        # The run continues under the active config (e.g. a raised epoch
        # target), so snapshots written from here on must record it.
        state.train_config = cfg.to_dict()
    else:
        state = init_train_state(cfg, categories)

    store = ImageStore(manifest.root)
    loss_log_path = out_dir / "loss_log.csv"
    log: list = []

    for epoch in range(state.epoch + 1, cfg.epochs + 1):
        order = epoch_order(cfg.seed, epoch, len(triplets))
        epoch_rows = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [triplets[i] for i in order[start:start + cfg.batch_size]]
            state, breakdown = train_step(batch, state, cfg, store)
            epoch_rows.append((epoch, state.step, breakdown))
        state.epoch = epoch
        _append_log_rows(loss_log_path, epoch_rows)
        log.extend(epoch_rows)
        if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(state, out_dir / f"epoch{epoch:04d}.ckpt")

    checkpoint_path = save_checkpoint(state, out_dir / "model.ckpt")
    return TrainResult(state=state, log=log, out_dir=out_dir,
                       checkpoint_path=checkpoint_path, loss_log_path=loss_log_path,
                       triplet_count=len(triplets))


def save_checkpoint(state: TrainState, path) -> Path:
    """Serialize model parameters, metadata, and optimizer moments."""
    net = state.net
    meta = {
        "kind": "train_state",
        "model": net.config.to_dict(),
        "params": [
            {"name": i.name, "shape": list(i.shape), "is_bias": i.is_bias,
             "trainable": i.trainable, "group": i.group}
            for i in net.infos
        ],
        "optimizer": {
            "step_count": state.adam.step_count,
            "beta1": state.adam.beta1,
            "beta2": state.adam.beta2,
            "eps": state.adam.eps,
        },
        "epoch": state.epoch,
        "step": state.step,
        "seed": state.seed,
        "train_config": state.train_config,
    }
    arrays = {f"param/{name}": arr for name, arr in net.params.items()}
    for name in state.adam.m:
        arrays[f"adam_m/{name}"] = state.adam.m[name]
        arrays[f"adam_v/{name}"] = state.adam.v[name]
    return write_container(path, meta, arrays)


def load_checkpoint(path) -> TrainState:
    """Restore a TrainState saved by save_checkpoint; verifies integrity."""
    meta, arrays = read_container(path)
    if meta.get("kind") != "train_state":
        raise CheckpointError(f"{path}: not a training checkpoint (kind={meta.get('kind')!r})")
    config = ModelConfig.from_dict(meta["model"])
    infos = []
    params = {}
    for entry in meta["params"]:
        info = ParameterInfo(name=entry["name"], shape=tuple(entry["shape"]),
                             is_bias=bool(entry["is_bias"]), trainable=bool(entry["trainable"]),
                             group=entry["group"])
        key = f"param/{info.name}"
        if key not in arrays:
            raise CheckpointError(f"{path}: missing parameter payload {info.name!r}")
        arr = arrays[key]
        if tuple(arr.shape) != info.shape:
            raise CheckpointError(
                f"{path}: parameter {info.name!r} has shape {arr.shape}, header says {info.shape}"
            )
        infos.append(info)
        params[info.name] = arr
    net = ForgeryNet(config, params, infos)

    opt = meta["optimizer"]
    m, v = {}, {}
    for info in infos:
        if not info.trainable:
            continue
        for slot, dest in (("adam_m", m), ("adam_v", v)):
            key = f"{slot}/{info.name}"
            if key not in arrays:
                raise CheckpointError(f"{path}: missing optimizer payload {key!r}")
            dest[info.name] = arrays[key]
    adam = AdamState(m=m, v=v, step_count=int(opt["step_count"]), beta1=float(opt["beta1"]),
                     beta2=float(opt["beta2"]), eps=float(opt["eps"]))
    return TrainState(net=net, adam=adam, epoch=int(meta["epoch"]), step=int(meta["step"]),
                      seed=int(meta["seed"]), train_config=meta.get("train_config"))
