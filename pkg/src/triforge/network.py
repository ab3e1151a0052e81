"""The embedding backbone, its two heads, and parameter bookkeeping.

One weight set embeds every triplet element (the three branches share
parameters by construction), a single-logit head scores real vs. fake, and
a small multi-layer head produces per-forgery-family logits.  Parameters
carry explicit metadata (``is_bias``, owning group) recorded when they are
created, so fine-tuning masks never have to parse names.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import ops
from .exceptions import ModelError

BACKBONE_KINDS = ("toy_cnn", "external")
FINETUNE_MODES = ("full", "bitfit")


@dataclass(frozen=True)
class BackboneConfig:
    kind: str = "toy_cnn"
    image_size: int = 32
    in_channels: int = 3
    channels: tuple = (8, 16, 32)
    embed_dim: int = 128
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in BACKBONE_KINDS:
            raise ModelError(f"unknown backbone kind {self.kind!r}; choose from {BACKBONE_KINDS}")
        if self.image_size < 8:
            raise ModelError(f"image_size must be at least 8, got {self.image_size}")
        if self.embed_dim <= 0:
            raise ModelError(f"embed_dim must be positive, got {self.embed_dim}")
        if len(self.channels) != 3 or any(c <= 0 for c in self.channels):
            raise ModelError(f"channels must be three positive counts, got {self.channels!r}")
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "image_size": self.image_size,
            "in_channels": self.in_channels,
            "channels": list(self.channels),
            "embed_dim": self.embed_dim,
            "normalize": self.normalize,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackboneConfig":
        return cls(
            kind=d["kind"],
            image_size=int(d["image_size"]),
            in_channels=int(d["in_channels"]),
            channels=tuple(d["channels"]),
            embed_dim=int(d["embed_dim"]),
            normalize=bool(d["normalize"]),
        )


@dataclass(frozen=True)
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    categories: tuple = ("real",)
    disc_hidden: int = 64

    def __post_init__(self):
        cats = tuple(self.categories)
        if not cats or cats[0] != "real":
            raise ModelError(f"categories must start with 'real', got {cats!r}")
        if len(set(cats)) != len(cats):
            raise ModelError(f"categories contains duplicates: {cats!r}")
        object.__setattr__(self, "categories", cats)

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone.to_dict(),
            "categories": list(self.categories),
            "disc_hidden": self.disc_hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            backbone=BackboneConfig.from_dict(d["backbone"]),
            categories=tuple(d["categories"]),
            disc_hidden=int(d["disc_hidden"]),
        )


@dataclass(frozen=True)
class ParameterInfo:
    """Metadata for one parameter tensor; flags are set at construction time."""

    name: str
    shape: tuple
    is_bias: bool
    trainable: bool
    group: str  # "backbone", "detector", or "discriminator"


class ForgeryNet:
    """Shared-weight embedding network with a detection and a discrimination head."""

    def __init__(self, config: ModelConfig, params: dict, infos: list):
        self.config = config
        self.params = params
        self.infos = list(infos)
        names = [i.name for i in self.infos]
        if sorted(names) != sorted(params):
            raise ModelError("parameter metadata does not match parameter arrays")

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, config: ModelConfig, seed: int = 0) -> "ForgeryNet":
        if config.backbone.kind == "external":
            raise ModelError(
                "the 'external' backbone is an interface stub; no pretrained "
                "weights ship with this package (use kind='toy_cnn')"
            )
        rng = np.random.default_rng([seed, 23])
        bb = config.backbone
        params: dict = {}
        infos: list = []

        def add(name, array, is_bias, group):
            params[name] = np.asarray(array, dtype=np.float64)
            infos.append(ParameterInfo(name, tuple(params[name].shape), is_bias, True, group))

        cin = bb.in_channels
        for idx, cout in enumerate(bb.channels, start=1):
            fan_in = cin * 9
            add(f"backbone.conv{idx}.weight", rng.normal(0.0, fan_in ** -0.5, (cout, cin, 3, 3)),
                is_bias=False, group="backbone")
            add(f"backbone.conv{idx}.bias", np.zeros(cout), is_bias=True, group="backbone")
            cin = cout
        add("backbone.proj.weight", rng.normal(0.0, cin ** -0.5, (cin, bb.embed_dim)),
            is_bias=False, group="backbone")
        add("backbone.proj.bias", np.zeros(bb.embed_dim), is_bias=True, group="backbone")

        add("detector.weight", rng.normal(0.0, bb.embed_dim ** -0.5, (bb.embed_dim,)),
            is_bias=False, group="detector")
        add("detector.bias", np.zeros(1), is_bias=True, group="detector")

        k = config.num_categories
        add("discriminator.fc1.weight", rng.normal(0.0, bb.embed_dim ** -0.5, (bb.embed_dim, config.disc_hidden)),
            is_bias=False, group="discriminator")
        add("discriminator.fc1.bias", np.zeros(config.disc_hidden), is_bias=True, group="discriminator")
        add("discriminator.fc2.weight", rng.normal(0.0, config.disc_hidden ** -0.5, (config.disc_hidden, k)),
            is_bias=False, group="discriminator")
        add("discriminator.fc2.bias", np.zeros(k), is_bias=True, group="discriminator")

        return cls(config, params, infos)

    def copy(self) -> "ForgeryNet":
        return ForgeryNet(self.config, {k: v.copy() for k, v in self.params.items()}, self.infos)

    # -- embedding ---------------------------------------------------------

    def _check_images(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        bb = self.config.backbone
        if images.ndim != 4 or images.shape[1:] != (bb.image_size, bb.image_size, bb.in_channels):
            raise ModelError(
                f"expected images shaped (B, {bb.image_size}, {bb.image_size}, "
                f"{bb.in_channels}), got {images.shape}"
            )
        if not np.isfinite(images).all():
            raise ModelError("images contain non-finite values")
        return images

    def embed_with_cache(self, images: np.ndarray):
        """Embed a (B, H, W, C) batch; returns (embeddings, cache) for backward."""
        x = self._check_images(images).transpose(0, 3, 1, 2)
        p = self.params
        caches = []
        h = x
        for idx in range(1, 4):
            h, c_conv = ops.conv2d_forward(h, p[f"backbone.conv{idx}.weight"], p[f"backbone.conv{idx}.bias"])
            h, c_tanh = ops.tanh_forward(h)
            caches.append((c_conv, c_tanh))
        g, c_gap = ops.gap_forward(h)
        e, c_aff = ops.affine_forward(g, p["backbone.proj.weight"], p["backbone.proj.bias"])
        c_norm = None
        if self.config.backbone.normalize:
            e, c_norm = ops.l2norm_forward(e)
        return e, (caches, c_gap, c_aff, c_norm)

    def embed(self, images: np.ndarray) -> np.ndarray:
        """Embeddings for a batch; identical inputs give bitwise-equal rows."""
        e, _ = self.embed_with_cache(images)
        return e

    def embed_backward(self, cache, d_embed: np.ndarray) -> dict:
        """Backbone parameter gradients for an upstream embedding gradient."""
        caches, c_gap, c_aff, c_norm = cache
        p = self.params
        grads: dict = {}
        d = d_embed
        if c_norm is not None:
            d = ops.l2norm_backward(c_norm, d)
        d, grads["backbone.proj.weight"], grads["backbone.proj.bias"] = ops.affine_backward(
            c_aff, p["backbone.proj.weight"], d)
        d = ops.gap_backward(c_gap, d)
        for idx in range(3, 0, -1):
            c_conv, c_tanh = caches[idx - 1]
            d = ops.tanh_backward(c_tanh, d)
            d, grads[f"backbone.conv{idx}.weight"], grads[f"backbone.conv{idx}.bias"] = ops.conv2d_backward(c_conv, d)
        return grads

    # -- heads --------------------------------------------------------------

    def _check_embeddings(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, dtype=np.float64)
        d = self.config.backbone.embed_dim
        if e.ndim != 2 or e.shape[1] != d:
            raise ModelError(f"expected embeddings shaped (B, {d}), got {e.shape}")
        return e

    def detect_with_cache(self, e: np.ndarray):
        e = self._check_embeddings(e)
        z = e @ self.params["detector.weight"] + self.params["detector.bias"][0]
        return ops.sigmoid(z), e

    def detect(self, e: np.ndarray) -> np.ndarray:
        """Probability that each embedded sample is a forgery, in (0, 1)."""
        probs, _ = self.detect_with_cache(e)
        return probs

    def detect_backward(self, cache, d_logit: np.ndarray):
        """Gradients for an upstream gradient on the detection logit."""
        e = cache
        grads = {
            "detector.weight": e.T @ d_logit,
            "detector.bias": np.array([d_logit.sum()]),
        }
        d_e = d_logit[:, None] * self.params["detector.weight"][None, :]
        return grads, d_e

    def discriminate_with_cache(self, e: np.ndarray):
        e = self._check_embeddings(e)
        p = self.params
        h_lin, c1 = ops.affine_forward(e, p["discriminator.fc1.weight"], p["discriminator.fc1.bias"])
        h, c_tanh = ops.tanh_forward(h_lin)
        logits, c2 = ops.affine_forward(h, p["discriminator.fc2.weight"], p["discriminator.fc2.bias"])
        return ops.softmax(logits), (c1, c_tanh, c2)

    def discriminate(self, e: np.ndarray) -> np.ndarray:
        """Per-forgery-family probability rows (each sums to one)."""
        probs, _ = self.discriminate_with_cache(e)
        return probs

    def discriminate_backward(self, cache, d_logits: np.ndarray):
        """Gradients for an upstream gradient on the discriminator logits."""
        c1, c_tanh, c2 = cache
        p = self.params
        grads: dict = {}
        d_h, grads["discriminator.fc2.weight"], grads["discriminator.fc2.bias"] = ops.affine_backward(
            c2, p["discriminator.fc2.weight"], d_logits)
        d_h = ops.tanh_backward(c_tanh, d_h)
        d_e, grads["discriminator.fc1.weight"], grads["discriminator.fc1.bias"] = ops.affine_backward(
            c1, p["discriminator.fc1.weight"], d_h)
        return grads, d_e


def apply_bitfit_mask(infos: list, mode: str) -> list:
    """Mark which parameters train under the given fine-tuning mode.

    ``full`` leaves everything trainable.  ``bitfit`` freezes backbone
    weights so only backbone bias terms update; head parameters stay
    trainable in both modes.
    """
    if mode not in FINETUNE_MODES:
        raise ModelError(f"unknown finetune mode {mode!r}; choose from {FINETUNE_MODES}")
    out = []
    for info in infos:
        if mode == "full" or info.group != "backbone":
            trainable = True
        else:
            trainable = info.is_bias
        out.append(replace(info, trainable=trainable))
    return out


def parameter_counts(infos: list) -> dict:
    """Scalar-parameter totals, overall and for the trainable subset."""
    total = sum(int(np.prod(i.shape)) for i in infos)
    trainable = sum(int(np.prod(i.shape)) for i in infos if i.trainable)
    backbone_trainable = sum(
        int(np.prod(i.shape)) for i in infos if i.trainable and i.group == "backbone"
    )
    return {"total": total, "trainable": trainable, "backbone_trainable": backbone_trainable}
