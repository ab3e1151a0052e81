"""Run configuration: strict YAML loading, presets, and precedence rules.

A run config is a YAML mapping with optional sections.  Unknown keys are an
error (reported with their dotted path) so typos never silently fall back
to defaults.  Effective settings are resolved lowest to highest priority:
per-mode defaults, then the config file, then a named preset, then explicit
command-line flags.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .exceptions import ConfigError
from .synth import GeneratorConfig
from .training import TrainConfig

OUT_DIR_ENV = "TRIFORGE_OUT_DIR"
DEFAULT_OUT_DIR = "runs"

# Ablation wiring, from the plain detector up to the full arrangement.  Each
# preset is a set of TrainConfig overrides applied on top of the config file.
PRESETS = {
    # Binary head only; it must feed the backbone or nothing trains.
    "B": {"alpha": 0.0, "beta": 0.0, "detach_head": False},
    # Add the triplet term, still no discriminator.
    "TL": {"beta": 0.0, "detach_head": False},
    # Discriminator as a plain auxiliary task: its gradient helps the
    # backbone separate families instead of opposing it.
    "TL+Adv": {"detach_head": False, "reverse_gradient": False},
    # Reversal on, detection head still steering the backbone.
    "TL+GRL": {"detach_head": False},
    # Full arrangement: reversal on and the detection head detached.
    "TL+GRL+DH": {},
}

_TOP_KEYS = ("output_dir", "seed", "synth", "data", "model", "train", "eval", "tsne")
_SECTION_KEYS = {
    "synth": ("identities", "frames", "image_size", "families", "dataset_name"),
    "data": ("manifest", "included_categories"),
    "model": ("backbone", "image_size", "in_channels", "channels", "embed_dim",
              "disc_hidden", "normalize_embeddings"),
    "train": ("mode", "learning_rate", "batch_size", "epochs", "margin", "margin_sign",
              "grl_lambda", "alpha", "beta", "detach_head", "reverse_gradient",
              "checkpoint_every", "optimizer"),
    "eval": ("checkpoint", "granularity", "manifests"),
    "tsne": ("checkpoint", "plot"),
}

# Config-file key -> TrainConfig field, where the names differ.
_MODEL_FIELD_MAP = {
    "backbone": "backbone_kind",
    "image_size": "image_size",
    "in_channels": "in_channels",
    "channels": "channels",
    "embed_dim": "embed_dim",
    "disc_hidden": "disc_hidden",
    "normalize_embeddings": "normalize_embeddings",
}


@dataclass
class RunConfig:
    """Validated contents of a run config file."""

    output_dir: str | None = None
    seed: int | None = None
    synth: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)
    tsne: dict = field(default_factory=dict)
    source: Path | None = None


def _check_section(name: str, value, allowed) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping, got {type(value).__name__}")
    unknown = sorted(set(value) - set(allowed))
    if unknown:
        paths = ", ".join(f"{name}.{k}" for k in unknown)
        raise ConfigError(f"unknown config key(s): {paths}")
    return dict(value)


def load_run_config(path) -> RunConfig:
    """Read and validate a YAML run config; unknown keys are errors."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping at the top level")
    unknown = sorted(set(raw) - set(_TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    cfg = RunConfig(source=path)
    if "output_dir" in raw and raw["output_dir"] is not None:
        if not isinstance(raw["output_dir"], str):
            raise ConfigError("config key output_dir must be a string")
        cfg.output_dir = raw["output_dir"]
    if "seed" in raw and raw["seed"] is not None:
        if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool):
            raise ConfigError("config key seed must be an integer")
        cfg.seed = raw["seed"]
    for section in ("synth", "data", "model", "train", "eval", "tsne"):
        setattr(cfg, section, _check_section(section, raw.get(section), _SECTION_KEYS[section]))
    return cfg


def resolve_seed(cfg: RunConfig, flag_seed: int | None) -> int:
    if flag_seed is not None:
        return flag_seed
    if cfg.seed is not None:
        return cfg.seed
    return 0


def resolve_out_dir(cfg: RunConfig, flag_out) -> Path:
    """--out beats the environment override, which beats the config file."""
    if flag_out is not None:
        return Path(flag_out)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env)
    if cfg.output_dir is not None:
        return Path(cfg.output_dir)
    return Path(DEFAULT_OUT_DIR)


def build_generator_config(cfg: RunConfig, seed: int, overrides: dict | None = None) -> GeneratorConfig:
    kwargs = dict(cfg.synth)
    if "families" in kwargs:
        kwargs["families"] = tuple(kwargs["families"])
    for key, value in (overrides or {}).items():
        if value is not None:
            kwargs[key] = value
    return GeneratorConfig(seed=seed, **kwargs)


def build_train_config(cfg: RunConfig, seed: int, preset: str | None = None,
                       flag_overrides: dict | None = None) -> TrainConfig:
    """Merge defaults, config file, preset, and flags into a TrainConfig."""
    mode = cfg.train.get("mode", "full")
    kwargs: dict = {}

    for key, value in cfg.train.items():
        if key == "mode":
            continue
        kwargs[key] = value
    for key, value in cfg.model.items():
        kwargs[_MODEL_FIELD_MAP[key]] = tuple(value) if key == "channels" else value
    if cfg.data.get("included_categories"):
        kwargs["included_categories"] = tuple(cfg.data["included_categories"])

    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        kwargs.update(PRESETS[preset])
    for key, value in (flag_overrides or {}).items():
        if value is not None:
            kwargs[key] = value
    kwargs["seed"] = seed

    try:
        return TrainConfig.for_mode(mode, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid train configuration: {exc}") from exc
