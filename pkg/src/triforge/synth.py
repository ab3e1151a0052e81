"""Deterministic synthetic forgery data for desk-scale experiments.

Each identity gets a procedurally textured base image whose sinusoid phases
drift smoothly with the frame index, standing in for consecutive video
frames of one person.  Every forgery family re-renders the same frames and
injects one localized artifact (a patch of alien texture, or a patch where
texture is destroyed), so a fake frame differs from its aligned real frame
only inside that family's artifact disk.

Everything is keyed off a single seed: rendering the same config twice
yields byte-identical images and manifests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import ConfigError, ManifestError, TriforgeError
from .records import REAL, Manifest, SampleRecord, save_manifest

# Artifact painters are assigned to families by position, cycling if there
# are more families than kinds.
ARTIFACT_KINDS = ("checker", "stripes", "blur", "noise")


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic dataset generator."""

    identities: int = 10
    frames: int = 8
    image_size: int = 32
    families: tuple = ("famA", "famB")
    seed: int = 0
    dataset_name: str = "synthetic"

    def __post_init__(self):
        if self.identities <= 0:
            raise ConfigError(f"identities must be positive, got {self.identities}")
        if self.frames <= 0:
            raise ConfigError(f"frames must be positive, got {self.frames}")
        if self.image_size < 8:
            raise ConfigError(f"image_size must be at least 8, got {self.image_size}")
        fams = tuple(self.families)
        if not fams:
            raise ConfigError("families must not be empty")
        if len(set(fams)) != len(fams):
            raise ConfigError(f"families contains duplicates: {fams}")
        for fam in fams:
            if not fam or fam == REAL:
                raise ConfigError(f"invalid family name {fam!r}")
        object.__setattr__(self, "families", fams)

    def identity_name(self, index: int) -> str:
        return f"id{index:03d}"


def _box_blur(img: np.ndarray, k: int = 5) -> np.ndarray:
    """Separable box blur with edge padding, per channel."""
    pad = k // 2
    padded = np.pad(img, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for dy in range(k):
        for dx in range(k):
            out += padded[dy:dy + img.shape[0], dx:dx + img.shape[1], :]
    return out / (k * k)


def _identity_params(cfg: GeneratorConfig, identity_idx: int) -> dict:
    """Static per-identity rendering parameters (texture, drift, artifact sites)."""
    rng = np.random.default_rng([cfg.seed, 11, identity_idx])
    s = cfg.image_size
    params = {
        "mean": rng.uniform(0.4, 0.6, size=3),
        "freq1": rng.uniform(1.5, 3.5, size=2),
        "freq2": rng.uniform(3.0, 5.5, size=2),
        "phase": rng.uniform(0.0, 2 * np.pi, size=(2, 3)),
        "amp": rng.uniform(0.10, 0.16, size=2),
        "drift": rng.uniform(0.15, 0.35, size=2),
        "noise": _box_blur(rng.uniform(-1.0, 1.0, size=(s, s, 3)), k=5) * 0.35,
    }
    centers = {}
    for f_idx, family in enumerate(cfg.families):
        frng = np.random.default_rng([cfg.seed, 13, identity_idx, f_idx])
        centers[family] = frng.uniform(0.3, 0.7, size=2) * s
    params["artifact_centers"] = centers
    return params


def artifact_mask(cfg: GeneratorConfig, identity_idx: int, family: str) -> np.ndarray:
    """Boolean H x W disk where the family's artifact lives for this identity."""
    params = _identity_params(cfg, identity_idx)
    cy, cx = params["artifact_centers"][family]
    s = cfg.image_size
    yy, xx = np.mgrid[0:s, 0:s]
    radius = s / 6.0
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2


def render_real_frame(cfg: GeneratorConfig, identity_idx: int, frame: int) -> np.ndarray:
    """H x W x 3 float array in [0, 1], drifting smoothly with ``frame``."""
    params = _identity_params(cfg, identity_idx)
    s = cfg.image_size
    yy, xx = np.mgrid[0:s, 0:s] / s
    img = np.zeros((s, s, 3))
    for c in range(3):
        wave1 = params["amp"][0] * np.sin(
            2 * np.pi * (params["freq1"][0] * xx + params["freq1"][1] * yy)
            + params["phase"][0, c] + frame * params["drift"][0]
        )
        wave2 = params["amp"][1] * np.sin(
            2 * np.pi * (params["freq2"][0] * xx + params["freq2"][1] * yy)
            + params["phase"][1, c] + frame * params["drift"][1]
        )
        img[:, :, c] = params["mean"][c] + wave1 + wave2
    img += params["noise"]
    return np.clip(img, 0.02, 0.98)


def render_fake_frame(cfg: GeneratorConfig, identity_idx: int, family: str, frame: int) -> np.ndarray:
    """The aligned real frame with the family's localized artifact injected."""
    if family not in cfg.families:
        raise TriforgeError(f"unknown family {family!r}; configured families are {cfg.families}")
    img = render_real_frame(cfg, identity_idx, frame)
    mask = artifact_mask(cfg, identity_idx, family)
    kind = ARTIFACT_KINDS[cfg.families.index(family) % len(ARTIFACT_KINDS)]
    s = cfg.image_size
    yy, xx = np.mgrid[0:s, 0:s]

    if kind == "checker":
        pattern = np.where((xx + yy) % 2 == 0, 1.0, -1.0)
        img[mask] = np.clip(img[mask] + 0.30 * pattern[mask][:, None], 0.0, 1.0)
    elif kind == "stripes":
        pattern = np.sign(np.sin(2 * np.pi * (xx - yy) / 3.0) + 0.5)
        img[mask] = np.clip(img[mask] + 0.30 * pattern[mask][:, None], 0.0, 1.0)
    elif kind == "blur":
        blurred = _box_blur(img, k=5)
        img[mask] = blurred[mask]
    elif kind == "noise":
        nrng = np.random.default_rng([cfg.seed, 17, identity_idx, cfg.families.index(family), frame])
        noise = nrng.uniform(-0.3, 0.3, size=img.shape)
        img[mask] = np.clip(img[mask] + noise[mask], 0.0, 1.0)
    return img


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def generate_records(cfg: GeneratorConfig):
    """Yield (record, uint8 image) pairs in canonical order.

    Payload refs follow the ``<identity>_<category>_<frame>.png`` pattern;
    pixel data is quantized exactly as it would be written to disk.
    """
    for identity_idx in range(cfg.identities):
        identity = cfg.identity_name(identity_idx)
        categories = [REAL] + list(cfg.families)
        for category in categories:
            for frame in range(cfg.frames):
                if category == REAL:
                    img = render_real_frame(cfg, identity_idx, frame)
                    authenticity = "real"
                else:
                    img = render_fake_frame(cfg, identity_idx, category, frame)
                    authenticity = "fake"
                rec = SampleRecord(
                    identity_id=identity,
                    frame_index=frame,
                    authenticity=authenticity,
                    forgery_category=category,
                    payload_ref=f"{identity}_{category}_{frame:03d}.png",
                )
                yield rec, to_uint8(img)


def make_synthetic_dataset(cfg: GeneratorConfig, out_dir) -> Manifest:
    """Render the full dataset into ``out_dir`` and write its manifest.

    Returns the manifest (rooted at ``out_dir``); the manifest file itself
    lands at ``out_dir / "manifest.jsonl"``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for rec, img in generate_records(cfg):
        Image.fromarray(img, mode="RGB").save(out_dir / rec.payload_ref, format="PNG")
        records.append(rec)
    manifest = Manifest.from_records(records, dataset_name=cfg.dataset_name, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def in_memory_manifest(cfg: GeneratorConfig) -> Manifest:
    """Dataset with array payloads instead of files; handy for tests and demos."""
    records = []
    for rec, img in generate_records(cfg):
        records.append(SampleRecord(
            identity_id=rec.identity_id,
            frame_index=rec.frame_index,
            authenticity=rec.authenticity,
            forgery_category=rec.forgery_category,
            payload_ref=img.astype(np.float64) / 255.0,
        ))
    return Manifest.from_records(records, dataset_name=cfg.dataset_name)


class ImageStore:
    """Loads and caches record payloads as H x W x C float64 arrays in [0, 1]."""

    def __init__(self, root: Path | None = None):
        self.root = Path(root) if root is not None else None
        self._cache: dict = {}

    def get(self, record: SampleRecord) -> np.ndarray:
        ref = record.payload_ref
        if isinstance(ref, np.ndarray):
            img = np.asarray(ref, dtype=np.float64)
            if img.ndim != 3:
                raise ManifestError(f"in-memory payload for {record.key!r} must be H x W x C")
            return img
        path = Path(ref)
        if not path.is_absolute():
            if self.root is None:
                raise ManifestError(
                    f"relative payload {ref!r} needs a manifest root to resolve against"
                )
            path = self.root / path
        key = str(path)
        if key not in self._cache:
            if not path.is_file():
                raise ManifestError(f"payload file not found: {path}")
            with Image.open(path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
            self._cache[key] = arr.astype(np.float64) / 255.0
        return self._cache[key]

    def batch(self, records) -> np.ndarray:
        """Stack payloads into a (B, H, W, C) array."""
        return np.stack([self.get(r) for r in records], axis=0)
