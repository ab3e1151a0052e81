"""Sample records, manifests, and controlled triplet construction.

A manifest is a newline-delimited UTF-8 file with one JSON object per line
and exactly the fields ``identity_id, frame_index, authenticity,
forgery_category, payload_ref``.  Records are keyed by
``(identity_id, forgery_category, frame_index)`` and kept in that sort
order, so every load is deterministic.

Triplets pair two samples of one authenticity with one of the opposite
authenticity for the same person: the anchor and negative share a frame
index (same moment, opposite authenticity) while the anchor and positive
differ in frame index (same authenticity, different moment).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .exceptions import ManifestError, TripletFormationError

REAL = "real"
FAKE = "fake"

# The classic four manipulation families plus the pristine class; synthetic
# families may use any other non-empty name.
FFPP_CATEGORIES = ("real", "Deepfakes", "Face2Face", "FaceSwap", "NeuralTextures")

MANIFEST_FIELDS = ("identity_id", "frame_index", "authenticity", "forgery_category", "payload_ref")


@dataclass(frozen=True)
class SampleRecord:
    """One frame of one identity, pristine or manipulated."""

    identity_id: str
    frame_index: int
    authenticity: str
    forgery_category: str
    payload_ref: object  # path string, or an in-memory H x W x C array

    def __post_init__(self):
        if not self.identity_id:
            raise ManifestError("identity_id must be a non-empty string")
        if not isinstance(self.frame_index, int) or self.frame_index < 0:
            raise ManifestError(f"frame_index must be a non-negative integer, got {self.frame_index!r}")
        if self.authenticity not in (REAL, FAKE):
            raise ManifestError(f"authenticity must be 'real' or 'fake', got {self.authenticity!r}")
        if not self.forgery_category:
            raise ManifestError("forgery_category must be a non-empty string")
        # real <=> category 'real'
        if (self.authenticity == REAL) != (self.forgery_category == REAL):
            raise ManifestError(
                f"authenticity {self.authenticity!r} inconsistent with "
                f"forgery_category {self.forgery_category!r}"
            )

    @property
    def key(self) -> tuple:
        return (self.identity_id, self.forgery_category, self.frame_index)

    @property
    def label(self) -> int:
        """0 for real, 1 for fake."""
        return 0 if self.authenticity == REAL else 1


@dataclass(frozen=True)
class Triplet:
    """Anchor/positive/negative samples with per-element real/fake labels."""

    anchor: SampleRecord
    positive: SampleRecord
    negative: SampleRecord
    element_labels: tuple

    def __post_init__(self):
        a, p, n = self.anchor, self.positive, self.negative
        if not (a.identity_id == p.identity_id == n.identity_id):
            raise TripletFormationError(
                f"triplet mixes identities {a.identity_id!r}, {p.identity_id!r}, {n.identity_id!r}"
            )
        if a.authenticity != p.authenticity or a.authenticity == n.authenticity:
            raise TripletFormationError(
                "anchor/positive must share authenticity and the negative must oppose it"
            )
        if a.frame_index != n.frame_index:
            raise TripletFormationError(
                f"anchor and negative must share a frame index ({a.frame_index} != {n.frame_index})"
            )
        if a.frame_index == p.frame_index:
            raise TripletFormationError(
                f"anchor and positive must differ in frame index (both {a.frame_index})"
            )
        if self.element_labels not in ((0, 0, 1), (1, 1, 0)):
            raise TripletFormationError(f"element_labels must be (0,0,1) or (1,1,0), got {self.element_labels!r}")
        if self.element_labels != (a.label, p.label, n.label):
            raise TripletFormationError(
                f"element_labels {self.element_labels!r} do not match element authenticity "
                f"({a.label}, {p.label}, {n.label})"
            )

    @property
    def records(self) -> tuple:
        return (self.anchor, self.positive, self.negative)


@dataclass
class Manifest:
    """A deterministic, duplicate-free list of sample records."""

    records: list
    dataset_name: str = "unnamed"
    # Directory against which relative payload paths resolve; not serialized.
    root: Path | None = field(default=None, compare=False)

    @classmethod
    def from_records(cls, records: Iterable[SampleRecord], dataset_name: str = "unnamed",
                     root: Path | None = None) -> "Manifest":
        """Sort records into canonical order and reject duplicate keys."""
        ordered = sorted(records, key=lambda r: r.key)
        seen = set()
        for rec in ordered:
            if rec.key in seen:
                raise ManifestError(f"duplicate record key {rec.key!r}")
            seen.add(rec.key)
        return cls(records=ordered, dataset_name=dataset_name, root=root)

    def __len__(self) -> int:
        return len(self.records)

    def identities(self) -> list:
        return sorted({r.identity_id for r in self.records})

    def categories(self) -> list:
        return sorted({r.forgery_category for r in self.records})

    def filter_categories(self, categories: Iterable[str]) -> "Manifest":
        """Sub-manifest containing only the given forgery categories."""
        wanted = set(categories)
        kept = [r for r in self.records if r.forgery_category in wanted]
        return Manifest(records=kept, dataset_name=self.dataset_name, root=self.root)


def load_manifest(path, dataset_name: str | None = None) -> Manifest:
    """Read a newline-delimited manifest file.

    Raises :class:`ManifestError` for a missing file, a malformed line
    (reported with its 1-based line number), or a duplicate record key.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}: line {lineno}: expected an object")
            missing = [k for k in MANIFEST_FIELDS if k not in obj]
            unknown = [k for k in obj if k not in MANIFEST_FIELDS]
            if missing or unknown:
                raise ManifestError(
                    f"{path}: line {lineno}: missing fields {missing or '[]'}, unknown fields {unknown or '[]'}"
                )
            try:
                rec = SampleRecord(
                    identity_id=str(obj["identity_id"]),
                    frame_index=int(obj["frame_index"]),
                    authenticity=str(obj["authenticity"]),
                    forgery_category=str(obj["forgery_category"]),
                    payload_ref=str(obj["payload_ref"]),
                )
            except (ManifestError, ValueError, TypeError) as exc:
                raise ManifestError(f"{path}: line {lineno}: {exc}") from exc
            records.append(rec)
    name = dataset_name if dataset_name is not None else path.stem
    return Manifest.from_records(records, dataset_name=name, root=path.parent)


def save_manifest(manifest: Manifest, path) -> Path:
    """Write a manifest in canonical order, one JSON object per line."""
    path = Path(path)
    ordered = sorted(manifest.records, key=lambda r: r.key)
    with path.open("w", encoding="utf-8") as fh:
        for rec in ordered:
            if not isinstance(rec.payload_ref, str):
                raise ManifestError(
                    f"record {rec.key!r} holds an in-memory payload and cannot be serialized"
                )
            fh.write(json.dumps({
                "identity_id": rec.identity_id,
                "frame_index": rec.frame_index,
                "authenticity": rec.authenticity,
                "forgery_category": rec.forgery_category,
                "payload_ref": rec.payload_ref,
            }, sort_keys=True) + "\n")
    return path


def halve(samples: Sequence[SampleRecord]) -> tuple:
    """Split a frame-ordered run into two equal halves.

    The first half holds the earliest ``n // 2`` samples, the second the
    next ``n // 2``; with an odd count the trailing sample is dropped so
    the halves stay the same length.
    """
    n2 = len(samples) // 2
    return list(samples[:n2]), list(samples[n2:2 * n2])


def form_triplets(reals: Sequence[SampleRecord], fakes: Sequence[SampleRecord]) -> list:
    """Build all controlled triplets for one identity and one forgery family.

    Both streams are re-sorted by frame index, the reals are truncated to the
    frames the fakes cover (fake frames must be a subset of real frames), and
    each stream is halved in time.  With halves R1/R2 and F1/F2 aligned
    element-wise, four triplet groups are emitted:

        (R1[i], R2[i], F1[i])  labels (0, 0, 1)
        (F1[i], F2[i], R1[i])  labels (1, 1, 0)
        (R2[i], R1[i], F2[i])  labels (0, 0, 1)
        (F2[i], F1[i], R2[i])  labels (1, 1, 0)

    giving ``4 * h`` triplets where ``h`` is the half length.
    """
    if not fakes:
        return []

    identities = {r.identity_id for r in reals} | {r.identity_id for r in fakes}
    if len(identities) != 1:
        raise TripletFormationError(f"records span multiple identities: {sorted(identities)}")
    fake_categories = {r.forgery_category for r in fakes}
    if len(fake_categories) != 1:
        raise TripletFormationError(f"fakes span multiple forgery categories: {sorted(fake_categories)}")
    if any(r.authenticity != REAL for r in reals):
        raise TripletFormationError("reals list contains non-real records")
    if any(r.authenticity != FAKE for r in fakes):
        raise TripletFormationError("fakes list contains non-fake records")

    reals = sorted(reals, key=lambda r: r.frame_index)
    fakes = sorted(fakes, key=lambda r: r.frame_index)

    real_frames = {r.frame_index for r in reals}
    missing = [f.frame_index for f in fakes if f.frame_index not in real_frames]
    if missing:
        raise TripletFormationError(
            f"fake frames {missing} have no frame-aligned real counterpart "
            f"(identity {fakes[0].identity_id!r}, category {fakes[0].forgery_category!r})"
        )
    fake_frames = {f.frame_index for f in fakes}
    aligned_reals = [r for r in reals if r.frame_index in fake_frames]

    r1, r2 = halve(aligned_reals)
    f1, f2 = halve(fakes)
    h = min(len(r1), len(f1))

    triplets = []
    for group in (
        (r1, r2, f1, (0, 0, 1)),
        (f1, f2, r1, (1, 1, 0)),
        (r2, r1, f2, (0, 0, 1)),
        (f2, f1, r2, (1, 1, 0)),
    ):
        anchors, positives, negatives, labels = group
        for i in range(h):
            triplets.append(Triplet(anchors[i], positives[i], negatives[i], labels))
    return triplets


def build_triplet_set(manifest: Manifest, included_categories: Iterable[str]) -> list:
    """All triplets over every (identity, included forgery family) pair.

    Identities and categories are visited in sorted order, so the output
    order is deterministic for a given manifest.
    """
    included = sorted(set(included_categories))
    if not included:
        raise TripletFormationError("included_categories must not be empty")
    if REAL in included:
        raise TripletFormationError("included_categories must not contain 'real'")

    by_identity: dict = {}
    for rec in manifest.records:
        by_identity.setdefault(rec.identity_id, []).append(rec)

    triplets = []
    for identity in sorted(by_identity):
        group = by_identity[identity]
        reals = [r for r in group if r.forgery_category == REAL]
        for category in included:
            fakes = [r for r in group if r.forgery_category == category]
            if not fakes:
                continue
            triplets.extend(form_triplets(reals, fakes))
    return triplets


def expected_triplet_count(manifest: Manifest, included_categories: Iterable[str]) -> int:
    """Closed-form count: 4 * sum over (identity, family) of floor(min(|R|,|F|)/2)."""
    included = sorted(set(included_categories))
    total = 0
    for identity in manifest.identities():
        group = [r for r in manifest.records if r.identity_id == identity]
        n_real = sum(1 for r in group if r.forgery_category == REAL)
        for category in included:
            n_fake = sum(1 for r in group if r.forgery_category == category)
            if n_fake:
                total += 4 * (min(n_real, n_fake) // 2)
    return total
