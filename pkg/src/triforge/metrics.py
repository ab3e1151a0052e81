"""Detection metrics, evaluation reports, and embedding projections.

The ROC sweep groups tied scores into a single operating point, and the
area under it comes from trapezoidal integration.  ``auc_pairwise_oracle``
computes the same quantity by brute force over all real/fake pairs (ties
worth half) and exists so the two independent routes can be checked against
each other.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import losses
from .exceptions import EvaluationError
from .records import REAL, Manifest
from .synth import ImageStore

REPORT_FIELDS = ("dataset", "granularity", "auc", "logloss", "n_real", "n_fake")
GRANULARITIES = ("frame", "video", "both")


@dataclass(frozen=True)
class RocCurve:
    """Operating points swept from the highest score threshold down."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


def _check_scores(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or labels.shape != scores.shape:
        raise EvaluationError(f"scores and labels must be matching 1-D arrays, "
                              f"got {scores.shape} and {labels.shape}")
    if scores.size == 0:
        raise EvaluationError("cannot evaluate an empty score set")
    if not np.isfinite(scores).all():
        raise EvaluationError("scores contain non-finite values")
    if not np.isin(labels, (0, 1)).all():
        raise EvaluationError("labels must be 0 (real) or 1 (fake)")
    labels = labels.astype(np.int64)
    if labels.min() == labels.max():
        present = "fake" if labels[0] == 1 else "real"
        raise EvaluationError(f"need both classes to rank; only {present} samples present")
    return scores, labels


def roc_curve(scores, labels) -> RocCurve:
    """ROC points over distinct thresholds, ties grouped into one point."""
    scores, labels = _check_scores(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tps = np.cumsum(y)
    fps = np.cumsum(1 - y)
    # Last index of each tie group is where that threshold's counts settle.
    last = np.nonzero(np.append(s[1:] != s[:-1], True))[0]
    tpr = np.concatenate(([0.0], tps[last] / tps[-1]))
    fpr = np.concatenate(([0.0], fps[last] / fps[-1]))
    thresholds = np.concatenate(([np.inf], s[last]))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def auc_trapezoid(curve: RocCurve) -> float:
    """Area under the ROC curve by the trapezoid rule."""
    fpr, tpr = curve.fpr, curve.tpr
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) * 0.5))


def auc_pairwise_oracle(scores, labels) -> float:
    """AUC as the fraction of real/fake pairs ranked correctly, ties half.

    Quadratic in the class sizes; intended as an independent cross-check of
    roc_curve + auc_trapezoid rather than for large-scale use.
    """
    scores, labels = _check_scores(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / (pos.size * neg.size))


def log_loss(probs, labels) -> float:
    """Mean binary cross-entropy of forgery probabilities (clamped at 1e-7)."""
    return losses.bce_loss(probs, labels)


@dataclass(frozen=True)
class EvalRow:
    dataset: str
    granularity: str
    auc: float
    logloss: float
    n_real: int
    n_fake: int


@dataclass
class EvalReport:
    dataset: str
    rows: list
    per_category: dict  # frame-level AUC for reals vs each fake family

    def row(self, granularity: str) -> EvalRow:
        for row in self.rows:
            if row.granularity == granularity:
                return row
        raise EvaluationError(f"report has no {granularity!r} row")


def _resolve_net(model):
    # Accepts a ForgeryNet or anything carrying one under .net (a TrainState).
    return getattr(model, "net", model)


def score_records(model, records, store: ImageStore, batch_size: int = 64) -> np.ndarray:
    """Forgery probability for each record, in order."""
    net = _resolve_net(model)
    out = np.empty(len(records))
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        out[start:start + len(chunk)] = net.detect(net.embed(store.batch(chunk)))
    return out


def embed_records(model, records, store: ImageStore, batch_size: int = 64) -> np.ndarray:
    """Embedding row for each record, in order."""
    net = _resolve_net(model)
    out = np.empty((len(records), net.config.backbone.embed_dim))
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        out[start:start + len(chunk)] = net.embed(store.batch(chunk))
    return out


def _video_scores(records, scores):
    """Mean frame score per (identity, category) group, with the group label."""
    groups: dict = {}
    for rec, score in zip(records, scores):
        groups.setdefault((rec.identity_id, rec.forgery_category), []).append(score)
    keys = sorted(groups)
    agg = np.array([np.mean(groups[k]) for k in keys])
    labels = np.array([0 if cat == REAL else 1 for _, cat in keys])
    return agg, labels


def evaluate(model, manifest: Manifest, granularity: str = "frame",
             batch_size: int = 64) -> EvalReport:
    """Score a manifest and summarize ranking and calibration quality.

    ``video`` granularity averages frame scores within each
    (identity, category) group before ranking, mirroring per-clip scoring.
    """
    if granularity not in GRANULARITIES:
        raise EvaluationError(f"granularity must be one of {GRANULARITIES}, got {granularity!r}")
    if len(manifest) == 0:
        raise EvaluationError("cannot evaluate an empty manifest")
    records = manifest.records
    store = ImageStore(manifest.root)
    scores = score_records(model, records, store, batch_size)
    labels = np.array([r.label for r in records])

    rows = []
    wanted = ("frame", "video") if granularity == "both" else (granularity,)
    for gran in wanted:
        if gran == "frame":
            s, y = scores, labels
        else:
            s, y = _video_scores(records, scores)
        if y.min() == y.max():
            raise EvaluationError(f"{gran} evaluation needs both real and fake samples")
        rows.append(EvalRow(
            dataset=manifest.dataset_name,
            granularity=gran,
            auc=auc_trapezoid(roc_curve(s, y)),
            logloss=log_loss(s, y),
            n_real=int((y == 0).sum()),
            n_fake=int((y == 1).sum()),
        ))

    per_category: dict = {}
    real_mask = labels == 0
    for category in manifest.categories():
        if category == REAL:
            continue
        mask = real_mask | np.array([r.forgery_category == category for r in records])
        per_category[category] = auc_trapezoid(roc_curve(scores[mask], labels[mask]))
    return EvalReport(dataset=manifest.dataset_name, rows=rows, per_category=per_category)


def write_report(reports, path) -> Path:
    """Write one or more reports as CSV rows under a fixed header.

    Floats are written with repr so they parse back exactly.
    """
    if isinstance(reports, EvalReport):
        reports = [reports]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_FIELDS)
        for report in reports:
            for row in report.rows:
                writer.writerow([row.dataset, row.granularity, repr(row.auc), repr(row.logloss),
                                 row.n_real, row.n_fake])
    return path


def read_report(path) -> list:
    """Parse a report CSV back into dict rows."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_FIELDS:
            raise EvaluationError(f"{path}: unexpected report header {reader.fieldnames!r}")
        return [{
            "dataset": row["dataset"],
            "granularity": row["granularity"],
            "auc": float(row["auc"]),
            "logloss": float(row["logloss"]),
            "n_real": int(row["n_real"]),
            "n_fake": int(row["n_fake"]),
        } for row in reader]


def tsne_export(model, manifest: Manifest, out_csv, seed: int = 0,
                plot_path=None, batch_size: int = 64) -> Path:
    """Project embeddings to 2-D and write one row per sample.

    Output columns are x, y, authenticity, forgery_category.  Perplexity is
    capped at (n - 1) / 3 so small sample sets stay valid; an optional
    scatter plot colored by category can be written alongside.
    """
    from sklearn.manifold import TSNE

    if len(manifest) < 10:
        raise EvaluationError(f"t-SNE needs at least 10 samples, got {len(manifest)}")
    records = manifest.records
    store = ImageStore(manifest.root)
    embeddings = embed_records(model, records, store, batch_size)
    perplexity = min(30.0, (len(records) - 1) / 3.0)
    tsne = TSNE(n_components=2, perplexity=perplexity, init="pca", random_state=seed)
    coords = tsne.fit_transform(embeddings)

    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with out_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x", "y", "authenticity", "forgery_category"))
        for rec, (x, y) in zip(records, coords):
            writer.writerow([repr(float(x)), repr(float(y)), rec.authenticity, rec.forgery_category])

    if plot_path is not None:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        plot_path = Path(plot_path)
        plot_path.parent.mkdir(parents=True, exist_ok=True)
        fig, ax = plt.subplots(figsize=(6, 6))
        categories = sorted({r.forgery_category for r in records})
        for category in categories:
            mask = np.array([r.forgery_category == category for r in records])
            ax.scatter(coords[mask, 0], coords[mask, 1], s=12, label=category)
        ax.legend()
        ax.set_title(f"embedding projection: {manifest.dataset_name}")
        fig.tight_layout()
        fig.savefig(plot_path, dpi=120)
        plt.close(fig)
    return out_csv
