"""The four objective terms and their composition.

All losses are plain float64 functions.  Log arguments are clamped at
``EPS = 1e-7`` so perfect predictions stay finite.  The triplet term uses
squared Euclidean distances with the margin *added* to the anchor-positive
distance by default, so the loss only vanishes once the negative is pushed
at least ``margin`` farther away than the positive; ``margin_sign=-1``
instead subtracts the margin for side-by-side comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import TriforgeError

EPS = 1e-7


@dataclass(frozen=True)
class LossBreakdown:
    """One step's objective values plus the weights that combined them."""

    bce: float
    triplet: float
    forgery: float
    total: float
    alpha: float
    beta: float
    grl_lambda: float
    margin: float

    def as_row(self) -> dict:
        return {
            "bce": self.bce,
            "triplet": self.triplet,
            "forgery": self.forgery,
            "total": self.total,
        }


def _check_batch(name: str, values: np.ndarray, labels: np.ndarray):
    if values.ndim != 1 or labels.ndim != 1:
        raise TriforgeError(f"{name}: expected 1-D arrays")
    if len(values) != len(labels):
        raise TriforgeError(f"{name}: length mismatch ({len(values)} vs {len(labels)})")
    if len(values) == 0:
        raise TriforgeError(f"{name}: empty batch")


def bce_loss(probs, labels) -> float:
    """Mean binary cross-entropy of predicted forgery probabilities."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _check_batch("bce_loss", probs, labels)
    p = np.clip(probs, EPS, 1.0 - EPS)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


def bce_loss_grad(probs, labels) -> np.ndarray:
    """d bce_loss / d probs; zero where the clamp is active."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _check_batch("bce_loss", probs, labels)
    p = np.clip(probs, EPS, 1.0 - EPS)
    inside = (probs > EPS) & (probs < 1.0 - EPS)
    grad = -(labels / p - (1.0 - labels) / (1.0 - p)) / len(probs)
    return np.where(inside, grad, 0.0)


def triplet_loss(anchor, positive, negative, margin: float = 1.0, margin_sign: int = 1) -> float:
    """Hinged squared-distance triplet loss, averaged over the batch."""
    a, p, n = (np.asarray(x, dtype=np.float64) for x in (anchor, positive, negative))
    if not (a.shape == p.shape == n.shape) or a.ndim != 2:
        raise TriforgeError(f"triplet_loss: shapes must match, got {a.shape}, {p.shape}, {n.shape}")
    if a.shape[0] == 0:
        raise TriforgeError("triplet_loss: empty batch")
    if margin < 0:
        raise TriforgeError(f"triplet_loss: margin must be non-negative, got {margin}")
    if margin_sign not in (1, -1):
        raise TriforgeError(f"triplet_loss: margin_sign must be +1 or -1, got {margin_sign}")
    d_pos = ((a - p) ** 2).sum(axis=1)
    d_neg = ((a - n) ** 2).sum(axis=1)
    hinge = np.maximum(0.0, d_pos - d_neg + margin_sign * margin)
    return float(hinge.mean())


def triplet_loss_grad(anchor, positive, negative, margin: float = 1.0, margin_sign: int = 1):
    """Gradients of triplet_loss w.r.t. the three embedding batches."""
    a, p, n = (np.asarray(x, dtype=np.float64) for x in (anchor, positive, negative))
    d_pos = ((a - p) ** 2).sum(axis=1)
    d_neg = ((a - n) ** 2).sum(axis=1)
    active = (d_pos - d_neg + margin_sign * margin > 0.0).astype(np.float64) / a.shape[0]
    da = 2.0 * active[:, None] * ((a - p) - (a - n))
    dp = -2.0 * active[:, None] * (a - p)
    dn = 2.0 * active[:, None] * (a - n)
    return da, dp, dn


def forgery_ce_loss(category_probs, targets) -> float:
    """Mean multi-class cross-entropy against integer category targets."""
    probs = np.asarray(category_probs, dtype=np.float64)
    targets = np.asarray(targets)
    if probs.ndim != 2:
        raise TriforgeError(f"forgery_ce_loss: expected (N, K) probabilities, got {probs.shape}")
    if targets.ndim != 1 or len(targets) != probs.shape[0]:
        raise TriforgeError("forgery_ce_loss: targets must be one index per row")
    if len(targets) == 0:
        raise TriforgeError("forgery_ce_loss: empty batch")
    k = probs.shape[1]
    if targets.min() < 0 or targets.max() >= k:
        raise TriforgeError(f"forgery_ce_loss: target out of range [0, {k})")
    if (probs < -1e-9).any() or (np.abs(probs.sum(axis=1) - 1.0) > 1e-6).any():
        raise TriforgeError("forgery_ce_loss: rows must be probability distributions")
    picked = probs[np.arange(len(targets)), targets]
    return float(-np.mean(np.log(np.maximum(picked, EPS))))


def forgery_ce_grad(category_probs, targets) -> np.ndarray:
    """d forgery_ce_loss / d category_probs; zero where the clamp is active."""
    probs = np.asarray(category_probs, dtype=np.float64)
    targets = np.asarray(targets)
    grad = np.zeros_like(probs)
    picked = probs[np.arange(len(targets)), targets]
    scale = np.where(picked > EPS, -1.0 / np.maximum(picked, EPS), 0.0) / len(targets)
    grad[np.arange(len(targets)), targets] = scale
    return grad


def bce_logit_grad(probs, labels) -> np.ndarray:
    """d bce_loss / d logit for probs produced by a sigmoid.

    Folding the sigmoid derivative in analytically keeps the step numerically
    clean; entries where the probability clamp is active get zero gradient,
    consistent with bce_loss_grad.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _check_batch("bce_logit_grad", probs, labels)
    inside = (probs > EPS) & (probs < 1.0 - EPS)
    return np.where(inside, probs - labels, 0.0) / len(probs)


def ce_logit_grad(category_probs, targets) -> np.ndarray:
    """d forgery_ce_loss / d logits for probs produced by a softmax.

    Rows whose target probability sits at the clamp floor get a zero row,
    consistent with forgery_ce_grad.
    """
    probs = np.asarray(category_probs, dtype=np.float64)
    targets = np.asarray(targets)
    rows = np.arange(len(targets))
    grad = probs.copy()
    grad[rows, targets] -= 1.0
    inside = probs[rows, targets] > EPS
    return np.where(inside[:, None], grad, 0.0) / len(targets)


def total_loss(bce: float, triplet: float, forgery: float, alpha: float, beta: float,
               grl_lambda: float = 1.0, margin: float = 1.0) -> LossBreakdown:
    """Weighted composition of the three terms, recorded with its weights."""
    for name, value in (("bce", bce), ("triplet", triplet), ("forgery", forgery)):
        if not np.isfinite(value):
            raise TriforgeError(f"total_loss: non-finite {name} component ({value})")
    if alpha < 0 or beta < 0:
        raise TriforgeError(f"total_loss: weights must be non-negative (alpha={alpha}, beta={beta})")
    total = bce + alpha * triplet + beta * forgery
    return LossBreakdown(
        bce=float(bce), triplet=float(triplet), forgery=float(forgery), total=float(total),
        alpha=float(alpha), beta=float(beta), grl_lambda=float(grl_lambda), margin=float(margin),
    )
