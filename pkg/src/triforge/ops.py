"""Array operations with explicit forward and backward passes.

Everything runs in float64.  Each forward returns ``(output, cache)`` and
the matching backward consumes the cache plus the upstream gradient; the
training step composes these by hand, which keeps gradient routing (the
reversal layer, the detachment barrier) explicit and bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ModelError


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 2, pad: int = 1):
    """Strided 2-D convolution. x: (B, C, H, W); w: (F, C, kh, kw); b: (F,)."""
    batch, cin, h, wdt = x.shape
    f, cin2, kh, kw = w.shape
    if cin != cin2:
        raise ModelError(f"conv input has {cin} channels, kernel expects {cin2}")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wdt + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    sb, sc, sh, sw = xp.strides
    patches = np.lib.stride_tricks.as_strided(
        xp,
        shape=(batch, cin, kh, kw, ho, wo),
        strides=(sb, sc, sh, sw, sh * stride, sw * stride),
        writeable=False,
    )
    # (B*Ho*Wo, C*kh*kw) @ (C*kh*kw, F)
    cols = patches.transpose(0, 4, 5, 1, 2, 3).reshape(batch * ho * wo, cin * kh * kw)
    out = cols @ w.reshape(f, -1).T + b
    out = out.reshape(batch, ho, wo, f).transpose(0, 3, 1, 2)
    cache = (x.shape, xp.shape, cols, w, stride, pad, (ho, wo))
    return np.ascontiguousarray(out), cache


def conv2d_backward(cache, dout: np.ndarray):
    """Returns (dx, dw, db) for conv2d_forward."""
    x_shape, xp_shape, cols, w, stride, pad, (ho, wo) = cache
    batch, cin, h, wdt = x_shape
    f, _, kh, kw = w.shape
    dcols_out = dout.transpose(0, 2, 3, 1).reshape(batch * ho * wo, f)
    dw = (dcols_out.T @ cols).reshape(w.shape)
    db = dcols_out.sum(axis=0)
    dcols = dcols_out @ w.reshape(f, -1)
    dpatches = dcols.reshape(batch, ho, wo, cin, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    dxp = np.zeros(xp_shape)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += dpatches[:, :, i, j]
    dx = dxp[:, :, pad:pad + h, pad:pad + wdt]
    return dx, dw, db


def tanh_forward(x: np.ndarray):
    out = np.tanh(x)
    return out, out


def tanh_backward(cache, dout: np.ndarray):
    return dout * (1.0 - cache * cache)


def gap_forward(x: np.ndarray):
    """Global average pool over the spatial axes of (B, C, H, W)."""
    return x.mean(axis=(2, 3)), x.shape


def gap_backward(cache, dout: np.ndarray):
    batch, c, h, w = cache
    return np.broadcast_to(dout[:, :, None, None], cache) / (h * w)


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, x


def affine_backward(cache, w: np.ndarray, dout: np.ndarray):
    x = cache
    dw = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db


def l2norm_forward(x: np.ndarray, eps: float = 1e-12):
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True)) + eps
    out = x / norms
    return out, (out, norms)


def l2norm_backward(cache, dout: np.ndarray):
    out, norms = cache
    return (dout - out * (dout * out).sum(axis=1, keepdims=True)) / norms


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class GrlConfig:
    """Reversal strength of the gradient reversal layer."""

    lambda_: float = 1.0

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ModelError(f"GRL lambda must be non-negative, got {self.lambda_}")


def grl_apply(x: np.ndarray, cfg: GrlConfig) -> np.ndarray:
    """Forward pass of the gradient reversal layer: the identity map."""
    return x


def grl_backward(dout: np.ndarray, cfg: GrlConfig) -> np.ndarray:
    """Backward pass: the upstream gradient is the incoming one times -lambda."""
    return -cfg.lambda_ * dout


def detach(x: np.ndarray) -> np.ndarray:
    """Forward identity whose backward passes nothing upstream."""
    return x


def detach_backward(dout: np.ndarray) -> np.ndarray:
    return np.zeros_like(dout)
