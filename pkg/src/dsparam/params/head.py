"""Input-conditioned raw parameters: ``alpha * (x W) + b`` on RMS-normalized
features, fed to any parameterization through ``replace_flat``."""

import numpy as np

from ..errors import ShapeMismatch
from .base import forward_ctx, vjp


def rms_norm(x, eps=1e-6):
    x = np.asarray(x, dtype=np.float64)
    return x / np.sqrt(np.mean(x * x) + eps)


def _check(x, W, b):
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x.ndim != 1 or W.ndim != 2 or W.shape[0] != x.shape[0] or b.shape != (W.shape[1],):
        raise ShapeMismatch(f"x {x.shape}, W {W.shape}, b {b.shape} do not conform")
    return x, W, b


def dynamic_head(x_norm, W, alpha, b):
    x, W, b = _check(x_norm, W, b)
    return alpha * (x @ W) + b


def dynamic_head_vjp(x_norm, W, alpha, g):
    """Gradients of ``<g, dynamic_head(...)>`` as ``(dx, dW, dalpha, db)``."""
    x, W, g = _check(x_norm, W, g)
    xW = x @ W
    return alpha * (W @ g), alpha * np.outer(x, g), float(xW @ g), g.copy()


def head_matrix(template, x_norm, W, alpha, b):
    """Mixing matrix for one token: the head's output replaces the learnable
    values of ``template``.  Returns ``(B, params, ctx)``."""
    raw = dynamic_head(x_norm, W, alpha, b)
    p = template.replace_flat(raw)
    B, ctx = forward_ctx(p)
    return B, p, ctx


def head_matrix_vjp(p, ctx, x_norm, W, alpha, dL_dB):
    return dynamic_head_vjp(x_norm, W, alpha, vjp(p, dL_dB, ctx))
