"""Alternating row/column normalization, in exponential and linear flavours.

The output is only approximately doubly stochastic after a finite number of
rounds. The backward pass replays the stored iterates in reverse.
"""

from dataclasses import dataclass

import numpy as np

from .base import _vjp, forward_ctx

LINEAR_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class SkParams:
    d: int
    raw: np.ndarray
    iterations: int = 20
    variant: str = "log"

    def __post_init__(self):
        raw = np.array(self.raw, dtype=np.float64, copy=True).reshape(self.d, self.d)
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.variant not in ("log", "linear"):
            raise ValueError(f"variant must be 'log' or 'linear', got {self.variant!r}")
        object.__setattr__(self, "raw", raw)

    @property
    def flat(self):
        return self.raw.ravel().copy()

    def replace_flat(self, v):
        return SkParams(self.d, np.reshape(v, (self.d, self.d)), self.iterations, self.variant)


def _normalize_rows(M, eps):
    r = M.sum(axis=1) + eps
    return M / r[:, None], r


def _normalize_rows_vjp(N, r, gN):
    return (gN - (gN * N).sum(axis=1, keepdims=True)) / r[:, None]


def sinkhorn_iterate(M, iterations, eps=0.0):
    """Run the rounds from a positive start ``M``; return the result and the
    per-round ``(N_row, r, N_col, c)`` record."""
    record = []
    for _ in range(iterations):
        N, r = _normalize_rows(M, eps)
        Mt, c = _normalize_rows(N.T, eps)
        M = Mt.T
        record.append((N, r, M, c))
    return M, record


@forward_ctx.register
def _(p: SkParams):
    if p.variant == "log":
        M0 = np.exp(p.raw - p.raw.max())
        eps = 0.0
    else:
        M0 = np.abs(p.raw)
        eps = LINEAR_EPS
    M, record = sinkhorn_iterate(M0, p.iterations, eps)
    return M, (M0, record)


@_vjp.register
def _(p: SkParams, G, ctx):
    M0, record = ctx if ctx is not None else forward_ctx(p)[1]
    g = G
    for N, r, M, c in reversed(record):
        g = _normalize_rows_vjp(M.T, c, g.T).T
        g = _normalize_rows_vjp(N, r, g)
    if p.variant == "log":
        return (g * M0).ravel()
    return (g * np.sign(p.raw)).ravel()


def sk_forward(p):
    return forward_ctx(p)[0]


def sk_vjp(p, dL_dB, ctx=None):
    return _vjp(p, np.asarray(dL_dB, dtype=np.float64), ctx).reshape(p.d, p.d)
