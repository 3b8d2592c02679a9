"""Softmax-weighted average of several inner parameterizations."""

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from .base import _vjp, as_vector, forward_ctx, softmax, softmax_vjp


@dataclass(frozen=True, eq=False)
class AvgParams:
    beta_logits: np.ndarray
    base: tuple

    def __post_init__(self):
        base = tuple(self.base)
        if not base:
            raise ValueError("need at least one inner parameter set")
        if len({b.d for b in base}) != 1:
            raise ShapeMismatch("inner parameter sets disagree on d")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "beta_logits", as_vector(self.beta_logits, len(base), "beta_logits"))

    @property
    def d(self):
        return self.base[0].d

    @property
    def flat(self):
        return np.concatenate([self.beta_logits] + [b.flat for b in self.base])

    def replace_flat(self, v):
        v = np.asarray(v, dtype=np.float64)
        m = len(self.base)
        sizes = [b.flat.size for b in self.base]
        v = as_vector(v, m + sum(sizes), "flat")
        chunks = np.split(v[m:], np.cumsum(sizes)[:-1])
        return AvgParams(v[:m], tuple(b.replace_flat(c) for b, c in zip(self.base, chunks)))


@forward_ctx.register
def _(p: AvgParams):
    beta = softmax(p.beta_logits)
    parts = [forward_ctx(b) for b in p.base]
    B = sum(w * Bi for w, (Bi, _c) in zip(beta, parts))
    return B, (beta, parts)


@_vjp.register
def _(p: AvgParams, G, ctx):
    beta, parts = ctx if ctx is not None else forward_ctx(p)[1]
    d_beta = np.array([np.sum(G * Bi) for Bi, _c in parts])
    inner = [_vjp(b, w * G, c) for b, w, (_Bi, c) in zip(p.base, beta, parts)]
    return np.concatenate([softmax_vjp(beta, d_beta)] + inner)


def avg_forward(p):
    return forward_ctx(p)[0]


def avg_vjp(p, dL_dB, ctx=None):
    return _vjp(p, np.asarray(dL_dB, dtype=np.float64), ctx)
