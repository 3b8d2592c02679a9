"""Convex combinations of permutation matrices, alone and as Kronecker
products of small factors."""

import math
from dataclasses import dataclass
from string import ascii_letters

import numpy as np

from ..birkhoff import MAX_ENUM_D, combine_permutations, permutation_inner
from ..errors import FactorialOverflow, FactorSizeMismatch, LengthMismatch
from ..numerics import kron
from .base import _vjp, as_vector, forward_ctx, softmax, softmax_vjp


def _check_d(d):
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > MAX_ENUM_D:
        raise FactorialOverflow(f"{d}! logits is too many (d > {MAX_ENUM_D})")


@dataclass(frozen=True, eq=False)
class LiteParams:
    d: int
    logits: np.ndarray

    def __post_init__(self):
        _check_d(self.d)
        object.__setattr__(self, "logits", as_vector(self.logits, math.factorial(self.d), "logits"))

    @property
    def flat(self):
        return self.logits.copy()

    def replace_flat(self, v):
        return LiteParams(self.d, v)


@forward_ctx.register
def _(p: LiteParams):
    alpha = softmax(p.logits)
    return combine_permutations(alpha, p.d), alpha


@_vjp.register
def _(p: LiteParams, G, ctx):
    alpha = ctx if ctx is not None else softmax(p.logits)
    return softmax_vjp(alpha, permutation_inner(G, p.d))


def lite_forward(p):
    return forward_ctx(p)[0]


def lite_vjp(p, dL_dB, ctx=None):
    return _vjp(p, np.asarray(dL_dB, dtype=np.float64), ctx)


def default_factor_sizes(d):
    """Prime factorization of ``d`` in ascending order, e.g. 8 -> (2, 2, 2)."""
    out, k = [], 2
    while d > 1:
        while d % k == 0:
            out.append(k)
            d //= k
        k += 1
    return tuple(out) or (1,)


@dataclass(frozen=True, eq=False)
class KromParams:
    d: int
    factor_sizes: tuple
    factor_logits: tuple

    def __post_init__(self):
        sizes = tuple(int(i) for i in self.factor_sizes)
        if math.prod(sizes) != self.d:
            raise FactorSizeMismatch(f"factor sizes {sizes} do not multiply to {self.d}")
        if len(self.factor_logits) != len(sizes):
            raise LengthMismatch("need one logit vector per factor")
        for i in sizes:
            _check_d(i)
        logits = tuple(as_vector(z, math.factorial(i), f"factor {k} logits")
                       for k, (i, z) in enumerate(zip(sizes, self.factor_logits)))
        object.__setattr__(self, "factor_sizes", sizes)
        object.__setattr__(self, "factor_logits", logits)

    @property
    def flat(self):
        return np.concatenate(self.factor_logits)

    def replace_flat(self, v):
        return KromParams(self.d, self.factor_sizes, split_factor_flat(v, self.factor_sizes))

    def factors(self):
        return [LiteParams(i, z) for i, z in zip(self.factor_sizes, self.factor_logits)]


def split_factor_flat(v, sizes):
    lengths = [math.factorial(i) for i in sizes]
    v = as_vector(v, sum(lengths), "flat")
    return tuple(np.split(v, np.cumsum(lengths)[:-1]))


@forward_ctx.register
def _(p: KromParams):
    parts = [forward_ctx(f) for f in p.factors()]
    B = parts[0][0]
    for Bk, _a in parts[1:]:
        B = kron(B, Bk)
    return B, parts


def _kron_adjoint(G, mats):
    """``dL/dB_k`` for ``B = B_1 (x) ... (x) B_K`` given ``G = dL/dB``."""
    K = len(mats)
    sizes = [m.shape[0] for m in mats]
    rows, cols = ascii_letters[:K], ascii_letters[K:2 * K]
    Gt = G.reshape(sizes + sizes)
    out = []
    for k in range(K):
        others = [f"{rows[l]}{cols[l]}" for l in range(K) if l != k]
        spec = ",".join([rows + cols] + others) + f"->{rows[k]}{cols[k]}"
        out.append(np.einsum(spec, Gt, *[mats[l] for l in range(K) if l != k]))
    return out


@_vjp.register
def _(p: KromParams, G, ctx):
    parts = ctx if ctx is not None else forward_ctx(p)[1]
    grads = _kron_adjoint(G, [B for B, _a in parts])
    return np.concatenate([
        _vjp(f, g, alpha) for f, g, (_B, alpha) in zip(p.factors(), grads, parts)])


def krom_forward(p):
    return forward_ctx(p)[0]


def krom_vjp(p, dL_dB, ctx=None):
    """Per-factor logit gradients, as a tuple aligned with ``p.factor_logits``."""
    flat = _vjp(p, np.asarray(dL_dB, dtype=np.float64), ctx)
    return split_factor_flat(flat, p.factor_sizes)
