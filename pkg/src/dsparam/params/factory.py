"""Build parameter sets by method name: training initializations and random
draws for property checks."""

import math

import numpy as np

from .average import AvgParams
from .orthostochastic import GoParams, UnitaryGoParams, n_pairs
from .permutations import KromParams, LiteParams, default_factor_sizes
from .sinkhorn import SkParams

METHODS = ("go", "lite", "krom", "sk", "sk_linear", "avg_go", "avg_krom", "unitary")


def _krom_sizes(d, factor_sizes):
    return tuple(factor_sizes) if factor_sizes else default_factor_sizes(d)


def init_params(method, d, rng, s=1, factor_sizes=None, init_scale=0.1,
                sk_iterations=20, n_avg=2):
    """Training start point.

    go and unitary draw their generator from Normal(0, init_scale^2), which
    sits near the identity.  lite, krom and log-sk start at the barycenter.
    Averages start with equal weights over independently drawn inner sets.
    """
    n = d * s
    if method == "go":
        return GoParams(d, s, init_scale * rng.standard_normal(n_pairs(n)))
    if method == "unitary":
        m = n_pairs(n)
        return UnitaryGoParams(d, s, *(init_scale * rng.standard_normal(k) for k in (m, n, m)))
    if method == "lite":
        return LiteParams(d, np.zeros(math.factorial(d)))
    if method == "krom":
        sizes = _krom_sizes(d, factor_sizes)
        return KromParams(d, sizes, [np.zeros(math.factorial(i)) for i in sizes])
    if method == "sk":
        return SkParams(d, np.zeros((d, d)), sk_iterations, "log")
    if method == "sk_linear":
        return SkParams(d, np.ones((d, d)), sk_iterations, "linear")
    if method == "avg_go":
        inner = [init_params("go", d, rng, s=s, init_scale=init_scale) for _ in range(n_avg)]
        return AvgParams(np.zeros(n_avg), inner)
    if method == "avg_krom":
        # zero logits would make every inner factor the barycenter, so draw them
        inner = [random_params("krom", d, rng, factor_sizes=factor_sizes, scale=init_scale)
                 for _ in range(n_avg)]
        return AvgParams(np.zeros(n_avg), inner)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def random_params(method, d, rng, s=1, factor_sizes=None, scale=1.0,
                  sk_iterations=20, n_avg=2):
    """Parameters with every learnable value drawn from Normal(0, scale^2)."""
    p = init_params(method, d, rng, s=s, factor_sizes=factor_sizes,
                    sk_iterations=sk_iterations, n_avg=n_avg)
    return p.replace_flat(scale * rng.standard_normal(p.flat.size))
