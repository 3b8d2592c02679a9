"""Dispatch plumbing shared by every parameterization.

Each parameter class exposes ``flat`` (a 1-D float array of its learnable
values) and ``replace_flat(v)``.  ``forward_ctx`` returns the output matrix
together with whatever intermediates the matching ``vjp`` can reuse; passing
that context back is optional, the vjp recomputes it otherwise.
"""

from functools import singledispatch

import numpy as np

from ..errors import LengthMismatch


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax_vjp(alpha, g):
    return alpha * (g - alpha @ g)


def as_vector(v, n, name):
    v = np.array(v, dtype=np.float64, copy=True).ravel()
    if v.shape[0] != n:
        raise LengthMismatch(f"{name}: expected length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: non-finite entries")
    return v


@singledispatch
def forward_ctx(p):
    """Return ``(B, ctx)`` for parameters ``p``."""
    raise TypeError(f"no forward registered for {type(p).__name__}")


@singledispatch
def _vjp(p, G, ctx):
    raise TypeError(f"no vjp registered for {type(p).__name__}")


def forward(p):
    return forward_ctx(p)[0]


def vjp(p, G, ctx=None, use_fd=False):
    """Gradient of ``<G, forward(p)>`` with respect to ``p.flat``.

    ``use_fd`` swaps in central finite differences; it exists for
    cross-checking only and is far slower.
    """
    G = np.asarray(G, dtype=np.float64)
    if use_fd:
        return fd_vjp(p, G)
    return _vjp(p, G, ctx)


def fd_vjp(p, G, step=1e-6):
    x = p.flat
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        hi = np.sum(G * forward(p.replace_flat(x + e)))
        lo = np.sum(G * forward(p.replace_flat(x - e)))
        out[k] = (hi - lo) / (2.0 * step)
    return out
