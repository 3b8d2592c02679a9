"""Orthogonal and unitary routes into the Birkhoff polytope.

A skew (or skew-Hermitian) generator goes through the Cayley transform and the
block-wise squared-norm map, which lands on a doubly stochastic matrix with no
iteration.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import NotOrthogonal, NotSkew, ShapeMismatch
from ..numerics import lu_factor, lu_solve
from .base import _vjp, as_vector, forward_ctx

SKEW_TOL = 1e-12
ORTHO_TOL = 1e-8


def n_pairs(n):
    return n * (n - 1) // 2


def skew_embed(theta, n):
    """Skew-symmetric matrix whose strict upper triangle is ``theta`` in
    row-major order over ``i < j``."""
    theta = as_vector(theta, n_pairs(n), "theta")
    X = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    X[iu] = theta
    X[iu[1], iu[0]] = -theta
    return X


def skew_from_square(v, n):
    """Alternative generator ``V - V^T`` from a dense n*n vector."""
    V = as_vector(v, n * n, "dense generator").reshape(n, n)
    return V - V.T


def cayley_ctx(A):
    """``Q = (I - A)(I + A)^{-1}`` plus ``M = (I + A)^{-1}``.

    Works for real skew or complex skew-Hermitian ``A``.
    """
    A = np.asarray(A)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ShapeMismatch(f"expected a square matrix, got {A.shape}")
    if np.abs(A + A.conj().T).max(initial=0.0) > SKEW_TOL:
        raise NotSkew("generator is not skew-symmetric")
    eye = np.eye(n, dtype=A.dtype)
    M = lu_solve(lu_factor(eye + A), eye)
    return (eye - A) @ M, M


def cayley(A):
    return cayley_ctx(A)[0]


def expand_blocks(G, s):
    return np.repeat(np.repeat(G, s, axis=0), s, axis=1)


def phi_project(Q, d, s):
    """Block-wise squared Frobenius norm of ``Q``, scaled by ``1/s``."""
    Q = np.asarray(Q)
    n = d * s
    if Q.shape != (n, n):
        raise ShapeMismatch(f"expected {n}x{n}, got {Q.shape}")
    if np.abs(Q.conj().T @ Q - np.eye(n)).max() > ORTHO_TOL:
        raise NotOrthogonal("input to the block-norm projection is not orthogonal")
    P = (Q.real ** 2 + Q.imag ** 2) if np.iscomplexobj(Q) else Q ** 2
    return P.reshape(d, s, d, s).sum(axis=(1, 3)) / s


def phi_vjp(Q, G, s):
    return (2.0 / s) * expand_blocks(G, s) * Q


def _pull_skew(grad_X, n):
    iu = np.triu_indices(n, 1)
    return grad_X[iu] - grad_X[iu[1], iu[0]]


@dataclass(frozen=True, eq=False)
class GoParams:
    d: int
    s: int
    theta: np.ndarray
    dense_generator: bool = False

    def __post_init__(self):
        if self.d < 1 or self.s < 1:
            raise ValueError("d and s must be >= 1")
        n = self.d * self.s
        size = n * n if self.dense_generator else n_pairs(n)
        object.__setattr__(self, "theta", as_vector(self.theta, size, "theta"))

    @property
    def flat(self):
        return self.theta.copy()

    def replace_flat(self, v):
        return GoParams(self.d, self.s, v, self.dense_generator)

    def generator(self):
        n = self.d * self.s
        if self.dense_generator:
            return skew_from_square(self.theta, n)
        return skew_embed(self.theta, n)


@forward_ctx.register
def _(p: GoParams):
    Q, M = cayley_ctx(p.generator())
    return phi_project(Q, p.d, p.s), (Q, M)


@_vjp.register
def _(p: GoParams, G, ctx):
    Q, M = ctx if ctx is not None else forward_ctx(p)[1]
    grad_Q = phi_vjp(Q, G, p.s)
    grad_X = -2.0 * M.T @ grad_Q @ M.T
    if p.dense_generator:
        return (grad_X - grad_X.T).ravel()
    return _pull_skew(grad_X, p.d * p.s)


def go_forward(p):
    return forward_ctx(p)[0]


def go_vjp(p, dL_dB, ctx=None):
    return _vjp(p, np.asarray(dL_dB, dtype=np.float64), ctx)


@dataclass(frozen=True, eq=False)
class UnitaryGoParams:
    """Skew-Hermitian generator ``X = R + iS``: ``R`` real skew from
    ``real_offdiag``, ``S`` real symmetric from ``imag_offdiag`` (both
    triangles) and ``imag_diag``."""

    d: int
    s: int
    imag_offdiag: np.ndarray
    imag_diag: np.ndarray
    real_offdiag: np.ndarray

    def __post_init__(self):
        n = self.d * self.s
        object.__setattr__(self, "imag_offdiag", as_vector(self.imag_offdiag, n_pairs(n), "imag_offdiag"))
        object.__setattr__(self, "imag_diag", as_vector(self.imag_diag, n, "imag_diag"))
        object.__setattr__(self, "real_offdiag", as_vector(self.real_offdiag, n_pairs(n), "real_offdiag"))

    @property
    def flat(self):
        return np.concatenate([self.imag_offdiag, self.imag_diag, self.real_offdiag])

    def replace_flat(self, v):
        n = self.d * self.s
        m = n_pairs(n)
        v = as_vector(v, 2 * m + n, "flat")
        return UnitaryGoParams(self.d, self.s, v[:m], v[m:m + n], v[m + n:])

    def generator(self):
        n = self.d * self.s
        iu = np.triu_indices(n, 1)
        S = np.diag(self.imag_diag)
        S[iu] = self.imag_offdiag
        S[iu[1], iu[0]] = self.imag_offdiag
        return skew_embed(self.real_offdiag, n) + 1j * S


@forward_ctx.register
def _(p: UnitaryGoParams):
    U, M = cayley_ctx(p.generator())
    return phi_project(U, p.d, p.s), (U, M)


@_vjp.register
def _(p: UnitaryGoParams, G, ctx):
    U, M = ctx if ctx is not None else forward_ctx(p)[1]
    grad_U = phi_vjp(U, G, p.s)
    Mh = M.conj().T
    grad_X = -2.0 * Mh @ grad_U @ Mh
    n = p.d * p.s
    iu = np.triu_indices(n, 1)
    re, im = grad_X.real, grad_X.imag
    return np.concatenate([
        im[iu] + im[iu[1], iu[0]],
        np.diag(im).copy(),
        re[iu] - re[iu[1], iu[0]],
    ])


def unitary_go_forward(p):
    return forward_ctx(p)[0]
