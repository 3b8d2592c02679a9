"""Synthetic objectives over a learned mixing matrix ``H``.

Each task exposes ``loss_grad(H) -> (loss, dL/dH)``.  Stream mixing and the
read-out task keep only sufficient statistics of their frozen datasets, so an
evaluation costs O(d^2 D) once at construction and O(d^3) afterwards.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .birkhoff import ds_matrix
from .errors import DegenerateEigenvalueWarning, ShapeMismatch
from .numerics import eigvals
from .params import forward_ctx, vjp
from .params.base import as_vector
from .sampling import sample_ds, sample_inputs

UNIFORM_SECOND_MOMENT = 1.0 / 3.0


def _square_like(H, d):
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (d, d):
        raise ShapeMismatch(f"expected {d}x{d}, got {H.shape}")
    return H


@dataclass(frozen=True, eq=False)
class StreamMixTask:
    """Inputs ``X[j]`` (d x D) and frozen noisy targets
    ``Y[j] = (T + Xi[j]) X[j] + xi[j]`` with ``xi ~ eps * U(0, 1)`` and
    ``Xi[j] ~ Normal(0, sigma_p^2)`` drawn independently per sample."""

    d: int
    D: int
    X: np.ndarray
    Y: np.ndarray
    T: np.ndarray
    eps: float
    sparsity: float
    sigma_p: float

    def __post_init__(self):
        if self.X.shape != self.Y.shape or self.X.shape[1:] != (self.d, self.D):
            raise ShapeMismatch(f"X {self.X.shape} and Y {self.Y.shape} do not match d={self.d}, D={self.D}")
        object.__setattr__(self, "_C", np.einsum("jab,jcb->ac", self.X, self.X))
        object.__setattr__(self, "_R", np.einsum("jab,jcb->ac", self.Y, self.X))
        object.__setattr__(self, "_yy", float(np.sum(self.Y * self.Y)))
        object.__setattr__(self, "_norm", float(self.X.shape[0] * self.d * self.D))

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def input_second_moment(self):
        """E[v^2] of one input coordinate under the sampling distribution."""
        return (1.0 - self.sparsity) * UNIFORM_SECOND_MOMENT

    def loss_grad(self, H):
        H = _square_like(H, self.d)
        HC = H @ self._C
        loss = (np.sum(HC * H) - 2.0 * np.sum(self._R * H) + self._yy) / self._norm
        return max(loss, 0.0), 2.0 * (HC - self._R) / self._norm

    def loss_direct(self, H):
        """Reference evaluation straight from the samples."""
        H = _square_like(H, self.d)
        resid = np.einsum("ab,jbc->jac", H, self.X) - self.Y
        return float(np.sum(resid * resid)) / self._norm


def make_stream_mix(d, rng, D=16, n_samples=100, eps=0.1, sparsity=0.0, sigma_p=0.0,
                    target=None, target_method="sk"):
    T = ds_matrix(sample_ds(d, target_method, rng)) if target is None else np.asarray(target, dtype=np.float64)
    X = np.stack([sample_inputs(d, D, sparsity, rng) for _ in range(n_samples)])
    Y = np.einsum("ab,jbc->jac", T, X)
    if sigma_p > 0.0:
        Xi = sigma_p * rng.standard_normal((n_samples, d, d))
        Y = Y + np.einsum("jab,jbc->jac", Xi, X)
    Y = Y + eps * rng.random(Y.shape)
    return StreamMixTask(d, D, X, Y, T, float(eps), float(sparsity), float(sigma_p))


def projected_floor(d, eps, sigma_p, sigma_v2, structural=0.0):
    """Predicted per-coordinate loss floor.

    ``sigma_v2`` is the second moment E[v^2] of one input coordinate and
    ``structural`` the squared Frobenius distance from the target to the
    reachable set.
    """
    return d * sigma_p ** 2 * sigma_v2 + eps ** 2 / 3.0 + sigma_v2 * structural / d


@dataclass(frozen=True, eq=False)
class MatrixDistanceTask:
    d: int
    B: np.ndarray
    E: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "B", ds_matrix(self.B))
        E = np.zeros((self.d, self.d)) if self.E is None else _square_like(self.E, self.d)
        object.__setattr__(self, "E", E)

    def loss_grad(self, H):
        R = _square_like(H, self.d) - self.B - self.E
        return float(np.sum(R * R)), 2.0 * R


def _null_vector(A):
    _u, _s, vh = np.linalg.svd(A)
    return vh[-1].conj()


@dataclass(frozen=True)
class SpectralTargetTask:
    d: int
    target: complex

    def __post_init__(self):
        e = complex(self.target)
        if abs(e.real) > 1.0 or abs(e.imag) > 1.0:
            raise ValueError("target must lie in the square [-1, 1] x [-1, 1]")
        object.__setattr__(self, "target", e)

    def loss_only(self, H):
        return float(np.min(np.abs(eigvals(H) - self.target) ** 2))

    def loss_grad(self, H, fd_step=1e-6):
        H = _square_like(H, self.d)
        lam = eigvals(H)
        dist = np.abs(lam - self.target)
        k = int(np.argmin(dist))
        loss = float(dist[k] ** 2)
        if self.d == 1:
            return loss, np.array([[2.0 * (H[0, 0] - self.target.real)]])
        others = np.delete(dist, k)
        degenerate = others.min() - dist[k] < 1e-9
        if not degenerate:
            A = H - lam[k] * np.eye(self.d)
            v = _null_vector(A)
            u = _null_vector(A.conj().T)
            uv = np.vdot(u, v)
            degenerate = abs(uv) < 1e-8
        if degenerate:
            warnings.warn("tied or defective eigenvalue; using finite differences",
                          DegenerateEigenvalueWarning, stacklevel=2)
            return loss, self._fd_grad(H, fd_step)
        G = 2.0 * np.real(np.conj(lam[k] - self.target) * np.outer(u.conj(), v) / uv)
        return loss, G

    def _fd_grad(self, H, step):
        G = np.empty_like(H)
        for p in range(self.d):
            for q in range(self.d):
                Hp, Hm = H.copy(), H.copy()
                Hp[p, q] += step
                Hm[p, q] -= step
                G[p, q] = (self.loss_only(Hp) - self.loss_only(Hm)) / (2.0 * step)
        return G


@dataclass(frozen=True, eq=False)
class ReadoutParams:
    """A mixing parameterization plus an unconstrained 1 x d read-out row."""

    mix: object
    pre: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pre", as_vector(self.pre, self.mix.d, "pre"))

    @property
    def d(self):
        return self.mix.d

    @property
    def flat(self):
        return np.concatenate([self.mix.flat, self.pre])

    def replace_flat(self, v):
        n = self.mix.flat.size
        return ReadoutParams(self.mix.replace_flat(v[:n]), v[n:])


@dataclass(frozen=True, eq=False)
class SymmetryBreakTask:
    """Scalar read-out ``pre @ H @ X[j]`` fit to ``P @ (T X[j] + xi[j])``.

    With ``learn_pre`` false the read-out row is pinned to ``P``.  Losses are
    normalized by ``n_samples * D``.
    """

    d: int
    D: int
    X: np.ndarray
    y: np.ndarray
    T: np.ndarray
    P: np.ndarray
    learn_pre: bool = True

    def __post_init__(self):
        object.__setattr__(self, "_C", np.einsum("jab,jcb->ac", self.X, self.X))
        object.__setattr__(self, "_r", np.einsum("jab,jb->a", self.X, self.y))
        object.__setattr__(self, "_yy", float(np.sum(self.y * self.y)))
        object.__setattr__(self, "_norm", float(self.X.shape[0] * self.D))

    def loss_grads(self, H_res, H_pre):
        H_res = _square_like(H_res, self.d)
        h = as_vector(H_pre, self.d, "H_pre")
        a = h @ H_res
        Ca = self._C @ a
        loss = (a @ Ca - 2.0 * a @ self._r + self._yy) / self._norm
        g = 2.0 * (Ca - self._r) / self._norm
        return max(float(loss), 0.0), np.outer(h, g), H_res @ g

    def loss_grad(self, H):
        loss, G, _ = self.loss_grads(H, self.P)
        return loss, G

    def init(self, mix):
        return ReadoutParams(mix, self.P) if self.learn_pre else mix

    def objective(self, p):
        if isinstance(p, ReadoutParams):
            B, ctx = forward_ctx(p.mix)
            loss, G, g_pre = self.loss_grads(B, p.pre)
            return loss, np.concatenate([vjp(p.mix, G, ctx), g_pre])
        B, ctx = forward_ctx(p)
        loss, G, _ = self.loss_grads(B, self.P)
        return loss, vjp(p, G, ctx)


def make_symmetry_break(d, rng, D=16, n_samples=100, eps=0.1, learn_pre=True,
                        target=None, target_method="sk"):
    T = ds_matrix(sample_ds(d, target_method, rng)) if target is None else np.asarray(target, dtype=np.float64)
    P = rng.random(d)
    X = np.stack([sample_inputs(d, D, 0.0, rng) for _ in range(n_samples)])
    clean = np.einsum("ab,jbc->jac", T, X) + eps * rng.random((n_samples, d, D))
    y = np.einsum("a,jac->jc", P, clean)
    return SymmetryBreakTask(d, D, X, y, T, P, learn_pre)
