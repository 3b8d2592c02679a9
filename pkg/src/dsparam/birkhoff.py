"""Doubly stochastic matrices: validation, permutations, convex combinations,
products, gain metrics and the root-of-unity spectral region."""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BadSimplex, FactorialOverflow, NotDoublyStochastic, ShapeMismatch
from .numerics import eigvals

CLAMP_TOL = 1e-12
DS_TOL = 1e-10
MAX_ENUM_D = 8


@dataclass(frozen=True)
class ValidationReport:
    max_row_dev: float
    max_col_dev: float
    min_entry: float
    passed: bool

    @property
    def residual(self):
        """Largest violation of any doubly stochastic constraint."""
        return max(self.max_row_dev, self.max_col_dev, max(0.0, -self.min_entry))


def validate_ds(M, tol=DS_TOL):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {M.shape}")
    row = float(np.abs(M.sum(axis=1) - 1.0).max())
    col = float(np.abs(M.sum(axis=0) - 1.0).max())
    low = float(M.min())
    return ValidationReport(row, col, low, row <= tol and col <= tol and low >= -tol)


def ds_matrix(M, tol=DS_TOL):
    """Return ``M`` as a doubly stochastic float array.

    Entries in ``[-1e-12, 0)`` are clamped to zero; anything worse (or a row or
    column sum off by more than ``tol``) raises ``NotDoublyStochastic``.
    Nothing is renormalized.
    """
    M = np.array(M, dtype=np.float64, copy=True)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {M.shape}")
    if M.min() < -CLAMP_TOL:
        raise NotDoublyStochastic(f"negative entry {M.min():.3e}")
    M[M < 0] = 0.0
    rep = validate_ds(M, tol)
    if not rep.passed:
        raise NotDoublyStochastic(
            f"row deviation {rep.max_row_dev:.3e}, column deviation {rep.max_col_dev:.3e}")
    return M


def check_permutation(p):
    p = tuple(int(i) for i in p)
    if sorted(p) != list(range(len(p))):
        raise ValueError(f"{p} is not a permutation of 0..{len(p) - 1}")
    return p


def permutation_matrix(p):
    """0/1 matrix with ``P[i, p[i]] = 1``."""
    p = check_permutation(p)
    d = len(p)
    P = np.zeros((d, d))
    P[np.arange(d), p] = 1.0
    return P


@lru_cache(maxsize=None)
def all_permutations(d):
    """All permutations of ``range(d)`` in lexicographic one-line order, as a
    read-only ``(d!, d)`` integer array."""
    if d > MAX_ENUM_D:
        raise FactorialOverflow(f"enumerating {d}! permutations is not supported (d > {MAX_ENUM_D})")
    perms = np.array(list(itertools.permutations(range(d))), dtype=np.intp).reshape(-1, d)
    perms.setflags(write=False)
    return perms


@lru_cache(maxsize=None)
def _flat_index(d):
    idx = np.arange(d) * d + all_permutations(d)
    idx.setflags(write=False)
    return idx


def combine_permutations(weights, d):
    """``sum_k weights[k] * P_k`` over the lexicographic enumeration, no checks."""
    idx = _flat_index(d)
    w = np.repeat(np.asarray(weights, dtype=np.float64), d)
    return np.bincount(idx.ravel(), weights=w, minlength=d * d).reshape(d, d)


def permutation_inner(G, d):
    """``<G, P_k>`` for every permutation in the enumeration."""
    return np.asarray(G, dtype=np.float64).ravel()[_flat_index(d)].sum(axis=1)


def barycenter(d):
    return np.full((d, d), 1.0 / d)


def bvn_combine(weights, perms):
    weights = np.asarray(weights, dtype=np.float64)
    if len(perms) != len(weights) or len(perms) == 0:
        raise ShapeMismatch("need one weight per permutation")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise BadSimplex(f"weights must be nonnegative and sum to 1, sum = {weights.sum()!r}")
    mats = [permutation_matrix(p) for p in perms]
    d = mats[0].shape[0]
    if any(m.shape[0] != d for m in mats):
        raise ShapeMismatch("permutations of different sizes")
    B = np.zeros((d, d))
    for w, P in zip(weights, mats):
        if w != 0.0:
            B += w * P
    return B


def agm(M, direction="fwd"):
    """Amax gain magnitude: largest absolute row sum (fwd) or column sum (bwd)."""
    M = np.abs(np.asarray(M, dtype=np.float64))
    if direction == "fwd":
        return float(M.sum(axis=1).max())
    if direction == "bwd":
        return float(M.sum(axis=0).max())
    raise ValueError(f"direction must be 'fwd' or 'bwd', got {direction!r}")


def ds_product(chain):
    if len(chain) == 0:
        raise ShapeMismatch("empty chain")
    out = np.asarray(chain[0], dtype=np.float64)
    for M in chain[1:]:
        M = np.asarray(M, dtype=np.float64)
        if M.shape != out.shape:
            raise ShapeMismatch(f"shape {M.shape} does not match {out.shape}")
        out = out @ M
    return out


def second_eigenvalue_modulus(M):
    """Second largest eigenvalue modulus (0 for 1x1)."""
    mods = np.sort(np.abs(eigvals(M)))[::-1]
    return float(mods[1]) if len(mods) > 1 else 0.0


def root_polygon(k):
    """Vertices of the convex hull of the k-th roots of unity, counter-clockwise."""
    ang = 2.0 * math.pi * np.arange(k) / k
    return np.cos(ang) + 1j * np.sin(ang)


def _in_polygon(z, verts, tol):
    a = verts
    b = np.roll(verts, -1)
    edge = b - a
    rel = z - a
    cross = edge.real * rel.imag - edge.imag * rel.real
    # normalise so the slack is a distance
    return bool(np.all(cross / np.abs(edge) >= -tol))


def spectral_region_contains(d, z, tol=1e-9):
    """Whether ``z`` lies in the union, over k = 1..d, of the convex hulls of the
    k-th roots of unity.

    This is the nested-polygon picture of where doubly stochastic spectra live;
    it is used as an approximation of the true region, not a proof of it.
    """
    z = complex(z)
    if d < 1:
        raise ValueError("d must be >= 1")
    if abs(z - 1.0) <= tol:
        return True
    if d >= 2 and abs(z.imag) <= tol and abs(z.real) <= 1.0 + tol:
        return True
    for k in range(3, d + 1):
        if _in_polygon(z, root_polygon(k), tol):
            return True
    return False


def region_distance(d, z):
    """Euclidean distance from ``z`` to the polygon-union region (0 inside)."""
    z = complex(z)
    if spectral_region_contains(d, z, tol=0.0):
        return 0.0
    best = abs(z - 1.0)
    if d >= 2:
        x = min(max(z.real, -1.0), 1.0)
        best = min(best, abs(z - x))
    for k in range(3, d + 1):
        v = root_polygon(k)
        w = np.roll(v, -1)
        e = w - v
        t = np.clip(((z - v) * np.conj(e)).real / np.abs(e) ** 2, 0.0, 1.0)
        best = min(best, float(np.abs(z - (v + t * e)).min()))
    return best


def region_vertices(d):
    """Polygon vertex lists for plotting the region: ``{k: [[re, im], ...]}``."""
    out = {1: [[1.0, 0.0]]}
    if d >= 2:
        out[2] = [[-1.0, 0.0], [1.0, 0.0]]
    for k in range(3, d + 1):
        v = root_polygon(k)
        out[k] = [[float(x.real), float(x.imag)] for x in v]
    return out


def cycle_projection_3(B):
    """Project a 3x3 doubly stochastic matrix onto the plane spanned by
    the cyclic group {I, s, s^2}.

    Returns ``(point, coeffs)`` where ``coeffs[k] = trace((s^k)^T B) / 3`` and
    ``point = sum_k coeffs[k] * (sin(2 pi k / 3), cos(2 pi k / 3))``.
    """
    B = np.asarray(B, dtype=np.float64)
    if B.shape != (3, 3):
        raise ShapeMismatch(f"expected 3x3, got {B.shape}")
    sigma = permutation_matrix((1, 2, 0))
    coeffs = np.empty(3)
    power = np.eye(3)
    for k in range(3):
        coeffs[k] = np.trace(power.T @ B) / 3.0
        power = power @ sigma
    ang = 2.0 * math.pi * np.arange(3) / 3.0
    verts = np.stack([np.sin(ang), np.cos(ang)], axis=1)
    return coeffs @ verts, coeffs
