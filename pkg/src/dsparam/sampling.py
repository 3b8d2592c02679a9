"""Seeded samplers for doubly stochastic targets, Haar matrices and sparse
inputs.

Random streams are numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=(stream,))``, so ``(seed, stream)`` fixes the
sequence on every platform numpy supports.
"""

import math

import numpy as np

from .birkhoff import all_permutations, combine_permutations, validate_ds
from .errors import FactorialOverflow, NoConvergence
from .params.orthostochastic import phi_project
from .params.sinkhorn import sinkhorn_iterate

DS_METHODS = ("sk", "haar_orth", "haar_unit", "bvn_dirichlet")
TARGET_SK_ROUNDS = 50
TARGET_SK_TOL = 1e-10
TARGET_SK_MAX_ROUNDS = 100_000


def make_rng(seed, stream=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def sample_haar_orthogonal(n, rng):
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def sample_haar_unitary(n, rng):
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def dirichlet_ones(k, rng):
    """Uniform point on the (k-1)-simplex from normalized -log(U) variates."""
    e = -np.log(1.0 - rng.random(k))
    return e / e.sum()


def _sk_target(M):
    # near-singular draws converge slowly, so keep going in blocks past the
    # first 50 rounds; no extra random numbers are consumed
    for _ in range(TARGET_SK_MAX_ROUNDS // TARGET_SK_ROUNDS):
        M, _ = sinkhorn_iterate(M, TARGET_SK_ROUNDS)
        if validate_ds(M).residual <= TARGET_SK_TOL:
            return M
    raise NoConvergence(f"sk target did not reach {TARGET_SK_TOL} in {TARGET_SK_MAX_ROUNDS} rounds")


def sample_ds(d, method, rng, s=1):
    if method == "sk":
        return _sk_target(rng.random((d, d)))
    if method == "haar_orth":
        return phi_project(sample_haar_orthogonal(d * s, rng), d, s)
    if method == "haar_unit":
        return phi_project(sample_haar_unitary(d * s, rng), d, s)
    if method == "bvn_dirichlet":
        if d > 8:
            raise FactorialOverflow(f"Dirichlet weights over {d}! permutations (d > 8)")
        return combine_permutations(dirichlet_ones(len(all_permutations(d)), rng), d)
    raise ValueError(f"unknown sampler {method!r}; expected one of {DS_METHODS}")


def sample_inputs(count, dim, sparsity, rng):
    """``count`` vectors of length ``dim``; each coordinate is 0 with
    probability ``sparsity`` and Uniform(0, 1) otherwise."""
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("sparsity must lie in [0, 1)")
    X = rng.random((count, dim))
    if sparsity > 0.0:
        X[rng.random((count, dim)) < sparsity] = 0.0
    return X
