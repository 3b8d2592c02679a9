"""Post-hoc measurements: spectral reach, depth decoupling, geodesic and KL
distances, the lite gradient decomposition, and parameter/FLOP counts."""

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .birkhoff import all_permutations, ds_product, second_eigenvalue_modulus
from .errors import FactorialOverflow, FactorSizeMismatch, NotRecoverable
from .numerics import eigvals, rotation_log_frobenius
from .optim import train
from .params import LiteParams, default_factor_sizes, forward, lite_vjp, random_params, softmax
from .sampling import make_rng, sample_ds
from .tasks import SpectralTargetTask

# --------------------------------------------------------------------------
# spectral reach


@dataclass
class SpectrumSet:
    d: int
    method: str
    points: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    runs: list = field(default_factory=list)

    def add(self, lam, target, run):
        for z in lam:
            self.points.append(complex(z))
            self.targets.append(complex(target))
            self.runs.append(int(run))

    def rows(self):
        """``(re, im, target_re, target_im, run)`` tuples."""
        return [(z.real, z.imag, t.real, t.imag, r)
                for z, t, r in zip(self.points, self.targets, self.runs)]

    @property
    def n_runs(self):
        return len(set(self.runs))


def _reach_one(args):
    method, d, kwargs, target, config, seed, run = args
    task = SpectralTargetTask(d, target)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = train(task, lambda rng: random_params(method, d, rng, **kwargs),
                      _with_seed(config, seed, run))
    return run, target, eigvals(forward(trace.params))


def _with_seed(config, seed, run):
    return replace(config, seed=int(np.random.SeedSequence((seed, run)).generate_state(1)[0]))


def spectral_reach(method, d, n_targets, config, seed=0, s=1, factor_sizes=None, jobs=1,
                   init_scale=1.0):
    """Train one parameter set per random target eigenvalue (uniform on the
    square [-1, 1]^2) and collect the spectra of the trained matrices.

    Each run starts from a random draw with Normal(0, init_scale^2) values
    rather than near the identity: a real eigenvalue only moves along the real
    axis under gradient flow, so starts with all-real spectra rarely leave it.
    """
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    rng = make_rng(seed, 0)
    targets = rng.uniform(-1.0, 1.0, n_targets) + 1j * rng.uniform(-1.0, 1.0, n_targets)
    kwargs = {"scale": init_scale}
    if method in ("go", "unitary", "avg_go"):
        kwargs["s"] = s
    if factor_sizes and method in ("krom", "avg_krom"):
        kwargs["factor_sizes"] = tuple(factor_sizes)
    jobs_list = [(method, d, kwargs, complex(t), config, seed, k) for k, t in enumerate(targets)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_reach_one, jobs_list, chunksize=max(1, n_targets // (4 * jobs))))
    else:
        results = [_reach_one(a) for a in jobs_list]
    out = SpectrumSet(d, method)
    for run, target, lam in sorted(results, key=lambda r: r[0]):
        out.add(lam, target, run)
    return out


# --------------------------------------------------------------------------
# depth


def depth_decoupling(d, method, depth, trials, rng, s=1):
    """Median over trials of |lambda_2| for every prefix product length."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    vals = np.empty((trials, depth))
    for t in range(trials):
        prod = None
        for k in range(depth):
            M = sample_ds(d, method, rng, s=s)
            prod = M if prod is None else ds_product([prod, M])
            vals[t, k] = second_eigenvalue_modulus(prod)
    return np.median(vals, axis=0)


# --------------------------------------------------------------------------
# geodesic and KL


def recover_orthogonal(M, tol=1e-3):
    """Signed elementwise square root of ``M`` that is orthogonal.

    Row 0 is taken all-positive and each later row has its first nonzero entry
    positive; the remaining signs are found by backtracking.  The last row is
    negated if needed so the determinant is +1.
    """
    M = np.asarray(M, dtype=np.float64)
    d = M.shape[0]
    A = np.sqrt(np.clip(M, 0.0, None))
    rows = [A[0]]

    def candidates(a):
        nz = np.flatnonzero(a > 1e-9)
        free = nz[1:]
        for bits in itertools.product((1.0, -1.0), repeat=len(free)):
            r = a.copy()
            r[free] *= bits
            yield r

    def extend(i):
        if i == d:
            return True
        for r in candidates(A[i]):
            if all(abs(r @ q) <= tol for q in rows):
                rows.append(r)
                if extend(i + 1):
                    return True
                rows.pop()
        return False

    if not extend(1):
        raise NotRecoverable("no sign pattern makes the square root orthogonal")
    R = np.array(rows)
    if np.abs(R.T @ R - np.eye(d)).max() > tol:
        raise NotRecoverable("recovered matrix misses orthogonality tolerance")
    if np.linalg.det(R) < 0:
        R[-1] *= -1.0
    return R


def _sign_vectors(d, fix_first):
    free = d - 1 if fix_first else d
    S = np.array(list(itertools.product((1.0, -1.0), repeat=free))).reshape(-1, free)
    if fix_first:
        S = np.hstack([np.ones((S.shape[0], 1)), S])
    return S


EXHAUSTIVE_GAUGE_D = 5
SCREENED_GAUGES = 16


def geodesic_distance(W, T, tol=1e-3):
    """Rotation angle (radians) between orthogonal lifts of ``W`` and ``T``,
    minimized over the sign gauge ``D1 R D2``."""
    W = np.asarray(W, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    d = W.shape[0]
    if T.shape != W.shape:
        raise ValueError("W and T must have the same shape")
    if d > 8:
        raise ValueError("gauge search is limited to d <= 8")
    RW, RT = recover_orthogonal(W, tol), recover_orthogonal(T, tol)
    S1, S2 = _sign_vectors(d, True), _sign_vectors(d, False)
    K = RW * RT
    traces = S1 @ K @ S2.T
    # both lifts have det +1, so only gauges with det(D1) det(D2) = +1 give rotations
    parity = np.outer(np.prod(S1, axis=1), np.prod(S2, axis=1)) > 0
    pairs = np.argwhere(parity)
    if d > EXHAUSTIVE_GAUGE_D:
        order = np.argsort(-traces[parity], kind="stable")[:SCREENED_GAUGES]
        pairs = pairs[order]
    best = math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for a, b in pairs:
            Rel = RW.T @ (S1[a][:, None] * RT * S2[b][None, :])
            best = min(best, rotation_log_frobenius(Rel, tol=10 * tol))
    return best / math.sqrt(2.0)


def kl_rows(P, T, floor=1e-12):
    P = np.maximum(np.asarray(P, dtype=np.float64), floor)
    T = np.asarray(T, dtype=np.float64)
    safe = np.where(T > 0, T, 1.0)
    terms = np.where(T > 0, T * np.log(safe / P), 0.0)
    return float(terms.sum(axis=1).mean())


# --------------------------------------------------------------------------
# lite gradient anatomy


def permutation_gram(d):
    perms = all_permutations(d)
    return (perms[:, None, :] == perms[None, :, :]).sum(axis=2).astype(np.float64)


def lite_gradient_decomposition(z, target, E):
    """Split ``dL/dalpha_i`` for ``L = ||B - P_target - E||^2 / d^2`` into its
    four inner-product terms and return the gated logit gradient.

    Returns a dict of per-index arrays ``self_correction``, ``signal``,
    ``crosstalk``, ``noise_floor``, plus ``dL_dalpha``, ``dL_dz`` and the scalar
    ``gated_target``.
    """
    z = np.asarray(z, dtype=np.float64)
    d = next(k for k in range(1, 7) if math.factorial(k) == z.size)
    perms = all_permutations(d)
    gram = permutation_gram(d)
    E = np.asarray(E, dtype=np.float64)
    alpha = softmax(z)
    self_corr = alpha * np.diag(gram)
    signal = gram[target]
    crosstalk = gram @ alpha - self_corr
    noise = E[np.arange(d), perms].sum(axis=1)
    dalpha = (2.0 / d ** 2) * (self_corr - signal + crosstalk - noise)
    dz = alpha * (dalpha - alpha @ dalpha)
    return {
        "self_correction": self_corr,
        "signal": signal,
        "crosstalk": crosstalk,
        "noise_floor": noise,
        "dL_dalpha": dalpha,
        "dL_dz": dz,
        "gated_target": float(dz[target]),
    }


def lite_distance_grad(z, target, E):
    """Same gradient through the generic vjp, for cross-checking."""
    z = np.asarray(z, dtype=np.float64)
    d = next(k for k in range(1, 7) if math.factorial(k) == z.size)
    p = LiteParams(d, z)
    Pt = np.zeros((d, d))
    Pt[np.arange(d), all_permutations(d)[target]] = 1.0
    return lite_vjp(p, (2.0 / d ** 2) * (forward(p) - Pt - np.asarray(E, dtype=np.float64)))


# --------------------------------------------------------------------------
# counts


@dataclass(frozen=True)
class CountConfig:
    d: int
    s: int = 1
    C: int = 1
    S: int = 20
    factor_sizes: tuple = None

    def sizes(self):
        return tuple(self.factor_sizes) if self.factor_sizes else default_factor_sizes(self.d)


COUNT_METHODS = ("mhc", "go", "lite", "krom", "krom_go")
FLOP_METHODS = ("mhc", "go", "lite", "krom")


def param_count(method, cfg):
    d, s, C = cfg.d, cfg.s, cfg.C
    head = d * C + 1
    tail = 2 * d * d * C + 2 * d + 3
    if method == "mhc":
        core = d * d
    elif method == "go":
        n = d * s
        core = n * (n - 1) // 2
    elif method == "lite":
        if d > 12:
            raise FactorialOverflow("lite parameter count is only evaluated for d <= 12")
        core = math.factorial(d)
    elif method == "krom":
        core = sum(math.factorial(i) for i in _checked_sizes(cfg))
    elif method == "krom_go":
        core = sum(s * i * (s * i - 1) // 2 for i in _checked_sizes(cfg))
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {COUNT_METHODS}")
    return head * core + tail


def _checked_sizes(cfg):
    sizes = cfg.sizes()
    if math.prod(sizes) != cfg.d:
        raise FactorSizeMismatch(f"factor sizes {sizes} do not multiply to {cfg.d}")
    return sizes


def flop_estimate(method, cfg):
    d, s, C = cfg.d, cfg.s, cfg.C
    if method == "mhc":
        return 4.0 * C * cfg.S * d * d
    if method == "go":
        n = d * s
        return (8.0 / 3.0) * C * n ** 3 + 4.0 * C * n ** 2
    if method == "lite":
        f = math.factorial(d)
        return 3.0 * C * f + 2.0 * C * d * d * f
    if method == "krom":
        sizes = _checked_sizes(cfg)
        if len(set(sizes)) != 1 or sizes[0] < 2:
            raise FactorSizeMismatch("the krom FLOP estimate needs equal factor sizes >= 2")
        i, K = sizes[0], len(sizes)
        f = math.factorial(i)
        return (3.0 * C * K * f + 2.0 * C * K * i * i * f
                + C * (i ** (2 * K + 2) - i ** 4) / (i * i - 1))
    raise ValueError(f"unknown method {method!r}; expected one of {FLOP_METHODS}")
