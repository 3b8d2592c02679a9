"""Dense matrix primitives: LU solves, nonsymmetric eigenvalues, Kronecker
products and the Frobenius norm of the principal logarithm of a rotation.

Everything works on plain ``numpy`` arrays in float64 (complex128 where the
input is complex). The eigenvalue solver is the classic
balance -> Householder-Hessenberg -> Francis double-shift QR pipeline.
"""

import math
import warnings

import numpy as np

from .errors import (
    NearPiBranchWarning,
    NoConvergence,
    NotOrthogonal,
    ShapeMismatch,
    SingularMatrix,
)

PIVOT_RTOL = 1e-14
DEFLATE_TOL = 1e-12
MAX_KRON_DIM = 4096
_EPS = np.finfo(np.float64).eps


def _square(A, name="A"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty square matrix, got {A.shape}")
    return A


def lu_factor(A):
    """Partial-pivot LU factorization.

    Returns ``(LU, perm)`` with unit-lower ``L`` and upper ``U`` packed in one
    array and ``perm`` the row permutation, so that ``A[perm] = L @ U``.
    Raises ``SingularMatrix`` when a pivot drops below ``1e-14`` times the
    largest entry of ``A``.
    """
    A = _square(A)
    dtype = np.result_type(A.dtype, np.float64)
    LU = np.array(A, dtype=dtype, copy=True)
    n = LU.shape[0]
    perm = np.arange(n)
    scale = float(np.abs(LU).max())
    if scale == 0.0 or not np.isfinite(scale):
        raise SingularMatrix("matrix is zero or non-finite")
    for k in range(n):
        p = k + int(np.argmax(np.abs(LU[k:, k])))
        if abs(LU[p, k]) <= PIVOT_RTOL * scale:
            raise SingularMatrix(f"pivot {abs(LU[p, k]):.3e} at column {k} below tolerance")
        if p != k:
            LU[[k, p]] = LU[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        LU[k + 1:, k] /= LU[k, k]
        LU[k + 1:, k + 1:] -= np.outer(LU[k + 1:, k], LU[k, k + 1:])
    return LU, perm


def lu_solve(factors, B):
    LU, perm = factors
    B = np.asarray(B)
    n = LU.shape[0]
    if B.shape[0] != n:
        raise ShapeMismatch(f"right-hand side has {B.shape[0]} rows, expected {n}")
    vector = B.ndim == 1
    X = np.array(B[perm], dtype=np.result_type(LU.dtype, B.dtype), copy=True)
    if vector:
        X = X[:, None]
    for i in range(1, n):
        X[i] -= LU[i, :i] @ X[:i]
    for i in range(n - 1, -1, -1):
        X[i] = (X[i] - LU[i, i + 1:] @ X[i + 1:]) / LU[i, i]
    return X[:, 0] if vector else X


def solve_linear(A, B):
    """Solve ``A X = B`` by partial-pivot LU."""
    return lu_solve(lu_factor(A), B)


def kron(A, B):
    """Kronecker product with ``(A kron B)[(a, c), (b, d)] = A[a, b] * B[c, d]``."""
    A = _square(A, "A")
    B = _square(B, "B")
    p, q = A.shape[0], B.shape[0]
    if p * q > MAX_KRON_DIM:
        raise ShapeMismatch(f"Kronecker product of size {p * q} exceeds {MAX_KRON_DIM}")
    return np.einsum("ab,cd->acbd", A, B).reshape(p * q, p * q)


# ---------------------------------------------------------------------------
# eigenvalues


def _balance(a):
    """Diagonal similarity scaling by powers of two (row/column norm balancing)."""
    radix = 2.0
    sqrdx = radix * radix
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def _hessenberg(a):
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        alpha = -math.copysign(norm, x[0])
        v = x.copy()
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        a[k + 1:, :] -= 2.0 * np.outer(v, v @ a[k + 1:, :])
        a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, v)
        a[k + 2:, k] = 0.0
    return a


def _sign(x):
    return 1.0 if x >= 0 else -1.0


def _eig2x2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]] via LAPACK dlanv2-style standardization.

    Nearly symmetric blocks with almost equal eigenvalues come out real instead
    of picking up a spurious O(sqrt(eps)) imaginary part.
    """
    if c == 0.0 or b == 0.0:
        return complex(a), complex(d)
    if a - d == 0.0 and _sign(b) != _sign(c):
        im = math.sqrt(abs(b)) * math.sqrt(abs(c))
        return complex(a, im), complex(a, -im)
    temp = a - d
    p = 0.5 * temp
    bcmax = max(abs(b), abs(c))
    bcmis = min(abs(b), abs(c)) * _sign(b) * _sign(c)
    scale = max(abs(p), bcmax)
    z = p / scale * p + bcmax / scale * bcmis
    if z >= 4.0 * _EPS:
        z = p + math.copysign(math.sqrt(scale) * math.sqrt(z), p)
        return complex(d + z), complex(d - bcmax / z * bcmis)
    sigma = b + c
    tau = math.hypot(sigma, temp)
    cs = math.sqrt(0.5 * (1.0 + abs(sigma) / tau))
    sn = -(p / (tau * cs)) * _sign(sigma)
    aa = a * cs + b * sn
    bb = -a * sn + b * cs
    cc = c * cs + d * sn
    dd = -c * sn + d * cs
    b = bb * cs + dd * sn
    c = -aa * sn + cc * cs
    mid = 0.5 * ((aa * cs + cc * sn) + (-bb * sn + dd * cs))
    if c == 0.0 or b == 0.0:
        return complex(mid), complex(mid)
    if _sign(b) == _sign(c):
        off = math.copysign(math.sqrt(abs(b)) * math.sqrt(abs(c)), c)
        return complex(mid + off), complex(mid - off)
    im = math.sqrt(abs(b)) * math.sqrt(abs(c))
    return complex(mid, im), complex(mid, -im)


def _hqr(h):
    """Francis double-shift QR on an upper Hessenberg matrix.

    Indices follow the 1-based formulation (row/column 0 is padding).
    """
    n = h.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = h
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        anorm += np.abs(a[i, max(i - 1, 1):]).sum()
    cap = 100 * n
    total = 0
    nn = n
    t = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) <= DEFLATE_TOL * s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                e1, e2 = _eig2x2(y, a[nn - 1, nn], a[nn, nn - 1], x)
                wr[nn - 1], wi[nn - 1] = e1.real + t, e1.imag
                wr[nn], wi[nn] = e2.real + t, e2.imag
                nn -= 2
                break
            if total >= cap:
                raise NoConvergence(f"QR iteration exceeded {cap} iterations")
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                cols = slice(k, nn + 1)
                pv = a[k, cols] + q * a[k + 1, cols]
                if k != nn - 1:
                    pv = pv + r * a[k + 2, cols]
                    a[k + 2, cols] -= pv * z
                a[k + 1, cols] -= pv * y
                a[k, cols] -= pv * x
                rows = slice(l, min(nn, k + 3) + 1)
                pv = x * a[rows, k] + y * a[rows, k + 1]
                if k != nn - 1:
                    pv = pv + z * a[rows, k + 2]
                    a[rows, k + 2] -= pv * r
                a[rows, k + 1] -= pv * q
                a[rows, k] -= pv
    return wr[1:] + 1j * wi[1:]


def eigvals(A):
    """All eigenvalues of a real square matrix, with multiplicity.

    Complex eigenvalues come in exact conjugate pairs. Order is the order in
    which the QR iteration deflates them (bottom of the Hessenberg form first
    is *not* guaranteed; callers needing an order must sort).
    """
    A = _square(A)
    if np.iscomplexobj(A):
        raise TypeError("eigvals expects a real matrix")
    a = np.array(A, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.shape[0] == 1:
        return np.array([complex(a[0, 0])])
    _balance(a)
    _hessenberg(a)
    return _hqr(a)


def rotation_log_frobenius(R, tol=1e-6):
    """Frobenius norm of the principal logarithm of an orthogonal matrix.

    Equals ``sqrt(sum(angle_k ** 2))`` over the eigenvalue angles, since an
    orthogonal matrix is normal. Emits ``NearPiBranchWarning`` when an angle is
    within ``1e-6`` of pi.
    """
    R = _square(R, "R")
    n = R.shape[0]
    if np.abs(R.T @ R - np.eye(n)).max() > tol:
        raise NotOrthogonal("R^T R deviates from identity")
    angles = np.angle(eigvals(R))
    if np.any(np.abs(math.pi - np.abs(angles)) <= 1e-6):
        warnings.warn("eigenvalue angle within 1e-6 of pi; logarithm branch is ambiguous",
                      NearPiBranchWarning, stacklevel=2)
    return float(math.sqrt(np.sum(angles ** 2)))
