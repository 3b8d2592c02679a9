import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsparam.errors import NearPiBranchWarning, NotOrthogonal, SingularMatrix
from dsparam.numerics import eigvals, kron, lu_factor, rotation_log_frobenius, solve_linear

from conftest import sorted_spectrum

seeds = st.integers(0, 2**32 - 1)


def rot2(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


class TestSolve:
    def test_identity(self, rng):
        B = rng.standard_normal((3, 2))
        assert np.array_equal(solve_linear(np.eye(3), B), B)

    def test_diagonal(self):
        X = solve_linear(np.array([[2.0, 0], [0, 4]]), np.array([[2.0], [8]]))
        assert np.allclose(X, [[1], [2]], atol=1e-15)

    def test_identity_plus_skew_inverse(self):
        A = np.eye(2) + np.array([[0.0, 1], [-1, 0]])
        X = solve_linear(A, np.eye(2))
        assert np.allclose(X, 0.5 * np.array([[1, -1], [1, 1]]), atol=1e-15)

    def test_vector_rhs(self, rng):
        A = rng.standard_normal((5, 5)) + 5 * np.eye(5)
        b = rng.standard_normal(5)
        assert solve_linear(A, b).shape == (5,)
        assert np.allclose(A @ solve_linear(A, b), b, atol=1e-12)

    def test_complex(self, rng):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)) + 4 * np.eye(4)
        B = rng.standard_normal((4, 2)) + 0j
        assert np.abs(A @ solve_linear(A, B) - B).max() < 1e-12

    def test_singular_raises(self):
        with pytest.raises(SingularMatrix):
            solve_linear(np.array([[1.0, 2], [2, 4]]), np.eye(2))
        with pytest.raises(SingularMatrix):
            lu_factor(np.zeros((3, 3)))

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(1, 12), st.integers(1, 4))
    def test_reconstructs_rhs(self, seed, n, m):
        r = np.random.default_rng(seed)
        A = r.standard_normal((n, n)) + n * np.eye(n)
        B = r.standard_normal((n, m))
        X = solve_linear(A, B)
        assert np.abs(A @ X - B).max() <= 1e-9 * max(1.0, np.abs(B).max())


class TestEigvals:
    def test_swap(self):
        assert np.allclose(sorted_spectrum(eigvals(np.array([[0.0, 1], [1, 0]]))), [-1, 1])

    def test_three_cycle(self):
        P = np.roll(np.eye(3), 1, axis=1)
        lam = sorted_spectrum(eigvals(P))
        w = np.exp(2j * np.pi / 3)
        assert np.allclose(lam, sorted_spectrum([1, w, w.conjugate()]), atol=1e-12)

    def test_barycenter(self):
        lam = sorted_spectrum(eigvals(np.full((3, 3), 1 / 3)))
        assert np.allclose(lam, [0, 0, 1], atol=1e-12)

    def test_one_by_one(self):
        assert eigvals(np.array([[2.5]]))[0] == 2.5

    def test_conjugate_pairs_and_dtype(self, rng):
        lam = eigvals(rng.standard_normal((7, 7)))
        assert lam.dtype == np.complex128 and lam.shape == (7,)
        assert np.allclose(sorted_spectrum(lam), sorted_spectrum(lam.conj()), atol=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.integers(1, 20))
    def test_matches_numpy(self, seed, n):
        A = np.random.default_rng(seed).standard_normal((n, n))
        ours = sorted_spectrum(eigvals(A))
        ref = sorted_spectrum(np.linalg.eigvals(A))
        # match as multisets with a greedy nearest pairing
        ref = list(ref)
        for z in ours:
            k = int(np.argmin([abs(z - w) for w in ref]))
            assert abs(z - ref.pop(k)) < 1e-8 * max(1.0, abs(z))

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(2, 16))
    def test_trace_and_determinant(self, seed, n):
        A = np.random.default_rng(seed).standard_normal((n, n))
        lam = eigvals(A)
        assert abs(lam.sum() - np.trace(A)) < 1e-8 * max(1.0, np.abs(A).sum())
        det = np.linalg.det(A)
        assert abs(np.prod(lam) - det) <= 1e-8 * max(1.0, abs(det))

    def test_large_size(self, rng):
        A = rng.standard_normal((64, 64))
        assert abs(eigvals(A).sum() - np.trace(A)) < 1e-8


class TestKron:
    def test_identity(self):
        assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_block_swap(self):
        S = np.array([[0.0, 1], [1, 0]])
        expected = np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]])
        assert np.array_equal(kron(S, np.eye(2)), expected)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 4), st.integers(1, 4))
    def test_matches_numpy(self, seed, p, q):
        r = np.random.default_rng(seed)
        A, B = r.standard_normal((p, p)), r.standard_normal((q, q))
        assert np.array_equal(kron(A, B), np.kron(A, B))

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.sampled_from([2, 3]))
    def test_mixed_product(self, seed, n):
        r = np.random.default_rng(seed)
        A, B, C, D = (r.standard_normal((n, n)) for _ in range(4))
        assert np.abs(kron(A, B) @ kron(C, D) - kron(A @ C, B @ D)).max() < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_bilinear(self, seed):
        r = np.random.default_rng(seed)
        A, A2, B = (r.standard_normal((3, 3)) for _ in range(3))
        a = r.standard_normal()
        assert np.abs(kron(a * A + A2, B) - (a * kron(A, B) + kron(A2, B))).max() < 1e-10

    def test_spectrum_is_pairwise_products(self):
        a, b = 0.3, -0.6
        A = np.array([[1 - (1 - a) / 2, (1 - a) / 2], [(1 - a) / 2, 1 - (1 - a) / 2]])
        B = np.array([[1 - (1 - b) / 2, (1 - b) / 2], [(1 - b) / 2, 1 - (1 - b) / 2]])
        lam = np.sort(eigvals(kron(A, B)).real)
        assert np.allclose(lam, np.sort([1, a, b, a * b]), atol=1e-12)


class TestRotationLog:
    def test_identity(self):
        assert rotation_log_frobenius(np.eye(4)) == 0.0

    @pytest.mark.parametrize("alpha", [0.1, 0.7, -1.3, math.pi / 2, 3.0])
    def test_planar_rotation(self, alpha):
        assert rotation_log_frobenius(rot2(alpha)) == pytest.approx(math.sqrt(2) * abs(alpha), abs=1e-12)

    def test_not_orthogonal(self):
        with pytest.raises(NotOrthogonal):
            rotation_log_frobenius(np.array([[1.0, 0.1], [0, 1]]))

    def test_branch_warning(self):
        with pytest.warns(NearPiBranchWarning):
            rotation_log_frobenius(-np.eye(2))

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(2, 6))
    def test_symmetric_in_arguments(self, seed, n):
        r = np.random.default_rng(seed)
        R1, _ = np.linalg.qr(r.standard_normal((n, n)))
        R2, _ = np.linalg.qr(r.standard_normal((n, n)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = rotation_log_frobenius(R1.T @ R2)
            b = rotation_log_frobenius(R2.T @ R1)
        assert abs(a - b) < 1e-8
