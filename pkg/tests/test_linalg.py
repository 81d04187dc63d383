import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csitshare.linalg import (
    RankError,
    chordal_distance,
    chordal_distance_sq,
    haar_truncated_unitary,
    haar_unitary,
    herm,
    orthonormal_complement,
    qr_orthonormal_factor,
)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def projector_distance(X, Y):
    # independent evaluation straight from the definition
    D = X @ X.conj().T - Y @ Y.conj().T
    return np.sqrt(np.sum(np.abs(D) ** 2) / 2)


class TestQR:
    def test_identity(self):
        F, C = qr_orthonormal_factor(np.eye(3))
        np.testing.assert_allclose(F, np.eye(3), atol=1e-14)
        np.testing.assert_allclose(C, np.eye(3), atol=1e-14)

    def test_truncated_unitary_input_is_fixed_point(self):
        A = haar_truncated_unitary(6, 4, np.random.default_rng(1))
        F, C = qr_orthonormal_factor(A)
        np.testing.assert_allclose(F, A, atol=1e-12)
        np.testing.assert_allclose(C, np.eye(4), atol=1e-12)

    def test_random_reconstruction(self):
        A = crandn(np.random.default_rng(2), 6, 5)
        F, C = qr_orthonormal_factor(A)
        assert np.linalg.norm(herm(F) @ F - np.eye(5)) <= 1e-10
        assert np.linalg.norm(F @ C - A) <= 1e-10 * np.linalg.norm(A)
        assert np.allclose(np.tril(C, -1), 0)
        assert np.all(np.diag(C).real > 0) and np.allclose(np.diag(C).imag, 0)

    def test_deterministic(self):
        A = crandn(np.random.default_rng(3), 6, 5)
        F1, C1 = qr_orthonormal_factor(A)
        F2, C2 = qr_orthonormal_factor(A.copy())
        assert np.array_equal(F1, F2) and np.array_equal(C1, C2)

    def test_rank_deficient(self):
        A = crandn(np.random.default_rng(4), 6, 2)
        with pytest.raises(RankError):
            qr_orthonormal_factor(np.hstack([A, A[:, :1]]))


class TestChordal:
    def test_self_distance(self):
        F = haar_truncated_unitary(5, 2, np.random.default_rng(0))
        assert chordal_distance(F, F) == pytest.approx(0, abs=1e-14)

    def test_orthogonal_lines(self):
        assert chordal_distance(np.array([[1.0], [0]]), np.array([[0.0], [1]])) == pytest.approx(1.0)

    def test_diagonal_line(self):
        # [[1,0],[0,0]] - [[.5,.5],[.5,.5]] has Frobenius norm 1
        X = np.array([[1.0], [0.0]])
        Y = np.array([[1.0], [1.0]]) / np.sqrt(2)
        assert chordal_distance(X, Y) == pytest.approx(1 / np.sqrt(2), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            chordal_distance(np.eye(4)[:, :2], np.eye(4)[:, :1])

    def test_squared_form_agrees(self):
        rng = np.random.default_rng(5)
        X, Y = haar_truncated_unitary(6, 3, rng, size=2)
        assert chordal_distance_sq(X, Y) == pytest.approx(projector_distance(X, Y) ** 2, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([(4, 2), (6, 5), (5, 2), (3, 1)]))
    def test_metric_properties(self, seed, shape):
        rng = np.random.default_rng(seed)
        n, p = shape
        X, Y, Z = haar_truncated_unitary(n, p, rng, size=3)
        O = haar_unitary(p, rng)
        d = chordal_distance(X, Y)
        assert d == chordal_distance(Y, X)
        assert 0 <= d <= np.sqrt(p) + 1e-12
        assert d <= chordal_distance(X, Z) + chordal_distance(Z, Y) + 1e-9
        assert abs(chordal_distance(X, Y @ O) - d) <= 1e-10
        assert abs(chordal_distance(X @ O, Y) - d) <= 1e-10
        assert chordal_distance(X, X @ O) <= 1e-7


class TestHaar:
    def test_square_is_unitary(self):
        U = haar_truncated_unitary(4, 4, np.random.default_rng(0))
        np.testing.assert_allclose(U @ herm(U), np.eye(4), atol=1e-12)

    def test_orthonormal(self):
        F = haar_truncated_unitary(7, 3, np.random.default_rng(1))
        assert np.linalg.norm(herm(F) @ F - np.eye(3)) <= 1e-10

    def test_p_exceeds_n(self):
        with pytest.raises(ValueError):
            haar_truncated_unitary(2, 3, np.random.default_rng(0))

    def test_first_entry_moment(self):
        # |F11|^2 of a Haar column is Beta(1, n-1): mean 1/n
        n = 5
        F = haar_truncated_unitary(n, 2, np.random.default_rng(7), size=100_000)
        x = np.abs(F[:, 0, 0]) ** 2
        se = x.std(ddof=1) / np.sqrt(len(x))
        assert abs(x.mean() - 1 / n) <= 3 * se

    def test_left_invariance(self):
        # rotating by a fixed unitary leaves the |F11|^2 law unchanged
        rng = np.random.default_rng(8)
        W = haar_unitary(4, rng)
        a = np.abs(haar_truncated_unitary(4, 2, rng, size=50_000)[:, 0, 0]) ** 2
        b = np.abs((W @ haar_truncated_unitary(4, 2, rng, size=50_000))[:, 0, 0]) ** 2
        se = np.sqrt(a.var() / len(a) + b.var() / len(b))
        assert abs(a.mean() - b.mean()) <= 4 * se


class TestComplement:
    def test_coordinate_subspace(self):
        F = np.eye(5)[:, :2]
        Fc = orthonormal_complement(F, np.random.default_rng(0))
        assert chordal_distance(Fc, np.eye(5)[:, 2:].astype(complex)) <= 1e-12

    def test_completes_to_unitary(self):
        rng = np.random.default_rng(1)
        F = haar_truncated_unitary(6, 2, rng)
        W = np.hstack([F, orthonormal_complement(F, rng)])
        assert np.linalg.norm(herm(W) @ W - np.eye(6)) <= 1e-10

    def test_distance_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            X, Y = haar_truncated_unitary(4, 2, rng, size=2)
            Xc, Yc = orthonormal_complement(X, rng), orthonormal_complement(Y, rng)
            assert abs(chordal_distance(X, Y) - chordal_distance(Xc, Yc)) <= 1e-9

    def test_full_space_rejected(self):
        with pytest.raises(ValueError):
            orthonormal_complement(np.eye(3, dtype=complex), np.random.default_rng(0))
