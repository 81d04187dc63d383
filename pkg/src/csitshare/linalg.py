"""Complex subspace primitives and Grassmann-manifold geometry.

Points on the Grassmann manifold G(n, p) are carried around as plain
``(n, p)`` complex arrays with orthonormal columns (truncated unitary
matrices).  Only the column space is meaningful; every function here that
compares subspaces is invariant to right-multiplication by a unitary.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "RankError",
    "qr_orthonormal_factor",
    "chordal_distance",
    "chordal_distance_sq",
    "haar_truncated_unitary",
    "haar_unitary",
    "orthonormal_complement",
    "orthonormalize",
    "is_truncated_unitary",
    "herm",
]

RANK_RTOL = 1e-12


class RankError(np.linalg.LinAlgError):
    """Raised when a matrix expected to have full column rank does not."""


def herm(A):
    """Conjugate transpose of the last two axes."""
    return np.conj(np.swapaxes(A, -1, -2))


def is_truncated_unitary(F, atol=1e-10):
    F = np.asarray(F)
    p = F.shape[-1]
    return bool(np.linalg.norm(herm(F) @ F - np.eye(p)) <= atol)


def _check_finite(A):
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")


def qr_orthonormal_factor(A):
    """Thin QR factorisation ``A = F @ C`` with a positive real diagonal on C.

    Parameters
    ----------
    A : (n, p) complex array, n >= p, full column rank.

    Returns
    -------
    F : (n, p) truncated unitary basis of the column space of `A`.
    C : (p, p) upper triangular, invertible, ``diag(C) > 0``.

    Raises
    ------
    RankError
        If the smallest singular value of `A` is below ``1e-12`` times the
        largest one.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, p = A.shape
    if p > n:
        raise ValueError(f"need n >= p, got {A.shape}")
    _check_finite(A)
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0 or s[-1] < RANK_RTOL * s[0]:
        raise RankError("input does not have full column rank")
    Q, R = np.linalg.qr(A)
    # pin the representative: rotate each column so that diag(R) is real > 0
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph, np.conj(ph)[:, None] * R


def orthonormalize(A):
    """Orthonormal basis of the column space of `A` (the Q factor only)."""
    return qr_orthonormal_factor(A)[0]


def chordal_distance_sq(X, Y):
    """Squared chordal distance ``p - ||X^H Y||_F^2`` between two subspaces.

    Broadcasts over leading axes, so a stack of codewords can be compared
    against a single point in one call.  Assumes orthonormal columns.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape[-2:] != Y.shape[-2:]:
        raise ValueError(f"dimension mismatch: {X.shape[-2:]} vs {Y.shape[-2:]}")
    p = X.shape[-1]
    inner = herm(X) @ Y
    val = p - np.sum(np.abs(inner) ** 2, axis=(-2, -1))
    return np.maximum(val, 0.0)


def chordal_distance(X, Y):
    """Chordal distance ``||X X^H - Y Y^H||_F / sqrt(2)``.

    Evaluated through the projector difference, which stays accurate near
    zero where the ``p - ||X^H Y||^2`` form loses half its digits.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"dimension mismatch: {X.shape} vs {Y.shape}")
    D = X @ herm(X) - Y @ herm(Y)
    return float(np.linalg.norm(D) / np.sqrt(2.0))


def haar_unitary(n, rng):
    """Haar-distributed ``n x n`` unitary matrix."""
    return haar_truncated_unitary(n, n, rng)


def haar_truncated_unitary(n, p, rng, size=None):
    """Draw Haar-distributed ``n x p`` truncated unitary matrices.

    Orthonormalises an i.i.d. CN(0, 1) matrix and fixes the phases of the
    R diagonal, which makes the law invariant under left multiplication by
    any fixed unitary.

    Parameters
    ----------
    n, p : int
        Ambient and subspace dimension, ``p <= n``.
    rng : numpy.random.Generator
    size : int, optional
        When given, returns a stack of shape ``(size, n, p)``.
    """
    if p > n:
        raise ValueError(f"p={p} exceeds n={n}")
    if p < 0 or n < 1:
        raise ValueError("dimensions must be positive")
    shape = (n, p) if size is None else (size, n, p)
    Z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return Q * ph[..., None, :]


def orthonormal_complement(F, rng):
    """Random orthonormal basis of the orthogonal complement of span(F).

    The returned ``(n, n - p)`` basis is Haar-distributed within the
    complement, so ``[F, Fc]`` is unitary.
    """
    F = np.asarray(F, dtype=complex)
    n, p = F.shape
    if p >= n:
        raise ValueError("subspace already spans the whole space; complement is empty")
    # full SVD of F gives a deterministic complement basis, then rotate it
    U = np.linalg.svd(F, full_matrices=True)[0]
    B = U[:, p:]
    O = haar_unitary(n - p, rng)
    return B @ O
