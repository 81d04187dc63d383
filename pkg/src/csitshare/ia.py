"""Interference alignment on stacked channel subspaces, and leakage algebra.

The central node only sees one truncated unitary ``F_j`` per BS, a basis of
the column space of the stacked cross channels of BS j.  Row block ``r`` of
``F_j`` plays the role of the channel from BS j to the r-th interfered user,
so an IA solution for the ``F_j`` is an ordinary IA solution for a virtual
channel.  The BS then maps the virtual precoder back to its real channel
through the QR factor ``C_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .channel import cross_indices, stacked_interference_matrix
from .linalg import (
    chordal_distance,
    haar_truncated_unitary,
    haar_unitary,
    herm,
    orthonormalize,
    qr_orthonormal_factor,
)

__all__ = [
    "ConvergenceError",
    "InfeasibleError",
    "IaSolution",
    "LeakageReport",
    "LeakageDecomposition",
    "ia_feasible",
    "split_stacked",
    "alignment_residual",
    "solve_ia",
    "stacked_filter",
    "total_precoder",
    "leakage_power",
    "leakage_decomposition",
    "rotation_equivalence_check",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 5000
DEFAULT_RESTARTS = 5


class InfeasibleError(ValueError):
    """System dimensions do not admit the alignment pipeline."""


class ConvergenceError(RuntimeError):
    """The alignment solver did not reach its tolerance."""


@dataclass
class IaSolution:
    """Receive filters ``U`` (K, N, d) and precoders ``V`` (K, M, d)."""

    U: np.ndarray
    V: np.ndarray
    residual: float
    iterations: int
    converged: bool
    restarts: int = 0
    history: np.ndarray = field(default=None, repr=False)


@dataclass
class LeakageReport:
    """Per-user interference leakage powers after receive projection.

    ``total_stacked`` is the same total evaluated through the stacked
    per-BS form; it must match ``total``.  ``bound_constant`` is the
    realized total, which upper-bounds every ``per_user`` entry.
    """

    per_user: np.ndarray
    total: float
    total_stacked: float
    bound_constant: float


@dataclass
class LeakageDecomposition:
    X_b: np.ndarray
    X_c: np.ndarray
    leakage_norm: float  # ||U_-j^H F_j F_j^H Fhat_j Vhat_j||_F
    aligned_residual: float
    bound_b: float  # sqrt(2d) d_c(F_j, Fhat_j)
    bound_c: float  # sqrt(2d) d_c(Vtilde_j, Vhat_j)

    @property
    def split_norm(self):
        return float(np.linalg.norm(self.X_b + self.X_c))

    @property
    def bound_b_ok(self):
        return bool(np.linalg.norm(self.X_b) <= self.bound_b * (1 + 1e-12) + 1e-14)

    @property
    def bound_c_ok(self):
        return bool(np.linalg.norm(self.X_c) <= self.bound_c * (1 + 1e-12) + 1e-14)


def ia_feasible(dims):
    """Properness test ``d (K + 1) <= M + N`` for the symmetric system."""
    return dims.d * (dims.K + 1) <= dims.M + dims.N and dims.d <= min(dims.M, dims.N)


def split_stacked(subspaces, dims):
    """Turn K stacked ``((K-1)N, M)`` matrices into a (K, K, N, M) virtual channel.

    Entry ``[i, j]`` is the row block of ``subspaces[j]`` belonging to user
    i; diagonal blocks are zero.
    """
    K, M, N = dims.K, dims.M, dims.N
    S = np.asarray(subspaces)
    if S.shape != (K, (K - 1) * N, M):
        raise ValueError(f"subspaces have shape {S.shape}, expected {(K, (K - 1) * N, M)}")
    G = np.zeros((K, K, N, M), dtype=complex)
    for j in range(K):
        for r, i in enumerate(cross_indices(K, j)):
            G[i, j] = S[j, r * N:(r + 1) * N]
    return G


def stacked_filter(U, j):
    """``Bdiag(U_1, ..., U_(j-1), U_(j+1), ..., U_K)``."""
    return block_diag(*[U[i] for i in cross_indices(len(U), j)])


def alignment_residual(subspaces, U, V, dims):
    """``sum_j ||U_-j^H F_j V_j||_F^2`` recomputed from scratch."""
    return float(sum(
        np.linalg.norm(herm(stacked_filter(U, j)) @ subspaces[j] @ V[j]) ** 2
        for j in range(dims.K)
    ))


def _minor_eigvecs(A, d):
    w, v = np.linalg.eigh(A)
    return w[..., :d], v[..., :, :d]


def _alternate(G, V, d, tol, max_iter):
    """Leakage minimisation from initial precoders V; returns (U, V, history)."""
    history = []
    U = None
    for _ in range(max_iter):
        B = G @ V[None]  # B[i, j] = G_ij V_j
        _, U = _minor_eigvecs(np.einsum("ijnd,ijmd->inm", B, B.conj()), d)
        C = herm(U)[:, None] @ G  # C[i, j] = U_i^H G_ij
        _, V = _minor_eigvecs(np.einsum("ijdm,ijdn->jmn", C.conj(), C), d)
        # direct evaluation; summed eigenvalues bottom out near 1e-15
        res = float(np.sum(np.abs(C @ V[None]) ** 2))
        history.append(res)
        if res <= tol:
            break
    return U, V, np.asarray(history)


def solve_ia(subspaces, dims, rng, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
             restarts=DEFAULT_RESTARTS):
    """Alternating leakage minimisation on the stacked subspaces.

    Each pass sets every receive filter to the ``d`` minor eigenvectors of
    its interference covariance, then every precoder likewise.  Both half
    steps are exact minimisers, so the residual never increases.

    Parameters
    ----------
    subspaces : (K, (K-1)N, M) complex array
        One truncated unitary per BS (exact or quantized).
    dims : SystemDims
    rng : numpy.random.Generator
        Source for the random Haar initial precoders.
    tol : float
        Target for ``sum_j ||U_-j^H F_j V_j||_F^2``.
    max_iter : int
        Iteration cap per attempt.
    restarts : int
        Extra attempts from fresh initialisations when an attempt stalls.

    Returns
    -------
    IaSolution
        The best attempt; ``converged`` is False when no attempt reached
        `tol`.
    """
    if not ia_feasible(dims):
        raise InfeasibleError(f"IA is not proper for {dims}")
    if not dims.needs_alignment:
        raise InfeasibleError("pipeline requires (K-1) N > M")
    G = split_stacked(subspaces, dims)
    K, M, d = dims.K, dims.M, dims.d
    best = None
    for attempt in range(restarts + 1):
        V0 = haar_truncated_unitary(M, d, rng, size=K)
        U, V, hist = _alternate(G, V0, d, tol, max_iter)
        sol = IaSolution(U, V, float(hist[-1]), len(hist), bool(hist[-1] <= tol),
                         attempt, hist)
        if best is None or sol.residual < best.residual:
            best = sol
        if sol.converged:
            break
    return best


def total_precoder(C, F, F_hat, V_hat, normalize=True):
    """BS-side precoder ``C^-1 F^H Fhat Vhat``.

    With ``normalize`` the columns are re-orthonormalised so the transmit
    power is exactly P; the column space is unchanged.
    """
    C = np.asarray(C)
    if np.linalg.cond(C) > 1e12:
        raise np.linalg.LinAlgError("C is numerically singular")
    V = np.linalg.solve(C, herm(F) @ F_hat @ V_hat)
    if normalize:
        V = orthonormalize(V)
    return V


def leakage_power(cs, U, V, P, d=None):
    """Interference leakage ``L_i = tr((P/d) Q_I^i)`` at every user.

    The total is also evaluated as ``sum_j (P/d) ||U_-j^H H_j V_j||_F^2``.
    """
    K = cs.dims.K
    d = cs.dims.d if d is None else d
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape[0] != K or V.shape[0] != K:
        raise ValueError("need one filter and one precoder per cell")
    if U.shape[1] != cs.dims.N or V.shape[1] != cs.dims.M:
        raise ValueError("filter/precoder shapes do not match the channel")
    B = herm(U)[:, None] @ cs.H @ V[None]  # B[i, j] = U_i^H H_ij V_j
    power = np.sum(np.abs(B) ** 2, axis=(-2, -1))
    np.fill_diagonal(power, 0.0)
    per_user = (P / d) * power.sum(axis=1)
    total = float(per_user.sum())
    stacked = sum(
        np.linalg.norm(herm(stacked_filter(U, j)) @ stacked_interference_matrix(cs, j) @ V[j]) ** 2
        for j in range(K)
    )
    return LeakageReport(per_user, total, float((P / d) * stacked), total)


def leakage_decomposition(F, F_hat, V_tilde, V_hat, U_minus, align_tol=1e-6):
    """Split the quantization leakage of one BS into CSI and precoder parts.

    ``X_b = U^H (F F^H - Fh Fh^H) Fh Vh`` is due to the subspace
    quantization, ``X_c = U^H Fh (Vh Vh^H - Vt Vt^H) Vh`` to the precoder
    quantization.  Valid when ``U_minus^H Fh Vt = 0``, i.e. when the filters
    were solved against the quantized subspaces.
    """
    Uh = herm(U_minus)
    aligned = float(np.linalg.norm(Uh @ F_hat @ V_tilde))
    if aligned > align_tol:
        raise ValueError(f"filters are not aligned on the quantized subspace ({aligned:.3g})")
    X_b = Uh @ (F @ herm(F) - F_hat @ herm(F_hat)) @ F_hat @ V_hat
    X_c = Uh @ F_hat @ (V_hat @ herm(V_hat) - V_tilde @ herm(V_tilde)) @ V_hat
    lhs = float(np.linalg.norm(Uh @ F @ herm(F) @ F_hat @ V_hat))
    d = V_hat.shape[1]
    r2d = np.sqrt(2.0 * d)
    return LeakageDecomposition(
        X_b, X_c, lhs, aligned,
        r2d * chordal_distance(F, F_hat),
        r2d * chordal_distance(V_tilde, V_hat),
    )


def rotation_equivalence_check(cs, rng, rotations=None, tol=1e-8, **solver_kw):
    """Align on randomly rotated bases ``F_j O_j`` and test on the true channel.

    The BS-side precoder ``C_j^-1 O_j Vt_j`` must null all interference on
    the real channels (leakage below ``tol * P``, checked at P = 1).
    """
    dims = cs.dims
    K = dims.K
    Fs, Cs = zip(*(qr_orthonormal_factor(stacked_interference_matrix(cs, j)) for j in range(K)))
    if rotations is None:
        rotations = [haar_unitary(dims.M, rng) for _ in range(K)]
    rotated = np.stack([F @ O for F, O in zip(Fs, rotations)])
    sol = solve_ia(rotated, dims, rng, tol=min(tol, DEFAULT_TOL) * 1e-2, **solver_kw)
    if not sol.converged:
        raise ConvergenceError(f"solver stopped at residual {sol.residual:.3g}")
    V = np.stack([np.linalg.solve(C, O @ Vt) for C, O, Vt in zip(Cs, rotations, sol.V)])
    return leakage_power(cs, sol.U, V, 1.0).total < tol
