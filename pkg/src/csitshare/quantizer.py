"""Random vector quantization (RVQ) on Grassmann manifolds.

Covers three codebook flavours used by the CSI-sharing pipeline:

* subspace codebooks on G(n, p) (stacked channel bases, precoders),
* line codebooks on G(Md, 1) for vectorized precoder feedback,
* composite codebooks (tuples of unit vectors) for the NC-CGQ baseline,
  which quantizes each raw cross channel as a normalized vector.

Nearest-codeword search is an exhaustive scan; ties go to the lowest index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import chordal_distance, haar_truncated_unitary, herm

__all__ = [
    "MAX_CODEBOOK_BITS",
    "ResourceError",
    "Codebook",
    "CompositeCodebook",
    "QuantizationResult",
    "build_rvq_codebook",
    "build_composite_codebook",
    "quantize",
    "grassmann_real_dimension",
    "bit_scaling",
    "nc_cgq_quantize",
    "quantize_precoder_vectorized",
    "vec",
    "unvec",
    "save_codebook",
    "load_codebook",
    "codebook_filename",
]

MAX_CODEBOOK_BITS = 22
_CHUNK = 1 << 15


class ResourceError(MemoryError):
    """Requested codebook exceeds the desk-scale size guard."""


def _resolve_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), rng


def _check_bits(bits):
    if int(bits) != bits or bits < 0:
        raise ValueError(f"bits must be a nonnegative integer, got {bits!r}")
    if bits > MAX_CODEBOOK_BITS:
        raise ResourceError(
            f"{bits}-bit codebook exceeds the {MAX_CODEBOOK_BITS}-bit guard; "
            "use the perturbation surrogate instead"
        )


@dataclass(frozen=True)
class Codebook:
    """``2**bits`` truncated unitary ``n x p`` codewords, shape (J, n, p)."""

    n: int
    p: int
    bits: int
    entries: np.ndarray
    seed: object = None

    def __len__(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class CompositeCodebook:
    """``2**bits`` tuples of ``factors`` unit vectors in C^dim, shape (J, factors, dim)."""

    dim: int
    factors: int
    bits: int
    entries: np.ndarray
    seed: object = None

    def __len__(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class QuantizationResult:
    index: int
    point: np.ndarray
    distance: float


def build_rvq_codebook(n, p, bits, rng):
    """RVQ codebook of i.i.d. Haar points on G(n, p).

    `rng` may be a Generator or anything accepted by
    ``numpy.random.default_rng``; in the latter case it is recorded as the
    codebook seed.
    """
    _check_bits(bits)
    if p > n:
        raise ValueError(f"p={p} exceeds n={n}")
    rng, seed = _resolve_rng(rng)
    J = 1 << bits
    entries = np.empty((J, n, p), dtype=complex)
    for start in range(0, J, _CHUNK):
        stop = min(start + _CHUNK, J)
        entries[start:stop] = haar_truncated_unitary(n, p, rng, size=stop - start)
    return Codebook(n, p, bits, entries, seed)


def build_composite_codebook(dim, factors, bits, rng):
    """Codebook of ``2**bits`` i.i.d. tuples of isotropic unit vectors."""
    _check_bits(bits)
    rng, seed = _resolve_rng(rng)
    shape = (1 << bits, factors, dim)
    Z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    Z /= np.linalg.norm(Z, axis=-1, keepdims=True)
    return CompositeCodebook(dim, factors, bits, Z, seed)


def _scan(entries, F):
    """Squared chordal distance from F to every codeword (chunked)."""
    J, n, p = entries.shape
    out = np.empty(J)
    for start in range(0, J, _CHUNK):
        blk = entries[start:start + _CHUNK]
        # one GEMM: rows are conj(codeword columns), so inner[k] = S_k^H F
        inner = blk.conj().transpose(0, 2, 1).reshape(-1, n) @ F
        g = (inner.real ** 2 + inner.imag ** 2).reshape(len(blk), -1).sum(axis=1)
        out[start:start + len(blk)] = p - g
    return out


def quantize(F, cb):
    """Nearest codeword to F in chordal distance."""
    F = np.asarray(F)
    if F.shape != (cb.n, cb.p):
        raise ValueError(f"point has shape {F.shape}, codebook is G({cb.n}, {cb.p})")
    k = int(np.argmin(_scan(cb.entries, F)))
    point = cb.entries[k]
    return QuantizationResult(k, point, chordal_distance(F, point))


def grassmann_real_dimension(n, p):
    """Real dimension ``2 p (n - p)`` of the complex Grassmannian G(n, p)."""
    if p > n:
        raise ValueError(f"p={p} exceeds n={n}")
    return 2 * p * (n - p)


def bit_scaling(P, G):
    """Bits ``ceil((G / 2) log2 P)`` that keep leakage bounded; never negative."""
    if P <= 0:
        raise ValueError("power must be positive")
    x = 0.5 * G * math.log2(P)
    # guard against 5 * log2(2**A) landing a hair above an integer
    return max(0, math.ceil(x - 1e-9))


def vec(A):
    """Column-major vectorization."""
    return np.asarray(A).reshape(-1, order="F")


def unvec(v, rows, cols):
    return np.asarray(v).reshape(rows, cols, order="F")


def nc_cgq_quantize(channels, cb):
    """Quantize the cross channels of one BS on a composite Grassmannian.

    Each channel is vectorized and normalized, then the codeword tuple
    minimizing the summed squared chordal distance (each factor a line in
    C^{NM}) is selected.

    Returns
    -------
    reconstruction : (K-1, N, M) array of unit-Frobenius-norm channels.
    index : int
    distance_sq : float
        Sum of squared chordal distances of the selected tuple.
    """
    channels = np.asarray(channels)
    L, N, M = channels.shape
    if (L, N * M) != (cb.factors, cb.dim):
        raise ValueError(f"{L} channels of {N}x{M} do not match a {cb.factors}x{cb.dim} codebook")
    h = np.stack([vec(Hk) for Hk in channels])
    h /= np.linalg.norm(h, axis=-1, keepdims=True)
    gains = np.abs(np.einsum("jkn,kn->jk", cb.entries.conj(), h)) ** 2
    dist = np.sum(1.0 - gains, axis=1)
    k = int(np.argmin(dist))
    rec = np.stack([unvec(c, N, M) for c in cb.entries[k]])
    return rec, k, float(max(dist[k], 0.0))


def quantize_precoder_vectorized(V, cb):
    """Quantize an ``M x d`` precoder as a line in C^{Md}.

    Returns the selected codeword reshaped to ``M x d`` (unit Frobenius
    norm) and the QuantizationResult on G(Md, 1).  Callers that transmit
    the result re-orthonormalize it.
    """
    V = np.asarray(V)
    M, d = V.shape
    if (cb.n, cb.p) != (M * d, 1):
        raise ValueError(f"precoder {M}x{d} needs a codebook on G({M * d}, 1)")
    v = vec(V)
    v = (v / np.linalg.norm(v))[:, None]
    res = quantize(v, cb)
    return unvec(res.point[:, 0], M, d), res


def codebook_filename(n, p, bits, seed):
    return f"rvq_n{n}_p{p}_b{bits}_s{seed}.npz"


def save_codebook(cb, directory):
    """Persist a codebook under a name keyed by (n, p, bits, seed)."""
    path = Path(directory) / codebook_filename(cb.n, cb.p, cb.bits, cb.seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, n=cb.n, p=cb.p, bits=cb.bits, seed=str(cb.seed), entries=cb.entries)
    return path


def load_codebook(path):
    with np.load(path) as z:
        seed = z["seed"].item()
        return Codebook(int(z["n"]), int(z["p"]), int(z["bits"]), z["entries"],
                        None if seed == "None" else seed)
