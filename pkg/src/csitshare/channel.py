"""K-user MIMO interference channel realizations."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SystemDims",
    "ChannelSet",
    "generate_channel_set",
    "stacked_interference_matrix",
    "save_channel_set",
    "load_channel_set",
]


@dataclass(frozen=True)
class SystemDims:
    """Symmetric system: K cells, M BS antennas, N user antennas, d streams."""

    K: int
    M: int
    N: int
    d: int

    def __post_init__(self):
        for name in ("K", "M", "N", "d"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.K < 2:
            raise ValueError("need at least two cells")
        if self.d > min(self.M, self.N):
            raise ValueError("d cannot exceed min(M, N)")

    @property
    def stack_rows(self):
        """Row count ``(K-1) N`` of the stacked interference matrix."""
        return (self.K - 1) * self.N

    @property
    def needs_alignment(self):
        """``(K-1) N > M``: transmit zero-forcing alone cannot null interference."""
        return self.stack_rows > self.M

    def as_dict(self):
        return {"K": self.K, "M": self.M, "N": self.N, "d": self.d}


@dataclass
class ChannelSet:
    """One channel realization; ``H[i, j]`` is the N x M channel BS j -> user i."""

    dims: SystemDims
    H: np.ndarray  # (K, K, N, M) complex

    def __post_init__(self):
        K, M, N = self.dims.K, self.dims.M, self.dims.N
        if self.H.shape != (K, K, N, M):
            raise ValueError(f"H has shape {self.H.shape}, expected {(K, K, N, M)}")
        if not np.all(np.isfinite(self.H)):
            raise ValueError("channel entries must be finite")


def generate_channel_set(dims, rng):
    """Draw all K^2 channel matrices with i.i.d. CN(0, 1) entries."""
    shape = (dims.K, dims.K, dims.N, dims.M)
    H = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return ChannelSet(dims, H)


def cross_indices(K, j):
    """Users interfered by BS j, in stacking order."""
    return [i for i in range(K) if i != j]


def stacked_interference_matrix(cs, j):
    """Stack the cross channels of BS j: ``[H_1j; ...; H_(j-1)j; H_(j+1)j; ...]``.

    Returns a ``((K-1) N, M)`` matrix; the direct channel ``H_jj`` is left out.
    """
    K = cs.dims.K
    if not 0 <= j < K:
        raise IndexError(f"BS index {j} out of range for K={K}")
    return np.concatenate([cs.H[i, j] for i in cross_indices(K, j)], axis=0)


def save_channel_set(cs, path):
    """Write a realization as JSON with complex entries as ``[re, im]`` pairs."""
    H = cs.H
    payload = {
        "dims": cs.dims.as_dict(),
        "H": np.stack([H.real, H.imag], axis=-1).tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def load_channel_set(path):
    payload = json.loads(Path(path).read_text())
    dims = SystemDims(**payload["dims"])
    arr = np.asarray(payload["H"], dtype=float)
    return ChannelSet(dims, arr[..., 0] + 1j * arr[..., 1])
