"""Random perturbations on G(n, p) that mimic large-codebook RVQ error.

Quantizing with ``2**bits`` random codewords is replaced by rotating the
source subspace to a random neighbour at a squared chordal distance ``r``
drawn from a Gaussian (truncated to r >= 0) whose first two moments follow
the high-resolution RVQ distortion formula

    D(k) ~ Gamma(k/G) / ((G/k) (c J)^(k/G)),

with G the real manifold dimension, J the codebook size and c the
small-ball volume coefficient of the manifold.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .linalg import haar_truncated_unitary, orthonormal_complement
from .quantizer import _scan, build_rvq_codebook, grassmann_real_dimension

__all__ = [
    "DegenerateParamsError",
    "PerturbationParams",
    "PerturbationDraw",
    "moment_bounds",
    "perturbation_params",
    "sample_squared_error",
    "draw_angles",
    "perturb",
    "perturb_via_complement",
    "perturb_point",
    "perturbation_draw",
    "ball_volume_coefficient",
    "calibrate_ball_coefficient",
    "rvq_mean_squared_error",
    "CalibrationCache",
]

MAX_REJECTIONS = 10**6
MAX_ANGLE_RESAMPLES = 100


class DegenerateParamsError(RuntimeError):
    pass


@dataclass(frozen=True)
class PerturbationParams:
    G: int
    c: float
    J: float
    r_bar: float
    sigma2_r: float


@dataclass(frozen=True)
class PerturbationDraw:
    r: float
    angles: np.ndarray
    result: np.ndarray


def _log_cJ(c, J):
    return math.log(c) + math.log(J)


def moment_bounds(k, G, c, J):
    """Lower and upper bounds on the k-th moment of RVQ chordal error.

    ``lower = G / ((G + k) (cJ)^(k/G))``,
    ``upper = Gamma(k/G) / ((G/k) (cJ)^(k/G))``.
    """
    if G < 1 or c <= 0 or J < 1:
        raise ValueError("need G >= 1, c > 0, J >= 1")
    scale = math.exp(-(k / G) * _log_cJ(c, J))
    lower = G / (G + k) * scale
    upper = math.exp(gammaln(k / G)) / (G / k) * scale
    return lower, upper


def perturbation_params(G, c, bits):
    """Mean and variance of the squared chordal error for a 2**bits codebook.

    Both moments use the upper bound of `moment_bounds`.  A negative
    variance (possible since the two bounds are not jointly consistent) is
    clamped to zero.
    """
    J = 2.0 ** bits
    r_bar = moment_bounds(2, G, c, J)[1]
    d4 = moment_bounds(4, G, c, J)[1]
    return PerturbationParams(G, c, J, r_bar, max(d4 - r_bar ** 2, 0.0))


def sample_squared_error(params, rng, upper=None):
    """Draw r ~ N(r_bar, sigma2_r), redrawing until ``0 <= r`` (and ``r <= upper``)."""
    if params.sigma2_r == 0.0:
        return params.r_bar
    sd = math.sqrt(params.sigma2_r)
    for _ in range(MAX_REJECTIONS):
        r = params.r_bar + sd * rng.standard_normal()
        if r >= 0.0 and (upper is None or r <= upper):
            return r
    raise DegenerateParamsError(
        f"no admissible draw from N({params.r_bar:.3g}, {params.sigma2_r:.3g})"
    )


def draw_angles(p, r, rng, s=None):
    """Principal angles with ``sum(sin^2) == r``.

    ``sin(theta_i) = s_i sqrt(r) / ||s||`` with ``s_i ~ U[0, 1]``; the s
    vector is redrawn when some ratio exceeds one.
    """
    if r < 0 or r > p:
        raise ValueError(f"squared distance {r} outside [0, {p}]")
    for _ in range(MAX_ANGLE_RESAMPLES):
        s_ = rng.uniform(0.0, 1.0, p) if s is None else np.asarray(s, dtype=float)
        norm = np.linalg.norm(s_)
        if norm == 0.0:
            if r == 0.0:
                return np.zeros(p)
            continue
        x = s_ * math.sqrt(r) / norm
        if np.all(x <= 1.0 + 1e-15):
            return np.arcsin(np.minimum(x, 1.0))
        if s is not None:
            break
    raise ValueError(f"could not find angles for r={r} on {p} dimensions")


def _rotate(F, theta, rng):
    Fc = orthonormal_complement(F, rng)
    q = len(theta)
    return F * np.cos(theta) + Fc[:, :q] * np.sin(theta)


def perturb(F, r, rng, s=None):
    """Rotate span(F) to a random subspace at squared chordal distance r.

    Builds ``W [C; S; 0]`` with ``W = [F, Fc]`` for a random orthonormal
    complement ``Fc`` and ``C, S`` the cosines and sines of the angles.
    Requires ``n >= 2p``.
    """
    F = np.asarray(F, dtype=complex)
    n, p = F.shape
    if n < 2 * p:
        raise ValueError("direct perturbation needs n >= 2p; use perturb_via_complement")
    return _rotate(F, draw_angles(p, r, rng, s), rng)


def perturb_via_complement(F, r, rng, s=None):
    """Perturbation for ``n < 2p``: move the complement, return its complement."""
    F = np.asarray(F, dtype=complex)
    n, p = F.shape
    if p >= n:
        raise ValueError("no complement to perturb")
    moved = perturb(orthonormal_complement(F, rng), r, rng, s)
    return orthonormal_complement(moved, rng)


def perturb_point(F, r, rng):
    """Dispatch to the direct or complement construction by shape."""
    n, p = np.shape(F)
    return perturb(F, r, rng) if n >= 2 * p else perturb_via_complement(F, r, rng)


def perturbation_draw(F, params, rng):
    """Full surrogate step: sample r, then perturb F by it.

    Draws above the largest attainable squared distance ``min(p, n - p)``
    are rejected along with negative ones.
    """
    F = np.asarray(F, dtype=complex)
    n, p = F.shape
    m = min(p, n - p)
    r = sample_squared_error(params, rng, upper=float(m))
    theta = draw_angles(m, r, rng)
    if n >= 2 * p:
        out = _rotate(F, theta, rng)
    else:
        out = orthonormal_complement(_rotate(orthonormal_complement(F, rng), theta, rng), rng)
    return PerturbationDraw(r, theta, out)


def ball_volume_coefficient(n, p):
    """Small-ball volume coefficient of the complex Grassmannian G(n, p).

    Normalized Haar measure of a chordal ball of radius delta is
    ``c delta^G (1 + o(1))`` with

        c = prod_{i=1}^{q} Gamma(n - i + 1) / Gamma(q - i + 1) / Gamma(G/2 + 1),

    ``q = min(p, n - p)`` (Dai, Liu and Rider, 2008).
    """
    q = min(p, n - p)
    G = grassmann_real_dimension(n, p)
    if q == 0:
        raise ValueError("G(n, n) is a single point")
    logc = sum(gammaln(n - i + 1) - gammaln(q - i + 1) for i in range(1, q + 1))
    return math.exp(logc - gammaln(G / 2 + 1))


def rvq_mean_squared_error(n, p, bits, queries, rng):
    """Monte Carlo mean of d_c^2 between Haar points and their RVQ codeword."""
    cb = build_rvq_codebook(n, p, bits, rng)
    pts = haar_truncated_unitary(n, p, rng, size=queries)
    return float(np.mean([max(_scan(cb.entries, X).min(), 0.0) for X in pts]))


def calibrate_ball_coefficient(n, p, rng, bits=8, queries=1000):
    """Estimate c by matching the RVQ mean squared error at a small codebook.

    Inverts ``r_bar = Gamma(2/G) / ((G/2) (c J)^(2/G))`` for c.
    """
    G = grassmann_real_dimension(n, p)
    D2 = rvq_mean_squared_error(n, p, bits, queries, rng)
    log_cJ = (G / 2) * (gammaln(2 / G) - math.log(G / 2) - math.log(D2))
    return math.exp(log_cJ - bits * math.log(2.0))


class CalibrationCache:
    """Calibrated coefficients keyed by (n, p, bits, seed), optionally on disk."""

    def __init__(self, path=None):
        self.path = None if path is None else Path(path)
        self._data = {}
        if self.path is not None and self.path.exists():
            self._data = json.loads(self.path.read_text())

    @staticmethod
    def key(n, p, bits, seed):
        return f"{n},{p},{bits},{seed}"

    def get(self, n, p, seed, bits=8, queries=1000):
        k = self.key(n, p, bits, seed)
        if k not in self._data:
            rng = np.random.default_rng([int(seed), n, p, bits])
            self._data[k] = calibrate_ball_coefficient(n, p, rng, bits, queries)
            if self.path is not None:
                self.path.write_text(json.dumps(self._data, indent=1, sort_keys=True))
        return self._data[k]
