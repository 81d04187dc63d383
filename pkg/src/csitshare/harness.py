"""Monte Carlo sum-rate experiments for quantized CSIT sharing.

One trial draws a channel realization and runs the full backhaul pipeline:

1. each BS factors its stacked cross channels ``H_j = F_j C_j``,
2. the subspace ``F_j`` reaches the central node exactly, RVQ-quantized,
   perturbed (large-codebook surrogate), or, for the NC-CGQ baseline, as
   separately quantized normalized channels,
3. the central node aligns on what it received,
4. precoders travel back (exact, subspace-quantized on G(M, d), or
   vectorized on G(Md, 1)),
5. BS j transmits the orthonormalized ``C_j^-1 F_j^H Fh_j Vh_j``.

The alignment and all quantization are independent of the transmit power,
so a single pass per trial serves every SNR point that shares a bit budget.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import SystemDims, cross_indices, generate_channel_set, stacked_interference_matrix
from .ia import (
    DEFAULT_MAX_ITER,
    DEFAULT_RESTARTS,
    DEFAULT_TOL,
    InfeasibleError,
    ia_feasible,
    leakage_power,
    solve_ia,
    total_precoder,
)
from .linalg import herm, orthonormalize, qr_orthonormal_factor
from .perturbation import CalibrationCache, ball_volume_coefficient, perturbation_draw, perturbation_params
from .quantizer import (
    MAX_CODEBOOK_BITS,
    ResourceError,
    bit_scaling,
    build_composite_codebook,
    build_rvq_codebook,
    grassmann_real_dimension,
    nc_cgq_quantize,
    quantize,
    quantize_precoder_vectorized,
    unvec,
    vec,
)

log = logging.getLogger(__name__)

CSIT_MODES = ("perfect", "rvq", "perturbation", "nc_cgq")
PRECODER_MODES = ("subspace", "vectorized")
BITS_MODES = ("fixed", "scaled")
SCENARIOS = ("I", "II", "III")
RECEIVERS = ("ia", "mmse")
CSV_HEADER = [
    "snr_db", "sum_rate_mean", "sum_rate_stderr", "trials", "excluded", "n_b", "n_c",
    "backhaul_bits", "csit_mode", "precoder_mode", "scenario",
]
MAX_EXCLUSION_RATE = 0.02


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# rates and bit accounting
# ---------------------------------------------------------------------------

def _psd_eigvals(Q):
    Qh = 0.5 * (Q + herm(Q))
    w = np.linalg.eigvalsh(Qh)
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    if np.min(w, initial=0.0) < -1e-9 * scale:
        raise np.linalg.LinAlgError("covariance is not positive semidefinite")
    return np.clip(w, 0.0, None)


def _log2det_plus(w, a):
    """log2 |I + a Q| from eigenvalues w of Q, vectorized over a."""
    a = np.asarray(a, dtype=float)
    return np.sum(np.log2(1.0 + a[..., None] * w), axis=-1)


def per_user_rate(H_row, i, U_i, V, P, d=None):
    """Achievable rate of user i treating residual interference as noise.

    ``R = log2|I + (P/d)(Q_S + Q_I)| - log2|I + (P/d) Q_I|`` with
    ``Q_S = U^H H_ii V_i V_i^H H_ii^H U`` and ``Q_I`` the same sum over the
    interfering BSs.

    Parameters
    ----------
    H_row : (K, N, M) array
        Channels from every BS to user i, ``H_row[j] = H_ij``.
    i : int
    U_i : (N, d) receive filter.
    V : (K, M, d) transmitted precoders, assumed orthonormal.
    P : float or array
        Transmit power(s); the result has the same shape.
    """
    V = np.asarray(V)
    d = V.shape[-1] if d is None else d
    B = herm(U_i) @ np.asarray(H_row) @ V  # B[j] = U^H H_ij V_j
    Q = B @ herm(B)
    Q_S = Q[i]
    Q_I = np.sum(np.delete(Q, i, axis=0), axis=0) if len(Q) > 1 else np.zeros_like(Q_S)
    a = np.asarray(P, dtype=float) / d
    R = _log2det_plus(_psd_eigvals(Q_S + Q_I), a) - _log2det_plus(_psd_eigvals(Q_I), a)
    R = np.maximum(R, 0.0)
    return float(R) if R.ndim == 0 else R


def sum_rate(cs, U, V, P):
    return sum(per_user_rate(cs.H[i], i, U[i], V, P, cs.dims.d) for i in range(cs.dims.K))


def mmse_filters(cs, V, P):
    """Orthonormal bases of the per-user MMSE filters for transmit power P.

    Span of ``R_i^-1 H_ii V_i`` with ``R_i`` the interference-plus-noise
    covariance.  Projecting onto it loses no information about the desired
    streams, so the rate through these filters equals the full-array rate.
    """
    K, N, d = cs.dims.K, cs.dims.N, cs.dims.d
    U = np.empty((K, N, d), dtype=complex)
    for i in range(K):
        B = cs.H[i] @ V  # B[j] = H_ij V_j
        R = np.eye(N) + (P / d) * sum(B[j] @ herm(B[j]) for j in range(K) if j != i)
        U[i] = orthonormalize(np.linalg.solve(R, B[i]))
    return U


def sum_rate_mmse(cs, V, P):
    """Sum-rate when users recompute MMSE filters from their true channels."""
    return sum(
        per_user_rate(cs.H[i], i, U_i, V, P, cs.dims.d)
        for i, U_i in enumerate(mmse_filters(cs, V, P))
    )


def bits_exchanged(scenario, K, n_b, n_c):
    """Total backhaul bits per channel realization.

    I: every BS to a central node and back, ``K (N_b + N_c)``.
    II: one BS hosts the solve, ``(K - 1)(N_b + N_c)``.
    III: every BS broadcasts its CSI to the others, ``K (K - 1) N_b``.
    """
    if scenario == "I":
        return K * (n_b + n_c)
    if scenario == "II":
        return (K - 1) * (n_b + n_c)
    if scenario == "III":
        return K * (K - 1) * n_b
    raise ValueError(f"unknown scenario {scenario!r}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    """Experiment definition; mirrors the JSON config file field for field."""

    dims: SystemDims = field(default_factory=lambda: SystemDims(3, 5, 3, 2))
    snr_grid: list = field(default_factory=lambda: [0.0, 10.0, 20.0, 30.0, 40.0])
    trials: int = 500
    seed: int = 0
    csit_mode: str = "perfect"
    precoder_mode: str = "subspace"
    bits_mode: str = "fixed"
    n_b: int = 10
    n_c: int = 12
    scenario: str = "I"
    # "ia": users apply the centrally computed filters; "mmse": users
    # recompute MMSE filters from their own channels
    receiver: str = "ia"
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    restarts: int = DEFAULT_RESTARTS
    # "literature", "calibrated", or a number
    ball_coefficient: object = "calibrated"
    calibration_bits: int = 8
    calibration_queries: int = 1000

    def __post_init__(self):
        if isinstance(self.dims, dict):
            self.dims = SystemDims(**self.dims)
        self.snr_grid = [float(x) for x in self.snr_grid]
        self.validate()

    def validate(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_grid:
            raise ConfigError("snr_grid is empty")
        for name, allowed in (("csit_mode", CSIT_MODES), ("precoder_mode", PRECODER_MODES),
                              ("bits_mode", BITS_MODES), ("scenario", SCENARIOS),
                              ("receiver", RECEIVERS)):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.csit_mode == "nc_cgq" and self.precoder_mode != "vectorized":
            raise ConfigError("nc_cgq requires precoder_mode 'vectorized'")
        if self.bits_mode == "fixed" and (self.n_b < 0 or self.n_c < 0):
            raise ConfigError("bit budgets must be nonnegative")
        if not (isinstance(self.ball_coefficient, (int, float))
                or self.ball_coefficient in ("literature", "calibrated")):
            raise ConfigError("ball_coefficient must be 'literature', 'calibrated' or a number")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        out = asdict(self)
        out["dims"] = self.dims.as_dict()
        return out


def snr_to_power(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def _feedback_dims(config):
    """Manifolds (n, p) carrying the CSI and precoder feedback."""
    dm = config.dims
    csi = (dm.stack_rows, dm.M)
    prec = (dm.M * dm.d, 1) if config.precoder_mode == "vectorized" else (dm.M, dm.d)
    return csi, prec


def bit_budgets(config):
    """Per-SNR ``(n_b, n_c)``; perfect CSI carries no quantization."""
    if config.csit_mode == "perfect":
        return [(0, 0)] * len(config.snr_grid)
    if config.bits_mode == "fixed":
        budgets = [(config.n_b, config.n_c)] * len(config.snr_grid)
    else:
        csi, prec = _feedback_dims(config)
        G_b = grassmann_real_dimension(*csi)
        G_c = grassmann_real_dimension(*prec)
        budgets = [(bit_scaling(P, G_b), bit_scaling(P, G_c)) for P in snr_to_power(config.snr_grid)]
    if config.scenario == "III":
        budgets = [(nb, 0) for nb, _ in budgets]
    return budgets


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

@dataclass
class SumRatePoint:
    snr_db: float
    sum_rate_mean: float
    sum_rate_stderr: float
    trials: int
    excluded: int
    n_b: int
    n_c: int
    backhaul_bits: int
    leakage_median: float


@dataclass
class SumRateCurve:
    points: list
    csit_mode: str
    precoder_mode: str
    scenario: str
    valid: bool = True
    rates: np.ndarray = field(default=None, repr=False)  # (trials, snr), nan if excluded
    leakage: np.ndarray = field(default=None, repr=False)

    @property
    def snr_db(self):
        return np.array([p.snr_db for p in self.points])

    @property
    def means(self):
        return np.array([p.sum_rate_mean for p in self.points])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow([
                repr(p.snr_db), repr(p.sum_rate_mean), repr(p.sum_rate_stderr), p.trials,
                p.excluded, p.n_b, p.n_c, p.backhaul_bits,
                self.csit_mode, self.precoder_mode, self.scenario,
            ])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv())


class Resources:
    """Codebooks and perturbation coefficients shared by all trials."""

    def __init__(self, config, calibration=None):
        self.config = config
        self.calibration = calibration or CalibrationCache()
        self._codebooks = {}
        self._coeff = {}

    def codebook(self, n, p, bits):
        key = (n, p, bits)
        if key not in self._codebooks:
            rng = np.random.default_rng([int(self.config.seed), 0xC0DE, n, p, bits])
            self._codebooks[key] = build_rvq_codebook(n, p, bits, rng)
        return self._codebooks[key]

    def composite(self, dim, factors, bits):
        key = ("composite", dim, factors, bits)
        if key not in self._codebooks:
            rng = np.random.default_rng([int(self.config.seed), 0xC06, dim, factors, bits])
            self._codebooks[key] = build_composite_codebook(dim, factors, bits, rng)
        return self._codebooks[key]

    def coefficient(self, n, p):
        mode = self.config.ball_coefficient
        if isinstance(mode, (int, float)):
            return float(mode)
        if (n, p) not in self._coeff:
            if mode == "literature":
                self._coeff[n, p] = ball_volume_coefficient(n, p)
            else:
                self._coeff[n, p] = self.calibration.get(
                    n, p, self.config.seed, self.config.calibration_bits,
                    self.config.calibration_queries)
        return self._coeff[n, p]

    def params(self, n, p, bits):
        return perturbation_params(grassmann_real_dimension(n, p), self.coefficient(n, p), bits)

    def prepare(self, budgets):
        """Build everything up front so forked workers inherit it."""
        cfg = self.config
        (bn, bp), (cn, cp) = _feedback_dims(cfg)
        dm = cfg.dims
        for n_b, n_c in set(budgets):
            if cfg.csit_mode == "rvq":
                self.codebook(bn, bp, n_b)
            elif cfg.csit_mode == "nc_cgq":
                self.composite(dm.N * dm.M, dm.K - 1, n_b)
            if cfg.csit_mode in ("rvq", "nc_cgq") and cfg.scenario != "III":
                self.codebook(cn, cp, n_c)
        if cfg.csit_mode == "perturbation":
            self.coefficient(bn, bp)
            self.coefficient(cn, cp)


def check_resources(config, budgets):
    if config.csit_mode in ("rvq", "nc_cgq"):
        worst = max(max(b) for b in budgets)
        if worst > MAX_CODEBOOK_BITS:
            raise ResourceError(
                f"{worst}-bit codebook requested; above {MAX_CODEBOOK_BITS} bits "
                "only the perturbation surrogate is available"
            )


def _quantize_subspace(F, mode, bits, res, rng):
    n, p = F.shape
    if mode == "rvq":
        return quantize(F, res.codebook(n, p, bits)).point
    if mode == "perturbation":
        return perturbation_draw(F, res.params(n, p, bits), rng).result
    return F


def _feedback_precoder(Vt, config, bits, res, rng):
    """What the BS receives for the aligned precoder Vt (M x d)."""
    mode = config.csit_mode
    if mode == "perfect" or config.scenario == "III":
        return Vt
    M, d = Vt.shape
    if config.precoder_mode == "subspace":
        return _quantize_subspace(Vt, "perturbation" if mode == "perturbation" else "rvq",
                                  bits, res, rng)
    if mode == "perturbation":
        v = vec(Vt)[:, None] / np.linalg.norm(Vt)
        moved = perturbation_draw(v, res.params(M * d, 1, bits), rng).result
        return unvec(moved[:, 0], M, d)
    return quantize_precoder_vectorized(Vt, res.codebook(M * d, 1, bits))[0]


def run_pipeline(cs, config, n_b, n_c, res, rng):
    """One pass of the CSI-sharing pipeline on a channel realization.

    Returns ``(U, V, solution)``: receive filters, transmitted (orthonormal)
    precoders, and the alignment solver output.
    """
    dm = cs.dims
    K = dm.K
    mode = config.csit_mode
    # scenario II: BS 0 hosts the solve and keeps its own CSI and precoder exact
    exact = {0} if config.scenario == "II" else set()
    stacks = [stacked_interference_matrix(cs, j) for j in range(K)]
    factors = [qr_orthonormal_factor(Hj) for Hj in stacks]

    if mode == "nc_cgq":
        received = []
        for j in range(K):
            if j in exact:
                received.append(factors[j])
                continue
            cb = res.composite(dm.N * dm.M, K - 1, n_b)
            rec = nc_cgq_quantize(cs.H[cross_indices(K, j), j], cb)[0]
            received.append(qr_orthonormal_factor(np.concatenate(list(rec), axis=0)))
        F_hat = np.stack([F for F, _ in received])
    else:
        F_hat = np.stack([
            F if j in exact else _quantize_subspace(F, mode, n_b, res, rng)
            for j, (F, _) in enumerate(factors)
        ])

    sol = solve_ia(F_hat, dm, rng, tol=config.tol, max_iter=config.max_iter,
                   restarts=config.restarts)

    V = np.empty((K, dm.M, dm.d), dtype=complex)
    for j in range(K):
        F, C = factors[j]
        if mode == "nc_cgq":
            # central node designs for its channel estimate, then feeds back
            W = orthonormalize(np.linalg.solve(received[j][1], sol.V[j]))
            V[j] = W if j in exact else orthonormalize(_feedback_precoder(W, config, n_c, res, rng))
            continue
        V_hat = sol.V[j] if j in exact else _feedback_precoder(sol.V[j], config, n_c, res, rng)
        V[j] = total_precoder(C, F, F_hat[j], V_hat, normalize=True)
    return sol.U, V, sol


def _groups(budgets):
    groups = {}
    for k, b in enumerate(budgets):
        groups.setdefault(b, []).append(k)
    return list(groups.items())


def _trial(config, res, budgets, t):
    """Sum-rate and leakage at every SNR point for trial t (nan if excluded)."""
    powers = snr_to_power(config.snr_grid)
    rates = np.full(len(powers), np.nan)
    leak = np.full(len(powers), np.nan)
    seed = int(config.seed)
    cs = generate_channel_set(config.dims, np.random.default_rng([seed, t, 0]))
    for g, ((n_b, n_c), idx) in enumerate(_groups(budgets)):
        rng = np.random.default_rng([seed, t, 1, g])
        U, V, sol = run_pipeline(cs, config, n_b, n_c, res, rng)
        if not sol.converged:
            log.debug("trial %d: solver stopped at %.3g", t, sol.residual)
            continue
        P = powers[idx]
        if config.receiver == "mmse":
            rates[idx] = [sum_rate_mmse(cs, V, p) for p in P]
        else:
            rates[idx] = sum_rate(cs, U, V, P)
        leak[idx] = leakage_power(cs, U, V, 1.0).total * P
    return rates, leak


_WORKER = {}


def _work(chunk):
    cfg, res, budgets = _WORKER["args"]
    return [(t, *_trial(cfg, res, budgets, t)) for t in chunk]


def _mean_stderr(x):
    n = len(x)
    if n == 0:
        return float("nan"), float("nan")
    mean = math.fsum(x) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((xi - mean) ** 2 for xi in x) / (n - 1)
    return mean, math.sqrt(var / n)


def run_experiment(config, threads=1, calibration=None):
    """Run the configured Monte Carlo experiment.

    Trials failing to align are dropped and counted per SNR point; the
    curve is flagged invalid when more than 2 % of trials are dropped.

    Returns
    -------
    SumRateCurve
        With per-trial ``rates`` and ``leakage`` arrays attached.
    """
    dm = config.dims
    if not ia_feasible(dm) or not dm.needs_alignment:
        raise InfeasibleError(f"dimensions {dm} do not admit the alignment pipeline")
    budgets = bit_budgets(config)
    check_resources(config, budgets)
    res = Resources(config, calibration)
    res.prepare(budgets)

    T = config.trials
    rates = np.empty((T, len(budgets)))
    leak = np.empty((T, len(budgets)))
    if threads <= 1:
        for t in range(T):
            rates[t], leak[t] = _trial(config, res, budgets, t)
    else:
        _WORKER["args"] = (config, res, budgets)
        chunks = [list(range(T))[k::threads * 4] for k in range(threads * 4)]
        ctx = multiprocessing.get_context("fork")
        try:
            with ctx.Pool(threads) as pool:
                for out in pool.imap_unordered(_work, [c for c in chunks if c]):
                    for t, r, l in out:
                        rates[t], leak[t] = r, l
        finally:
            _WORKER.clear()

    points = []
    valid = True
    for k, (snr, (n_b, n_c)) in enumerate(zip(config.snr_grid, budgets)):
        ok = ~np.isnan(rates[:, k])
        mean, se = _mean_stderr(rates[ok, k].tolist())
        excluded = int(T - ok.sum())
        if excluded > MAX_EXCLUSION_RATE * T:
            valid = False
        points.append(SumRatePoint(
            snr, mean, se, int(ok.sum()), excluded, n_b, n_c,
            bits_exchanged(config.scenario, dm.K, n_b, n_c),
            float(np.median(leak[ok, k])) if ok.any() else float("nan"),
        ))
    return SumRateCurve(points, config.csit_mode, config.precoder_mode, config.scenario,
                        valid, rates, leak)


def dof_slope(curve, window):
    """Least-squares slope of mean sum-rate against log2 P over a dB window.

    Units are bits per channel use per doubling of power (3.01 dB); at high
    SNR this estimates the total degrees of freedom.
    """
    lo, hi = window
    snr = curve.snr_db
    sel = (snr >= lo) & (snr <= hi)
    if sel.sum() < 2:
        raise ValueError(f"window {window} covers fewer than two grid points")
    x = snr[sel] / (10.0 * math.log10(2.0))
    y = curve.means[sel]
    if not np.all(np.isfinite(y)):
        raise ValueError("window contains points without valid trials")
    return float(np.polyfit(x, y, 1)[0])
