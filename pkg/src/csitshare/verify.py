"""Randomized self-checks of the exact algebraic identities of the pipeline.

Each check returns a :class:`CheckResult`; ``run_all`` drives them for the
``verify`` command.  Sizes default to the full-strength suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SystemDims, generate_channel_set, stacked_interference_matrix
from .ia import (
    leakage_decomposition,
    leakage_power,
    rotation_equivalence_check,
    solve_ia,
    stacked_filter,
    total_precoder,
)
from .linalg import chordal_distance, haar_truncated_unitary, haar_unitary, herm, qr_orthonormal_factor
from .perturbation import perturb_point

PIPELINE_DIMS = SystemDims(3, 5, 3, 2)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _random_filters(dims, rng):
    U = haar_truncated_unitary(dims.N, dims.d, rng, size=dims.K)
    V = haar_truncated_unitary(dims.M, dims.d, rng, size=dims.K)
    return U, V


def check_leakage_dual_form(rng, draws=200, rtol=1e-8):
    worst = 0.0
    for _ in range(draws):
        cs = generate_channel_set(PIPELINE_DIMS, rng)
        U, V = _random_filters(PIPELINE_DIMS, rng)
        rep = leakage_power(cs, U, V, P=10.0 ** rng.uniform(0, 4))
        worst = max(worst, abs(rep.total - rep.total_stacked) / rep.total)
    return CheckResult("leakage dual form", worst <= rtol, f"max rel. gap {worst:.2e}")


def _quantized_setup(dims, rng, spread=0.2):
    """Channel, exact factors, perturbed subspaces and a tight IA solve on them."""
    cs = generate_channel_set(dims, rng)
    fac = [qr_orthonormal_factor(stacked_interference_matrix(cs, j)) for j in range(dims.K)]
    F_hat = np.stack([perturb_point(F, spread * rng.uniform(), rng) for F, _ in fac])
    sol = solve_ia(F_hat, dims, rng, tol=1e-26, max_iter=20000)
    return cs, fac, F_hat, sol


def check_leakage_decomposition(rng, setups=100, per_bs=4, rtol=1e-8):
    """Identity ||U^H F F^H Fh Vh|| = ||X_b + X_c|| and the two norm bounds.

    Every setup contributes ``K * per_bs`` precoder perturbations, so the
    default runs 1200 bound evaluations.
    """
    dims = PIPELINE_DIMS
    worst_id = worst_channel_form = 0.0
    violations = draws = n = 0
    while n < setups:
        cs, fac, F_hat, sol = _quantized_setup(dims, rng)
        if not sol.converged:
            continue
        n += 1
        for j in range(dims.K):
            F, C = fac[j]
            Um = stacked_filter(sol.U, j)
            for _ in range(per_bs):
                V_hat = perturb_point(sol.V[j], 0.5 * rng.uniform(), rng)
                dec = leakage_decomposition(F, F_hat[j], sol.V[j], V_hat, Um)
                worst_id = max(worst_id, abs(dec.leakage_norm - dec.split_norm) / dec.leakage_norm)
                Vj = total_precoder(C, F, F_hat[j], V_hat, normalize=False)
                direct = np.linalg.norm(herm(Um) @ stacked_interference_matrix(cs, j) @ Vj)
                worst_channel_form = max(worst_channel_form, abs(direct - dec.split_norm) / direct)
                violations += not (dec.bound_b_ok and dec.bound_c_ok)
                draws += 1
    ok = worst_id <= rtol and worst_channel_form <= rtol and violations == 0
    return CheckResult(
        "leakage decomposition", ok,
        f"identity gap {worst_id:.2e}, channel-form gap {worst_channel_form:.2e}, "
        f"bounds hold on {draws - violations}/{draws} draws",
    )


def check_rotation_equivalence(rng, rotations=100):
    passed = 0
    for k in range(rotations):
        dims = PIPELINE_DIMS if k % 2 == 0 else SystemDims(3, 2, 2, 1)
        cs = generate_channel_set(dims, rng)
        passed += rotation_equivalence_check(cs, rng)
    return CheckResult("rotation equivalence", passed == rotations, f"{passed}/{rotations} rotations aligned")


def check_perturbation_distance(rng, draws=1000, atol=1e-10):
    worst = 0.0
    for k in range(draws):
        n, p = [(5, 2), (6, 5), (10, 1), (4, 2)][k % 4]
        F = haar_truncated_unitary(n, p, rng)
        r = rng.uniform(0, min(1.0, p, n - p))
        G = perturb_point(F, r, rng)
        worst = max(worst, abs(chordal_distance(F, G) ** 2 - r))
    return CheckResult("perturbation distance control", worst <= atol, f"max |d^2 - r| {worst:.2e}")


def check_metric_axioms(rng, triples=1000, slack=1e-9):
    bad = 0
    for k in range(triples):
        n, p = [(4, 2), (6, 5), (5, 2)][k % 3]
        X, Y, Z = haar_truncated_unitary(n, p, rng, size=3)
        dxy, dyx = chordal_distance(X, Y), chordal_distance(Y, X)
        dxz, dzy = chordal_distance(X, Z), chordal_distance(Z, Y)
        O = haar_unitary(p, rng)
        bad += not (
            dxy == dyx
            and dxy <= dxz + dzy + slack
            and chordal_distance(X, X @ O) <= 1e-7
            and abs(chordal_distance(X, Y @ O) - dxy) <= 1e-10
            and 0.0 <= dxy <= np.sqrt(p) + 1e-12
        )
    return CheckResult("chordal metric axioms", bad == 0, f"{triples - bad}/{triples} triples")


CHECKS = (
    check_leakage_dual_form,
    check_leakage_decomposition,
    check_rotation_equivalence,
    check_perturbation_distance,
    check_metric_axioms,
)


def run_all(seed=0):
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
