import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gamma

from csitshare.linalg import chordal_distance, haar_truncated_unitary, herm
from csitshare.perturbation import (
    CalibrationCache,
    DegenerateParamsError,
    PerturbationParams,
    ball_volume_coefficient,
    calibrate_ball_coefficient,
    draw_angles,
    moment_bounds,
    perturb,
    perturb_via_complement,
    perturbation_draw,
    perturbation_params,
    rvq_mean_squared_error,
    sample_squared_error,
)


class TestMomentBounds:
    @pytest.mark.parametrize("c", [1e-3, 0.2, 1.0, 50.0])
    def test_ordering(self, c):
        lo, hi = moment_bounds(2, 10, c, 1024)
        assert 0 < lo <= hi

    def test_two_dimensional_case(self):
        c, J = 0.7, 64
        assert moment_bounds(2, 2, c, J)[1] == pytest.approx(gamma(1.0) / (1.0 * c * J))
        assert moment_bounds(2, 2, c, J)[1] == pytest.approx(1 / (c * J))

    def test_decay(self):
        vals = [moment_bounds(2, 12, 0.2, 2.0 ** b) for b in (4, 16, 64, 256)]
        assert all(a[0] > b[0] and a[1] > b[1] for a, b in zip(vals, vals[1:]))
        assert vals[-1][1] < 1e-10

    def test_bad_args(self):
        with pytest.raises(ValueError):
            moment_bounds(2, 0, 1.0, 4)


class TestParams:
    def test_more_bits_smaller_error(self):
        rs = [perturbation_params(12, 0.2, b).r_bar for b in range(0, 40, 3)]
        assert all(a > b for a, b in zip(rs, rs[1:]))

    def test_scaled_bits_give_inverse_power(self):
        # J = 2^(6A) = P^6 on G = 12: (cJ)^(1/6) = c^(1/6) P, so r_bar * P is constant
        c = 0.2
        vals = [perturbation_params(12, c, 6 * A).r_bar * 2.0 ** A for A in range(1, 14)]
        expect = gamma(1 / 6) / (6 * c ** (1 / 6))
        np.testing.assert_allclose(vals, expect, rtol=1e-12)

    @pytest.mark.parametrize("G", [1, 2, 10, 12, 18])
    @pytest.mark.parametrize("bits", [0, 1, 8, 20])
    @pytest.mark.parametrize("c", [0.01, 0.2, 1.0, 10.0])
    def test_variance_nonnegative(self, G, bits, c):
        assert perturbation_params(G, c, bits).sigma2_r >= 0


class TestSampling:
    def test_zero_variance(self):
        p = PerturbationParams(10, 1.0, 256, 0.3, 0.0)
        assert all(sample_squared_error(p, np.random.default_rng(k)) == 0.3 for k in range(5))

    def test_truncated_normal_mean(self):
        # wide variance so truncation matters; scipy truncnorm is the oracle
        p = PerturbationParams(10, 1.0, 4, 0.05, 0.01)
        rng = np.random.default_rng(1)
        r = np.array([sample_squared_error(p, rng) for _ in range(100_000)])
        assert r.min() >= 0
        sd = math.sqrt(p.sigma2_r)
        law = stats.truncnorm((0 - p.r_bar) / sd, np.inf, loc=p.r_bar, scale=sd)
        se = r.std(ddof=1) / math.sqrt(len(r))
        assert abs(r.mean() - law.mean()) <= 3 * se

    def test_degenerate(self):
        p = PerturbationParams(10, 1.0, 4, -50.0, 1.0)
        with pytest.raises(DegenerateParamsError):
            sample_squared_error(p, np.random.default_rng(0))


class TestAngles:
    def test_sum_of_squared_sines(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            p = int(rng.integers(1, 5))
            r = rng.uniform(0, 1)
            th = draw_angles(p, r, rng)
            assert abs(np.sum(np.sin(th) ** 2) - r) <= 1e-12

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            draw_angles(2, 2.5, np.random.default_rng(0))

    def test_fixed_s_outside_domain(self):
        with pytest.raises(ValueError):
            draw_angles(2, 1.8, np.random.default_rng(0), s=[1.0, 0.0])


class TestPerturb:
    def test_zero_distance(self):
        rng = np.random.default_rng(3)
        F = haar_truncated_unitary(5, 2, rng)
        assert chordal_distance(F, perturb(F, 0.0, rng)) <= 1e-7

    def test_exact_distance(self):
        rng = np.random.default_rng(4)
        F = haar_truncated_unitary(5, 2, rng)
        G = perturb(F, 0.3, rng)
        assert np.linalg.norm(herm(G) @ G - np.eye(2)) <= 1e-10
        assert abs(chordal_distance(F, G) ** 2 - 0.3) <= 1e-10

    def test_full_rotation(self):
        rng = np.random.default_rng(5)
        F = haar_truncated_unitary(5, 2, rng)
        G = perturb(F, 2.0, rng, s=[0.5, 0.5])
        assert np.linalg.norm(herm(F) @ G) <= 1e-10
        assert chordal_distance(F, G) == pytest.approx(math.sqrt(2))

    def test_needs_room(self):
        with pytest.raises(ValueError):
            perturb(haar_truncated_unitary(6, 5, np.random.default_rng(0)), 0.1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            perturb(haar_truncated_unitary(5, 2, np.random.default_rng(0)), 2.5, np.random.default_rng(0))


class TestComplementPath:
    def test_stacked_channel_manifold(self):
        rng = np.random.default_rng(6)
        F = haar_truncated_unitary(6, 5, rng)
        G = perturb_via_complement(F, 0.2, rng)
        assert G.shape == (6, 5)
        assert np.linalg.norm(herm(G) @ G - np.eye(5)) <= 1e-10
        assert abs(chordal_distance(F, G) ** 2 - 0.2) <= 1e-9

    def test_zero(self):
        rng = np.random.default_rng(7)
        F = haar_truncated_unitary(6, 5, rng)
        assert chordal_distance(F, perturb_via_complement(F, 0.0, rng)) <= 1e-7

    def test_max_rotation(self):
        rng = np.random.default_rng(8)
        F = haar_truncated_unitary(6, 5, rng)
        G = perturb_via_complement(F, 1.0, rng)
        assert abs(chordal_distance(F, G) ** 2 - 1.0) <= 1e-9
        # one principal angle at pi/2: G^H F loses exactly one direction
        s = np.linalg.svd(herm(F) @ G, compute_uv=False)
        assert s.min() <= 1e-7 and np.allclose(s[:-1], 1.0)

    def test_duality_distribution(self):
        # G(4, 2) admits both constructions; compare the law of the distance
        # to a fixed third subspace
        rng = np.random.default_rng(9)
        F, Y = haar_truncated_unitary(4, 2, rng, size=2)
        a = [chordal_distance(Y, perturb(F, 0.4, rng)) for _ in range(1000)]
        b = [chordal_distance(Y, perturb_via_complement(F, 0.4, rng)) for _ in range(1000)]
        assert stats.ks_2samp(a, b).pvalue > 0.01


class TestAlgorithm:
    def test_draw_consistency(self):
        rng = np.random.default_rng(10)
        params = perturbation_params(10, ball_volume_coefficient(6, 5), 8)
        for _ in range(200):
            F = haar_truncated_unitary(6, 5, rng)
            dr = perturbation_draw(F, params, rng)
            assert dr.r >= 0
            assert abs(np.sum(np.sin(dr.angles) ** 2) - dr.r) <= 1e-12
            assert abs(chordal_distance(F, dr.result) ** 2 - dr.r) <= 1e-10

    def test_matches_rvq_mean(self):
        # sanity gate: the surrogate's mean squared error tracks real RVQ
        rng = np.random.default_rng(11)
        emp = rvq_mean_squared_error(5, 2, 8, 10_000, rng)
        r_bar = perturbation_params(12, ball_volume_coefficient(5, 2), 8).r_bar
        assert 1 / 1.5 <= r_bar / emp <= 1.5


class TestBallCoefficient:
    def test_lines_have_unit_coefficient(self):
        # on G(n, 1), P(sin^2 <= x) = x^(n-1) exactly, so c = 1
        for n in (2, 5, 10):
            assert ball_volume_coefficient(n, 1) == pytest.approx(1.0)

    def test_complement_symmetry(self):
        assert ball_volume_coefficient(6, 5) == pytest.approx(ball_volume_coefficient(6, 1))

    def test_calibration_near_closed_form(self):
        c = calibrate_ball_coefficient(5, 2, np.random.default_rng(12))
        assert c == pytest.approx(ball_volume_coefficient(5, 2), rel=0.15)

    def test_cache_roundtrip(self, tmp_path):
        path = tmp_path / "cal.json"
        cache = CalibrationCache(path)
        c = cache.get(5, 2, seed=3, bits=6, queries=200)
        again = CalibrationCache(path)
        assert again.get(5, 2, seed=3, bits=6, queries=200) == c
        assert CalibrationCache.key(5, 2, 6, 3) in path.read_text()
