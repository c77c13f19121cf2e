import math

import numpy as np
import pytest

from qaoa_thermal.ising import IsingInstance, complement, full_spectrum, generate_maxcut, generate_qubo, spins
from qaoa_thermal.structure import (
    JointMoments, chi2_2_quantile, em_mixture2, fit_mixture2, fit_sigma_eh_slope, hierarchy_h0, hierarchy_sigma_eh,
    joint_moments, mahalanobis, mirror_hierarchy_sigma_eh, normality_test, point_cloud, qq_agreement, sigma_eh_all,
    walsh_hadamard, xor_convolve, _mahalanobis_sq,
)

from conftest import naive_sigma_eh, pure_field, random_ising


class TestJointMoments:
    @pytest.mark.parametrize("n", [5, 8, 14])
    def test_exact_hamming_moments(self, n):
        inst = generate_maxcut(n, 0.5, 1)
        for ref in (0, 3, (1 << n) - 1):
            m = joint_moments(inst, ref)
            assert m.mu_h == pytest.approx(n / 2, abs=1e-12)
            assert m.sigma_h == pytest.approx(math.sqrt(n) / 2, abs=1e-12)

    def test_zero_hamiltonian(self):
        m = joint_moments(IsingInstance(4, np.zeros((4, 4)), np.zeros(4)), 5)
        assert (m.sigma_eh, m.rho) == (0.0, 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_correlation_sign_by_reference(self, seed):
        inst = generate_qubo(8, 1.0, seed)
        t = full_spectrum(inst)
        assert joint_moments(inst, t.ground_state, t).rho > 0
        assert joint_moments(inst, t.highest_state, t).rho < 0

    def test_rho_bounded(self, any_instance):
        for ref in range(0, 128, 17):
            assert abs(joint_moments(any_instance, ref).rho) <= 1.0


class TestSigmaEH:
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_naive(self, seed):
        inst = random_ising(8, seed)
        E = full_spectrum(inst).values
        fast = sigma_eh_all(inst)
        naive = np.array([naive_sigma_eh(E, x, 8) for x in range(256)])
        np.testing.assert_allclose(fast, naive, atol=1e-9)

    def test_pure_field_half_energy(self):
        inst = pure_field(8, 2)
        np.testing.assert_allclose(sigma_eh_all(inst), -0.5 * full_spectrum(inst).values, atol=1e-12)

    def test_field_free_vanishes(self, maxcut8):
        np.testing.assert_allclose(sigma_eh_all(maxcut8), 0.0, atol=1e-12)

    @pytest.mark.parametrize("n", [6, 10, 14])
    def test_field_identity(self, n):
        inst = random_ising(n, n)
        field_energy = np.array([inst.fields @ spins(x, n) for x in range(0, 1 << n, max(1, (1 << n) // 512))])
        got = sigma_eh_all(inst)[:: max(1, (1 << n) // 512)]
        np.testing.assert_allclose(got, -0.5 * field_energy, atol=1e-9)

    def test_subset_matches_naive(self, maxcut8):
        E = full_spectrum(maxcut8).values
        mask = np.random.default_rng(0).random(256) < 0.5
        fast = sigma_eh_all(maxcut8, subset=mask)
        H = lambda x: np.array([bin(x ^ y).count("1") for y in np.flatnonzero(mask)], dtype=float)
        Es = E[mask]
        for x in (0, 7, 100, 255):
            h = H(x)
            assert fast[x] == pytest.approx(np.mean((h - h.mean()) * (Es - Es.mean())), abs=1e-12)


class TestWalshHadamard:
    def test_xor_convolution_naive(self):
        rng = np.random.default_rng(0)
        k, v = rng.standard_normal(32), rng.standard_normal(32)
        naive = np.array([sum(k[x ^ y] * v[y] for y in range(32)) for x in range(32)])
        np.testing.assert_allclose(xor_convolve(k, v), naive, atol=1e-12)

    def test_involution(self):
        v = np.random.default_rng(1).standard_normal(64)
        np.testing.assert_allclose(walsh_hadamard(walsh_hadamard(v)) / 64, v, atol=1e-13)

    def test_mirror_hierarchy_brute_force(self, maxcut8):
        t = full_spectrum(maxcut8)
        sig, h0 = mirror_hierarchy_sigma_eh(maxcut8, t)
        E = t.values
        for x in (0, 19, 200):
            d = np.array([bin(x ^ y).count("1") for y in range(256)], dtype=float)
            w = np.where(d < 4, 1.0, np.where(d == 4, 0.5, 0.0))
            mh, me = w @ d / w.sum(), w @ E / w.sum()
            assert sig[x] == pytest.approx(w @ ((d - mh) * (E - me)) / w.sum(), abs=1e-12)
            assert h0 == pytest.approx(4 - mh, abs=1e-12)

    def test_mirror_hierarchy_exactly_linear_for_maxcut(self):
        inst = generate_maxcut(10, 1.0, 3)
        c, omega = fit_sigma_eh_slope(inst, "mirror")
        assert c > 0
        assert omega < 1e-10


class TestSlope:
    def test_pure_field(self):
        c, omega = fit_sigma_eh_slope(pure_field(9, 1))
        assert c == pytest.approx(0.5, abs=1e-10)
        assert omega == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(3))
    def test_qubo_positive_with_noise(self, seed):
        c, omega = fit_sigma_eh_slope(generate_qubo(12, 1.0, seed))
        assert c > 0 and omega > 0

    def test_scale_invariant(self, qubo8):
        assert fit_sigma_eh_slope(qubo8.scaled(2.0))[0] == pytest.approx(fit_sigma_eh_slope(qubo8)[0], rel=1e-12)

    def test_degenerate_needs_hierarchy(self, maxcut8):
        with pytest.raises(ValueError, match="hierarchy"):
            fit_sigma_eh_slope(maxcut8)

    def test_mixture_hierarchy(self, maxcut8):
        fit = fit_mixture2(maxcut8, full_spectrum(maxcut8).ground_state)
        c, _ = fit_sigma_eh_slope(maxcut8, fit)
        assert math.isfinite(c)

    def test_zero_variance(self):
        with pytest.raises(ValueError):
            fit_sigma_eh_slope(IsingInstance(3, np.zeros((3, 3)), np.zeros(3)), "mirror")


class TestMahalanobis:
    def test_at_mean(self):
        m = JointMoments(1.0, 2.0, 3.0, 1.5, 0.4, 0.4 / 3, 0)
        assert mahalanobis((3.0, 1.0), m) == 0.0

    def test_diagonal_unit_offsets(self):
        m = JointMoments(1.0, 2.0, 3.0, 1.5, 0.0, 0.0, 0)
        assert mahalanobis((4.5, 3.0), m) == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_affine_invariance(self):
        m = JointMoments(1.0, 2.0, 3.0, 1.5, 0.9, 0.3, 0)
        k = 3.7
        scaled = JointMoments(k * 1.0, k * 2.0, 3.0, 1.5, k * 0.9, 0.3, 0)
        assert mahalanobis((2.2, 4.0), m) == pytest.approx(mahalanobis((2.2, k * 4.0), scaled), rel=1e-13)

    def test_singular(self):
        with pytest.raises(np.linalg.LinAlgError):
            mahalanobis((0.0, 0.0), JointMoments(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0))


class TestNormality:
    def test_chi2_median(self):
        assert chi2_2_quantile(0.5) == pytest.approx(2 * math.log(2), abs=1e-14)

    def test_synthetic_gaussian(self):
        rng = np.random.default_rng(0)
        pts = rng.multivariate_normal([2.0, -1.0], [[1.0, 0.6], [0.6, 2.0]], size=10_000)
        d2 = _mahalanobis_sq(pts, pts.mean(axis=0), np.cov(pts.T, bias=True))
        assert qq_agreement(d2).agreement_fraction >= 0.99

    def test_quantile_lists_sorted(self, qubo8):
        rep = normality_test(qubo8, 0, quantile_count=100)
        assert np.all(np.diff(rep.empirical) >= 0) and np.all(np.diff(rep.theoretical) > 0)
        assert len(rep.quantile_pairs) == 100

    def test_band_rule(self):
        levels = (np.arange(4) + 0.5) / 4
        theo = chi2_2_quantile(levels)
        d2 = np.repeat(theo * np.array([1.0, 1.0, 1.0, 1.5]), 1)
        rep = qq_agreement(np.sort(d2), quantile_count=4)
        assert rep.agreement_fraction >= 0.5
        assert 0 <= rep.tail_outlier_fraction <= 1

    @pytest.mark.parametrize("seed", range(3))
    def test_qubo_mostly_gaussian(self, seed):
        inst = generate_qubo(12, 1.0, seed)
        t = full_spectrum(inst)
        assert normality_test(inst, t.ground_state, max_quantile=0.99, spectrum=t).agreement_fraction > 0.95

    @pytest.mark.parametrize("seed", range(3))
    def test_maxcut_clusters_gaussian(self, seed):
        inst = generate_maxcut(12, 1.0, seed)
        t = full_spectrum(inst)
        fit = fit_mixture2(inst, t.ground_state, t)
        rep = normality_test(inst, t.ground_state, fit, max_quantile=0.99, spectrum=t)
        assert rep.agreement_fraction > 0.95


class TestMixture:
    def test_recovers_synthetic_separation(self):
        rng = np.random.default_rng(5)
        a = rng.multivariate_normal([3.0, 1.0], [[1.0, 0.5], [0.5, 2.0]], size=4000)
        b = rng.multivariate_normal([7.0, 1.0], [[1.0, -0.5], [-0.5, 2.0]], size=4000)
        pts = np.vstack([a, b])
        var = pts.var(axis=0)
        means, *_ = em_mixture2(pts, np.array([[4.0, 1.0], [6.0, 1.0]]), np.array([np.diag(var)] * 2),
                                np.array([0.5, 0.5]))
        assert abs(means[1, 0] - means[0, 0]) / 2 == pytest.approx(2.0, abs=0.1)

    @pytest.mark.parametrize("seed", range(3))
    def test_maxcut_symmetric_split(self, seed):
        inst = generate_maxcut(12, 1.0, seed)
        fit = fit_mixture2(inst, full_spectrum(inst).ground_state)
        w = [c.weight for c in fit.components]
        assert w == pytest.approx([0.5, 0.5], abs=0.02)
        mh = [c.mean[0] for c in fit.components]
        assert mh[0] + mh[1] == pytest.approx(12.0, abs=0.05)
        assert fit.h0 == pytest.approx(abs(mh[1] - 6.0), abs=0.05)
        assert not fit.unimodal
        assert np.bincount(fit.assignments).tolist() == [2048, 2048]

    @pytest.mark.parametrize("seed", range(3))
    def test_qubo_flagged_unimodal(self, seed):
        inst = generate_qubo(12, 1.0, seed)
        assert fit_mixture2(inst, full_spectrum(inst).ground_state).unimodal

    def test_point_set_mirror(self, maxcut8):
        pts = point_cloud(maxcut8, 9)
        mirrored = np.column_stack([8 - pts[:, 0], pts[:, 1]])
        key = lambda a: np.lexsort((np.round(a[:, 1], 9), a[:, 0]))
        np.testing.assert_allclose(pts[key(pts)], mirrored[key(mirrored)], atol=1e-9)

    def test_label_swap_likelihood(self, maxcut8):
        pts = point_cloud(maxcut8, 0)
        fit = fit_mixture2(maxcut8, 0)
        mus = np.array([c.mean for c in fit.components])
        covs = np.array([c.covariance for c in fit.components])
        w = np.array([c.weight for c in fit.components])
        ll_a = em_mixture2(pts, mus, covs, w, max_iter=1)[4]
        ll_b = em_mixture2(pts, mus[::-1], covs[::-1], w[::-1], max_iter=1)[4]
        assert ll_a == pytest.approx(ll_b, rel=1e-12)

    def test_z2_partners_in_opposite_hierarchies(self, maxcut8):
        fit = fit_mixture2(maxcut8, 0)
        idx = np.arange(256)
        assert np.all(fit.assignments != fit.assignments[complement(idx, 8)])

    def test_hierarchy_helpers_against_brute_force(self, maxcut8):
        t = full_spectrum(maxcut8)
        fit = fit_mixture2(maxcut8, t.ground_state, t)
        sig = hierarchy_sigma_eh(maxcut8, fit, t)
        h0 = hierarchy_h0(maxcut8, fit)
        for x in (3, 77, 180):
            mask = fit.assignments == fit.assignments[x]
            d = np.array([bin(x ^ y).count("1") for y in np.flatnonzero(mask)], dtype=float)
            Es = t.values[mask]
            assert sig[x] == pytest.approx(np.mean((d - d.mean()) * (Es - Es.mean())), abs=1e-12)
            assert h0[x] == pytest.approx(4 - d.mean(), abs=1e-12)

    def test_rejects_flat_data(self):
        with pytest.raises(ValueError):
            fit_mixture2(IsingInstance(3, np.zeros((3, 3)), np.zeros(3)), 0)
