import math

import numpy as np
import pytest
from scipy.stats import skew

from qaoa_thermal.baseline import exact_boltzmann
from qaoa_thermal.engine import AngleSchedule, optimize_angles, prepare_plus, qaoa_probabilities, run_qaoa
from qaoa_thermal.ising import EnergyTable, IsingInstance, full_spectrum, generate_maxcut, generate_qubo
from qaoa_thermal.thermometry import (
    ThermalFit, beta_gamma_scan, detect_gamma_c, energy_distribution, fit_beta, predicted_beta,
)

from conftest import pure_field


def _fit(r2):
    return ThermalFit(0.0, 0.0, r2, 0.0, 0.0)


class TestEnergyDistribution:
    def test_uniform_state_follows_density_of_states(self, qubo8):
        t = full_spectrum(qubo8)
        d = energy_distribution(prepare_plus(8), t, 20)
        np.testing.assert_allclose(d.probability_mass, d.state_counts / 256, atol=1e-15)

    def test_normalized_and_counted(self, qubo8):
        t = full_spectrum(qubo8)
        d = energy_distribution(run_qaoa(qubo8, AngleSchedule.single(-0.2, 0.5), t), t, 33)
        assert d.probability_mass.sum() == pytest.approx(1.0, abs=1e-10)
        assert d.state_counts.sum() == 256
        assert np.all(d.probability_mass >= 0)
        assert np.all(np.diff(d.bin_edges) > 0)
        assert d.bin_edges[0] == t.min and d.bin_edges[-1] == t.max

    @pytest.mark.parametrize("seed", range(3))
    def test_density_of_states_bell_shaped(self, seed):
        t = full_spectrum(generate_qubo(12, 1.0, seed))
        assert abs(skew(t.values)) < 0.5
        counts = energy_distribution(prepare_plus(12), t, 25).state_counts
        assert 5 <= np.argmax(counts) <= 19

    def test_guards(self, qubo8):
        t = full_spectrum(qubo8)
        with pytest.raises(ValueError):
            energy_distribution(prepare_plus(8), t, 1)
        with pytest.raises(ValueError):
            energy_distribution(prepare_plus(2), EnergyTable(np.zeros(4)), 5)


class TestFitBeta:
    @pytest.mark.parametrize("beta", [-1.0, -0.1, 0.0, 0.1, 0.5, 1.0])
    def test_boltzmann_round_trip(self, qubo8, beta):
        t = full_spectrum(qubo8)
        fit = fit_beta(exact_boltzmann(t, beta), t)
        assert fit.beta == pytest.approx(beta, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-10)
        assert fit.residual_std < 1e-8

    def test_uniform(self, qubo8):
        t = full_spectrum(qubo8)
        assert fit_beta(np.full(256, 1 / 256), t).beta == pytest.approx(0.0, abs=1e-14)

    def test_floor_exclusion(self, qubo8):
        t = full_spectrum(qubo8)
        p = exact_boltzmann(t, 0.3).copy()
        p[:16] = 0.0
        fit = fit_beta(p, t)
        assert fit.excluded_fraction == pytest.approx(16 / 256)
        assert fit.beta == pytest.approx(0.3, abs=1e-9)

    def test_too_few_states(self):
        with pytest.raises(ValueError):
            fit_beta(np.array([0.5, 0.5, 0, 0]), EnergyTable(np.array([0.0, 1.0, 2.0, 3.0])))

    def test_zero_variance(self):
        with pytest.raises(ValueError):
            fit_beta(np.full(4, 0.25), EnergyTable(np.ones(4)))

    def test_r2_one_iff_no_residual(self, qubo8):
        t = full_spectrum(qubo8)
        fit = fit_beta(qaoa_probabilities(t, -0.2, 0.5), t)
        assert fit.r_squared < 1 and fit.residual_std > 0

    def test_two_exponential_flag(self):
        E = np.linspace(-3, 3, 64)
        p = np.exp(-np.abs(E))
        p /= p.sum()
        assert "two_exponential_regime" in fit_beta(p, EnergyTable(E)).flags
        assert not fit_beta(np.exp(-E) / np.exp(-E).sum(), EnergyTable(E)).flags

    def test_conjugation_symmetry(self, qubo8):
        t = full_spectrum(qubo8)
        a = fit_beta(qaoa_probabilities(t, -0.15, 0.5), t)
        b = fit_beta(qaoa_probabilities(t, 0.15, math.pi - 0.5), t)
        assert a.beta == pytest.approx(b.beta, abs=1e-10)


class TestPredictedBeta:
    def test_zero_gamma(self):
        assert predicted_beta(0.3, 0.0, 0.4) == 0.0

    def test_sign_convention(self):
        assert predicted_beta(0.3, -0.1, 0.4) > 0

    def test_degenerate_reflection(self):
        assert predicted_beta(0.2, -0.1, 0.3, True) == pytest.approx(-predicted_beta(0.2, -0.1, math.pi / 2 - 0.3, True))

    def test_degenerate_quarter_pi(self):
        with pytest.raises(ValueError):
            predicted_beta(0.2, -0.1, math.pi / 4, True)

    def test_requires_positive_c(self):
        with pytest.raises(ValueError):
            predicted_beta(0.0, -0.1, 0.3)

    @pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 8])
    @pytest.mark.parametrize("gamma", [-0.01, -0.05])
    def test_pure_field_end_to_end(self, theta, gamma):
        inst = pure_field(10, 3)
        t = full_spectrum(inst)
        fitted = fit_beta(qaoa_probabilities(t, gamma, theta), t).beta
        assert fitted == pytest.approx(predicted_beta(0.5, gamma, theta), rel=0.15)


class TestScan:
    def test_order_and_zero(self, qubo8):
        gammas = [0.0, -0.1, 0.05, -0.2]
        out = beta_gamma_scan(qubo8, 0.5, gammas)
        assert [g for g, _ in out] == gammas
        assert out[0][1].beta == pytest.approx(0.0, abs=1e-12)

    def test_mirrored_pairs(self, qubo8):
        a = beta_gamma_scan(qubo8, 0.5, [-0.1, -0.2])
        b = beta_gamma_scan(qubo8, math.pi - 0.5, [0.1, 0.2])
        for (_, fa), (_, fb) in zip(a, b):
            assert fa.beta == pytest.approx(fb.beta, abs=1e-10)

    def test_empty(self, qubo8):
        with pytest.raises(ValueError):
            beta_gamma_scan(qubo8, 0.5, [])

    @pytest.mark.parametrize("seed", range(3))
    def test_beta_linear_at_small_gamma(self, seed):
        inst = generate_qubo(12, 1.0, seed)
        t = full_spectrum(inst)
        res = optimize_angles(inst, 21, 21, spectrum=t)
        gammas = [res.gamma_opt * k / 16 for k in range(1, 9)]
        betas = [f.beta for _, f in beta_gamma_scan(inst, res.theta_opt, gammas, t)]
        assert np.corrcoef(np.abs(gammas), betas)[0, 1] > 0.99


class TestGammaC:
    def test_threshold_definition(self):
        g = detect_gamma_c([0.05, 0.1, 0.15, 0.2, 0.25], [_fit(r) for r in (0.9, 0.9, 0.9, 0.2, 0.1)])
        assert g.gamma_c == 0.2
        assert g.threshold == pytest.approx(0.45)
        assert g.reached

    def test_not_reached(self):
        g = detect_gamma_c([0.1, 0.2, 0.3], [_fit(r) for r in (0.8, 0.9, 0.85)])
        assert not g.reached
        assert g.gamma_c == 0.3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            detect_gamma_c([0.1], [])

    @pytest.mark.parametrize("seed", range(3))
    def test_beyond_optimum(self, seed):
        inst = generate_qubo(12, 1.0, seed)
        t = full_spectrum(inst)
        res = optimize_angles(inst, 21, 21, spectrum=t)
        gammas = [res.gamma_opt * k / 8 for k in range(1, 25)]
        fits = [f for _, f in beta_gamma_scan(inst, res.theta_opt, gammas, t)]
        gc = detect_gamma_c(gammas, fits)
        assert gc.reached
        assert abs(gc.gamma_c) >= abs(res.gamma_opt)


class TestStatisticalProperties:
    def test_direction_control(self):
        hits = 0
        for s in range(50):
            inst = generate_qubo(10, 1.0, 100 + s)
            t = full_spectrum(inst)
            go = abs(optimize_angles(inst, 15, 15, spectrum=t).gamma_opt)
            signs = []
            for g in (go / 4, go / 2, go, -go / 4, -go / 2, -go):
                signs.append(np.sign(fit_beta(qaoa_probabilities(t, g, math.pi / 6), t).beta) == -np.sign(g))
            hits += all(signs)
        assert hits >= 45

    @pytest.mark.parametrize("theta", [math.pi / 8, math.pi / 6])
    def test_maxcut_theta_antisymmetry(self, theta):
        sums, singles = [], []
        for s in range(20):
            inst = generate_maxcut(12, 1.0, s)
            t = full_spectrum(inst)
            g = -abs(optimize_angles(inst, 21, 21, spectrum=t).gamma_opt)
            b1 = fit_beta(qaoa_probabilities(t, g, theta), t).beta
            b2 = fit_beta(qaoa_probabilities(t, g, math.pi / 2 - theta), t).beta
            sums.append(b1 + b2)
            singles.append(b1)
        sums = np.array(sums)
        stderr = sums.std(ddof=1) / math.sqrt(sums.size)
        assert abs(np.median(sums)) <= 2 * stderr
        assert np.median(singles) > 0
