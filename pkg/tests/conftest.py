"""Shared fixtures and independent oracles for the test suite."""

import math
from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from qaoa_thermal.ising import IsingInstance, generate_maxcut, generate_qubo


def dense_qaoa_state(spectrum_values, gammas, thetas):
    """QAOA state from explicit matrices: diag phase and a Kronecker product of expm(-i theta X)."""
    E = np.asarray(spectrum_values, dtype=float)
    n = E.size.bit_length() - 1
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    psi = np.full(E.size, 2 ** (-n / 2), dtype=complex)
    for g, t in zip(np.atleast_1d(gammas), np.atleast_1d(thetas)):
        psi = np.exp(-1j * g * E) * psi
        rx = expm(-1j * t * X)
        psi = reduce(np.kron, [rx] * n) @ psi
    return psi


def naive_sigma_eh(E, x, n):
    """Covariance of (H, E) over all configurations, straight from the definition."""
    H = np.array([bin(x ^ y).count("1") for y in range(1 << n)], dtype=float)
    return float(np.mean((H - H.mean()) * (E - E.mean())))


def pure_field(n, seed=0):
    rng = np.random.default_rng(seed)
    return IsingInstance(n, np.zeros((n, n)), rng.standard_normal(n))


def random_ising(n, seed=0):
    rng = np.random.default_rng(seed)
    J = np.triu(rng.standard_normal((n, n)), 1)
    return IsingInstance(n, J + J.T, rng.standard_normal(n))


@pytest.fixture
def qubo8():
    return generate_qubo(8, 1.0, 11)


@pytest.fixture
def maxcut8():
    return generate_maxcut(8, 1.0, 11)


@pytest.fixture(params=["qubo", "maxcut", "random"])
def any_instance(request):
    if request.param == "qubo":
        return generate_qubo(7, 0.8, 5)
    if request.param == "maxcut":
        return generate_maxcut(7, 0.8, 5)
    return random_ising(7, 5)


HALF_PI = math.pi / 2


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line; the lines are echoed in the terminal summary."""
    lines = request.config.acceptance_lines

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in config.acceptance_lines:
            terminalreporter.write_line(line)
