"""Exact statevector simulation of the p-layer QAOA circuit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .ising import MAX_QUBITS, EnergyTable, IsingInstance, check_size, full_spectrum


@dataclass
class StateVector:
    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} amplitudes, got {self.amplitudes.shape}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy(), self.n)


@dataclass(frozen=True)
class AngleSchedule:
    gammas: tuple[float, ...]
    thetas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in np.atleast_1d(self.gammas)))
        object.__setattr__(self, "thetas", tuple(float(t) for t in np.atleast_1d(self.thetas)))
        if len(self.gammas) < 1 or len(self.gammas) != len(self.thetas):
            raise ValueError("gammas and thetas must be non-empty and of equal length")

    @classmethod
    def single(cls, gamma: float, theta: float) -> AngleSchedule:
        return cls((gamma,), (theta,))

    @property
    def p(self) -> int:
        return len(self.gammas)


@dataclass
class OptimizationResult:
    gamma_opt: float
    theta_opt: float
    mean_energy: float
    trace: list[tuple[float, float, float]] = field(default_factory=list)
    grid_best: float = math.nan
    symmetry_class: str = "as_found"


def prepare_plus(n: int, max_qubits: int = MAX_QUBITS) -> StateVector:
    check_size(n, max_qubits)
    size = 1 << n
    return StateVector(np.full(size, 1.0 / math.sqrt(size), dtype=complex), n)


def _values(spectrum) -> np.ndarray:
    return spectrum.values if isinstance(spectrum, EnergyTable) else np.asarray(spectrum)


def apply_phase(state: StateVector, spectrum: EnergyTable, gamma: float) -> StateVector:
    E = _values(spectrum)
    if E.shape != state.amplitudes.shape:
        raise ValueError(f"spectrum length {E.size} does not match state dimension {state.amplitudes.size}")
    return StateVector(state.amplitudes * np.exp(-1j * gamma * E), state.n)


def _mix_inplace(psi: np.ndarray, n: int, theta: float) -> None:
    c, s = math.cos(theta), -1j * math.sin(theta)
    for k in range(n):
        view = psi.reshape(-1, 2, 1 << k)
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = c * a0 + s * a1
        view[:, 1, :] = s * a0 + c * a1


def apply_mixer(state: StateVector, theta: float) -> StateVector:
    """Apply R_x(theta) = exp(-i theta X) to every qubit."""
    psi = state.amplitudes.astype(complex, copy=True)
    _mix_inplace(psi, state.n, theta)
    return StateVector(psi, state.n)


def run_qaoa(instance: IsingInstance, schedule: AngleSchedule,
             spectrum: EnergyTable | None = None) -> StateVector:
    spectrum = full_spectrum(instance) if spectrum is None else spectrum
    E = _values(spectrum)
    psi = prepare_plus(instance.n).amplitudes
    for gamma, theta in zip(schedule.gammas, schedule.thetas):
        psi *= np.exp(-1j * gamma * E)
        _mix_inplace(psi, instance.n, theta)
    return StateVector(psi, instance.n)


def qaoa_probabilities(spectrum: EnergyTable, gamma: float, theta: float) -> np.ndarray:
    """Single-layer output distribution straight from a spectrum."""
    E = _values(spectrum)
    n = E.size.bit_length() - 1
    psi = np.exp(-1j * gamma * E) / math.sqrt(E.size)
    _mix_inplace(psi, n, theta)
    return probabilities(psi)


def probabilities(state) -> np.ndarray:
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    return amps.real ** 2 + amps.imag ** 2


def mean_energy(state, spectrum: EnergyTable) -> float:
    E = _values(spectrum)
    p = probabilities(state)
    if p.shape != E.shape:
        raise ValueError("state and spectrum dimensions differ")
    return float(p @ E)


def sample(state, count: int, seed: int) -> np.ndarray:
    """Computational-basis measurements as configuration integers."""
    if count < 1:
        raise ValueError("count must be >= 1")
    p = probabilities(state)
    rng = np.random.default_rng(seed)
    return rng.choice(p.size, size=count, p=p / p.sum())


GAMMA_WIDEN = 6.0


def default_gamma_max(spectrum: EnergyTable, widen: float = GAMMA_WIDEN) -> float:
    """pi / (E_max - E_min) times a safety factor.

    Optimal single-layer angles of random QUBO and MaxCut instances sit at 2-4.5
    times the bare bound, so the default factor is 6.
    """
    spread = spectrum.max - spectrum.min
    if spread == 0:
        raise ValueError("flat spectrum")
    return widen * math.pi / spread


def optimize_angles(instance: IsingInstance, gamma_points: int = 41, theta_points: int = 41,
                    gamma_max: float | None = None, spectrum: EnergyTable | None = None,
                    atol: float = 1e-6) -> OptimizationResult:
    """Minimize the single-layer mean energy: grid search, then Nelder-Mead.

    The grid spans gamma in [-gamma_max, gamma_max] and theta strictly inside
    (0, pi/2); these cover every distinct distribution up to the exact angle
    symmetries of the circuit.  For field-free instances (gamma, theta) and
    (-gamma, pi/2 - theta) give the same mean energy; the optimum is reported
    with theta <= pi/4 and ``symmetry_class`` says whether it was reflected.
    """
    if gamma_points < 1 or theta_points < 1:
        raise ValueError("empty grid")
    spectrum = full_spectrum(instance) if spectrum is None else spectrum
    E = spectrum.values
    if gamma_max is None:
        gamma_max = default_gamma_max(spectrum)
    gammas = np.linspace(-gamma_max, gamma_max, gamma_points) if gamma_points > 1 else np.array([gamma_max])
    thetas = (np.arange(theta_points) + 0.5) * (math.pi / 2) / theta_points

    trace: list[tuple[float, float, float]] = []

    def objective(g: float, t: float) -> float:
        val = float(qaoa_probabilities(spectrum, g, t) @ E)
        trace.append((float(g), float(t), val))
        return val

    best = min(((objective(g, t), g, t) for g in gammas for t in thetas), key=lambda r: r[0])
    grid_best = best[0]
    step = np.array([gammas[1] - gammas[0] if gamma_points > 1 else gamma_max / 10,
                     thetas[1] - thetas[0] if theta_points > 1 else math.pi / 20])
    simplex = np.array([[best[1], best[2]], [best[1] + step[0], best[2]], [best[1], best[2] + step[1]]])
    res = minimize(lambda v: objective(v[0], v[1]), x0=simplex[0], method="Nelder-Mead",
                   options={"initial_simplex": simplex, "fatol": atol, "xatol": 1e-9, "maxiter": 2000})
    g_opt, t_opt = float(res.x[0]), float(res.x[1])
    e_opt = float(qaoa_probabilities(spectrum, g_opt, t_opt) @ E)
    if e_opt > grid_best:
        _, g_opt, t_opt = best
        e_opt = grid_best
    label = "as_found"
    if instance.degenerate and t_opt > math.pi / 4:
        g_opt, t_opt, label = -g_opt, math.pi / 2 - t_opt, "z2_reflected"
    return OptimizationResult(g_opt, t_opt, e_opt, trace, grid_best, label)
