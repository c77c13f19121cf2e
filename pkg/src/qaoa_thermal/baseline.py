"""Exact Boltzmann references, single-spin-flip Metropolis and distribution distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numba
import numpy as np

from .ising import EnergyTable, IsingInstance, spectral_norm
from .thermometry import ThermalFit


@dataclass(frozen=True)
class ChainConfig:
    beta: float
    sweeps: int
    burn_in_sweeps: int = 100
    seed: int = 0
    chain_count: int = 8

    def __post_init__(self):
        if self.sweeps < 1 or self.burn_in_sweeps < 0 or self.chain_count < 1:
            raise ValueError("sweeps >= 1, burn_in_sweeps >= 0 and chain_count >= 1 required")


@dataclass
class MetropolisResult:
    empirical: np.ndarray
    acceptance_rate: float
    samples: int
    config: ChainConfig


@dataclass
class DistanceReport:
    tvd: float
    kl: float
    support_mismatch: int
    kl_epsilon: float = 1e-12

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MixingBoundReport:
    beta: float
    temperature: float
    coupling_norm: float
    ratio: float
    below_bound: bool
    flags: list[str]

    def to_dict(self) -> dict:
        return asdict(self)


def exact_boltzmann(spectrum: EnergyTable, beta: float) -> np.ndarray:
    E = spectrum.values if isinstance(spectrum, EnergyTable) else np.asarray(spectrum)
    logw = -beta * E
    w = np.exp(logw - logw.max())
    return w / w.sum()


@numba.njit(cache=True)
def _metropolis_chain(J, h, beta, state, sites, uniforms, burn_in, sweeps, counts):
    n = h.shape[0]
    s = np.empty(n)
    for i in range(n):
        s[i] = 1.0 if (state >> i) & 1 else -1.0
    local = J @ s
    accepted = 0
    k = 0
    for sweep in range(burn_in + sweeps):
        for _ in range(n):
            i = sites[k]
            u = uniforms[k]
            k += 1
            dE = -2.0 * s[i] * (local[i] + h[i])
            if dE <= 0.0 or u < math.exp(-beta * dE):
                si = s[i]
                for j in range(n):
                    local[j] -= 2.0 * si * J[j, i]
                s[i] = -si
                state ^= 1 << i
                if sweep >= burn_in:
                    accepted += 1
            if sweep >= burn_in:
                counts[state] += 1
    return accepted


def metropolis_sample(instance: IsingInstance, config: ChainConfig) -> MetropolisResult:
    """Pooled post-burn-in histogram of ``chain_count`` independent Metropolis chains.

    Each step proposes flipping a uniformly chosen spin and accepts with
    probability min(1, exp(-beta dE)); the configuration is recorded after every
    proposal, so one sweep contributes n samples.  (Recording only at sweep
    boundaries aliases with the parity of n: at beta = 0 an even-n chain would
    never leave its starting parity class.)  Chains draw from
    ``SeedSequence(seed).spawn``.
    """
    n = instance.n
    J = np.ascontiguousarray(instance.couplings)
    h = np.ascontiguousarray(instance.fields)
    counts = np.zeros(1 << n, dtype=np.int64)
    steps = (config.burn_in_sweeps + config.sweeps) * n
    accepted = 0
    for child in np.random.SeedSequence(config.seed).spawn(config.chain_count):
        rng = np.random.default_rng(child)
        start = int(rng.integers(1 << n))
        sites = rng.integers(0, n, size=steps)
        uniforms = rng.random(steps)
        accepted += _metropolis_chain(J, h, float(config.beta), start, sites, uniforms,
                                      config.burn_in_sweeps, config.sweeps, counts)
    samples = config.sweeps * config.chain_count * n
    rate = accepted / samples
    return MetropolisResult(counts / samples, rate, samples, config)


def transition_matrix(instance: IsingInstance, beta: float, spectrum: EnergyTable) -> np.ndarray:
    """Exact Metropolis kernel over all 2^n configurations (small n only)."""
    n = instance.n
    size = 1 << n
    E = spectrum.values
    P = np.zeros((size, size))
    for x in range(size):
        for i in range(n):
            y = x ^ (1 << i)
            P[x, y] = min(1.0, math.exp(-beta * (E[y] - E[x]))) / n
        P[x, x] = 1.0 - P[x].sum()
    return P


def _check_pair(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    return p, q


def total_variation(p, q) -> float:
    p, q = _check_pair(p, q)
    return 0.5 * float(np.abs(p - q).sum())


def kl_divergence(p, q, epsilon: float = 1e-12) -> float:
    """KL(p || q) with q floored at ``epsilon`` and 0 ln 0 = 0."""
    p, q = _check_pair(p, q)
    m = p > 0
    return float(np.sum(p[m] * np.log(p[m] / np.maximum(q[m], epsilon))))


def distance_report(p, q, epsilon: float = 1e-12) -> DistanceReport:
    p, q = _check_pair(p, q)
    mismatch = int(np.sum((p > 0) != (q > 0)))
    return DistanceReport(total_variation(p, q), kl_divergence(p, q, epsilon), mismatch, epsilon)


def mixing_bound_report(instance: IsingInstance, fitted: ThermalFit) -> MixingBoundReport:
    """Compare the fitted temperature 1/|beta| with the spectral norm of J.

    Rapid mixing of single-spin MCMC is guaranteed above T = ||J|| (spectral
    norm); a ratio below 1 means the QAOA state sits below that temperature.
    """
    norm = spectral_norm(instance)
    beta = fitted.beta
    if beta == 0:
        return MixingBoundReport(0.0, math.inf, norm, math.inf, False, ["infinite_temperature"])
    temperature = 1.0 / abs(beta)
    ratio = temperature / norm if norm > 0 else math.inf
    return MixingBoundReport(beta, temperature, norm, ratio, ratio < 1.0, [])
