"""Effective temperatures of single-layer QAOA output distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .engine import probabilities as state_probabilities
from .engine import qaoa_probabilities
from .ising import EnergyTable, IsingInstance, full_spectrum

PROB_FLOOR = 1e-300


@dataclass
class ThermalFit:
    beta: float
    intercept: float
    r_squared: float
    residual_std: float
    excluded_fraction: float
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EnergyDistribution:
    bin_edges: np.ndarray
    probability_mass: np.ndarray
    state_counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


@dataclass
class GammaC:
    gamma_c: float
    threshold: float
    reached: bool


def energy_distribution(state, spectrum: EnergyTable, bin_count: int = 50) -> EnergyDistribution:
    """Probability mass per energy bin next to the discretized density of states."""
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    if spectrum.max == spectrum.min:
        raise ValueError("flat spectrum")
    p = state if isinstance(state, np.ndarray) and state.dtype.kind == "f" else state_probabilities(state)
    edges = np.linspace(spectrum.min, spectrum.max, bin_count + 1)
    which = np.clip(np.searchsorted(edges, spectrum.values, side="right") - 1, 0, bin_count - 1)
    mass = np.bincount(which, weights=p, minlength=bin_count)
    counts = np.bincount(which, minlength=bin_count)
    return EnergyDistribution(edges, mass / mass.sum(), counts)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept and residual sum of squares."""
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    return slope, intercept, float(resid @ resid)


def fit_beta(probs: np.ndarray, spectrum: EnergyTable, floor: float = PROB_FLOOR) -> ThermalFit:
    """Unweighted least squares of ln p(x) against E_x; beta is minus the slope.

    States with probability below ``floor`` are dropped and counted in
    ``excluded_fraction``.  When separate fits on the two halves E < 0 and
    E >= 0 raise the combined R^2 by more than 0.2 the fit is flagged
    ``two_exponential_regime``: a single temperature does not describe it.
    """
    probs = np.asarray(probs, dtype=float)
    E = spectrum.values
    keep = probs > floor
    if keep.sum() < 3:
        raise ValueError("fewer than 3 states above the probability floor")
    x, y = E[keep], np.log(probs[keep])
    if np.ptp(x) == 0:
        raise ValueError("zero energy variance among included states")
    slope, intercept, ss_res = _ols(x, y)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    flags = []
    lower, upper = x < 0, x >= 0
    if lower.sum() >= 3 and upper.sum() >= 3 and ss_tot > 0 \
            and np.ptp(x[lower]) > 0 and np.ptp(x[upper]) > 0:
        split_res = _ols(x[lower], y[lower])[2] + _ols(x[upper], y[upper])[2]
        if (ss_res - split_res) / ss_tot > 0.2:
            flags.append("two_exponential_regime")
    return ThermalFit(beta=-slope, intercept=intercept, r_squared=float(min(max(r2, 0.0), 1.0)),
                      residual_std=math.sqrt(ss_res / x.size), excluded_fraction=float(1.0 - keep.mean()),
                      flags=flags)


def predicted_beta(c: float, gamma: float, theta: float, degenerate: bool = False) -> float:
    """Inverse temperature implied by sigma_EH(x) = -c E_x.

    ln|F(x)|^2 carries -pi*gamma*sigma_EH(x) = +c*pi*gamma*E_x, so beta = -c*pi*gamma,
    with an extra sgn(r) = sgn(pi/4 - theta) for field-free instances.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    beta = -c * math.pi * gamma
    if degenerate:
        r = -math.log(math.tan(theta)) if 0 < theta < math.pi / 2 else math.nan
        if not math.isfinite(r) or abs(r) < 1e-12:
            raise ValueError("sgn(r) undefined at theta = pi/4 (or outside (0, pi/2))")
        beta *= math.copysign(1.0, r)
    return beta


def beta_gamma_scan(instance: IsingInstance, theta: float, gammas: Sequence[float],
                    spectrum: EnergyTable | None = None) -> list[tuple[float, ThermalFit]]:
    if len(gammas) == 0:
        raise ValueError("empty gamma list")
    spectrum = full_spectrum(instance) if spectrum is None else spectrum
    return [(float(g), fit_beta(qaoa_probabilities(spectrum, g, theta), spectrum)) for g in gammas]


def detect_gamma_c(gammas: Sequence[float], fits: Sequence[ThermalFit], ratio: float = 0.5) -> GammaC:
    """Smallest |gamma| where R^2 falls below ``ratio`` times the scan maximum.

    The search runs in order of increasing |gamma|; the sign of the returned
    value is that of the scan point.  If R^2 never drops, the largest |gamma| is
    returned with ``reached=False``.
    """
    if len(gammas) != len(fits) or not gammas:
        raise ValueError("gammas and fits must be non-empty and of equal length")
    order = np.argsort(np.abs(gammas), kind="stable")
    r2 = np.array([f.r_squared for f in fits])
    threshold = ratio * float(r2.max())
    for k in order:
        if r2[k] < threshold:
            return GammaC(float(gammas[k]), threshold, True)
    return GammaC(float(gammas[order[-1]]), threshold, False)
