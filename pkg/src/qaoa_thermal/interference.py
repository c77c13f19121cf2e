"""Analytical interference model of the single-layer QAOA amplitudes.

The mixer layer couples configurations at Hamming distance H with weight
``cos(theta)^(n-H) (-i sin(theta))^H``.  Writing ``cos = sqrt(R) e^(r/2)`` and
``sin = sqrt(R) e^(-r/2)`` turns the amplitude into a Laplace-type transform of
the (H, E) point cloud; approximating that cloud by Gaussians gives closed-form
log-probabilities whose only configuration dependence is through sigma_EH(x).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .ising import EnergyTable, IsingInstance, check_size, full_spectrum, hamming
from .structure import (JointMoments, MixtureFit, hierarchy_h0, hierarchy_sigma_eh,
                        joint_moments, mirror_hierarchy_sigma_eh, sigma_eh_all)

THETA_GUARD = 1e-6
BRUTE_FORCE_MAX_QUBITS = 14
SIGN_TOL = 1e-12  # |r| below this counts as theta = pi/4


@dataclass(frozen=True)
class ReparamAngles:
    r: float
    big_r: float


@dataclass
class AmplitudePrediction:
    """Log-weight up to an additive constant, with its additive breakdown."""

    log_weight: float | np.ndarray
    components: dict[str, float | np.ndarray] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


def brute_force_amplitude(instance: IsingInstance, gamma: float, theta: float, x: int,
                          spectrum: EnergyTable | None = None) -> complex:
    """Amplitude <x|psi> from the explicit sum over all configurations.

    Terms are bucketed by Hamming distance first, so only n + 1 powers of
    cos/sin are formed.
    """
    check_size(instance.n, BRUTE_FORCE_MAX_QUBITS)
    n = instance.n
    E = (full_spectrum(instance) if spectrum is None else spectrum).values
    H = hamming(x, n).astype(np.int64)
    phase = np.exp(-1j * gamma * E)
    buckets = (np.bincount(H, weights=phase.real, minlength=n + 1)
               + 1j * np.bincount(H, weights=phase.imag, minlength=n + 1))
    h = np.arange(n + 1)
    weights = math.cos(theta) ** (n - h) * (-1j * math.sin(theta)) ** h
    return complex(weights @ buckets / 2 ** (n / 2))


def brute_force_amplitudes(instance: IsingInstance, gamma: float, theta: float,
                           spectrum: EnergyTable | None = None, block: int = 256) -> np.ndarray:
    """The same explicit sum for every x, evaluated in blocks of rows of the H matrix."""
    check_size(instance.n, BRUTE_FORCE_MAX_QUBITS)
    n = instance.n
    E = (full_spectrum(instance) if spectrum is None else spectrum).values
    phase = np.exp(-1j * gamma * E)
    h = np.arange(n + 1)
    weights = math.cos(theta) ** (n - h) * (-1j * math.sin(theta)) ** h
    cols = np.arange(1 << n, dtype=np.int64)
    out = np.empty(1 << n, dtype=complex)
    for start in range(0, 1 << n, block):
        rows = np.arange(start, min(start + block, 1 << n), dtype=np.int64)
        H = np.bitwise_count(rows[:, None] ^ cols[None, :])
        out[rows] = weights[H] @ phase
    return out / 2 ** (n / 2)


def pairwise_interference(a0: float, a1: float, theta: float, gamma: float,
                          delta_e: float) -> tuple[float, float]:
    """Populations (N0^2, N1^2) after mixing two states one bit flip apart.

    ``delta_e`` is E(x1) - E(x0); both inputs carry the phase picked up in the
    cost layer before the single-qubit rotation.
    """
    if a0 < 0 or a1 < 0:
        raise ValueError("amplitudes must be non-negative")
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    cross = a0 * a1 * math.sin(2 * theta) * math.sin(gamma * delta_e)
    return a0 ** 2 * c2 + a1 ** 2 * s2 - cross, a0 ** 2 * s2 + a1 ** 2 * c2 + cross


def two_level_probability(theta: float, gamma: float, delta: float, sigma: int) -> float:
    """Outcome probability for E = delta/2 * sigma_z; ``sigma`` is the +/-1 spin."""
    if sigma not in (-1, 1):
        raise ValueError("sigma must be +1 or -1")
    return 0.5 * (1.0 + sigma * math.sin(2 * theta) * math.sin(gamma * delta))


def reparameterize(theta: float) -> ReparamAngles:
    if not 0.0 < theta < math.pi / 2:
        raise ValueError(f"theta={theta} outside (0, pi/2)")
    return ReparamAngles(-math.log(math.tan(theta)), math.sin(theta) * math.cos(theta))


def fold_theta(theta: float) -> tuple[float, bool]:
    """Clamp theta into [guard, pi/2 - guard]; the flag tells whether it moved."""
    lo, hi = THETA_GUARD, math.pi / 2 - THETA_GUARD
    clamped = min(max(theta, lo), hi)
    return clamped, clamped != theta


def angle_bounds(instance: IsingInstance, spectrum: EnergyTable | None = None
                 ) -> tuple[tuple[float, float], float]:
    """Non-redundant theta interval and the heuristic |gamma| bound pi / (E_max - E_min)."""
    spectrum = full_spectrum(instance) if spectrum is None else spectrum
    spread = spectrum.max - spectrum.min
    if spread == 0:
        raise ValueError("flat spectrum")
    return (0.0, math.pi), math.pi / spread


def _base_terms(moments: JointMoments, gamma: float, r: float) -> dict[str, float]:
    return {
        "energy_variance": -gamma ** 2 * moments.sigma_e ** 2,
        "hamming_variance": (r ** 2 - math.pi ** 2 / 4) * moments.sigma_h ** 2,
        "hamming_mean": -2 * r * moments.mu_h,
    }


def predicted_log_weight_nondegenerate(moments: JointMoments, gamma: float,
                                       theta: float) -> AmplitudePrediction:
    """Gaussian-cloud log-probability; only the correlation term depends on x.

    ``moments.sigma_eh`` may be an array (one entry per reference), in which case
    the log-weight is returned per reference.
    """
    theta_c, clamped = fold_theta(theta)
    r = reparameterize(theta_c).r
    terms = _base_terms(moments, gamma, r)
    terms["correlation"] = -gamma * math.pi * np.asarray(moments.sigma_eh)
    flags = ["theta_clamped"] if clamped else []
    return AmplitudePrediction(sum(terms.values()), terms, flags)


def predicted_log_weight_degenerate(moments: JointMoments, h0, gamma: float, theta: float,
                                    use_full_form: bool = True) -> AmplitudePrediction:
    """Two-hierarchy prediction for Z2-symmetric spectra.

    ``moments`` must carry the per-hierarchy covariance sigma_EH+ of the
    hierarchy containing the reference.  The full form keeps both interfering
    hierarchies (oscillating cosine plus hyperbolic cosine); the approximate
    form keeps only the dominant exponential, whose sign follows sgn(r).
    """
    theta_c, clamped = fold_theta(theta)
    r = reparameterize(theta_c).r
    flags = ["theta_clamped"] if clamped else []
    terms = _base_terms(moments, gamma, r)
    sig = np.asarray(moments.sigma_eh)
    h0 = np.asarray(h0)
    if use_full_form:
        mix = (np.cos(h0 * math.pi + 2 * r * gamma * sig)
               + np.cosh(2 * h0 * r - gamma * math.pi * sig))
        terms["interference"] = np.log(np.maximum(mix, 1e-300))
    else:
        sgn = 0.0 if abs(r) < SIGN_TOL else math.copysign(1.0, r)
        if sgn == 0.0:
            warnings.warn("theta = pi/4: dominant hierarchy undefined, correlation term dropped")
            flags.append("sign_undefined")
        terms["correlation"] = -sgn * gamma * math.pi * sig
    return AmplitudePrediction(sum(terms.values()), terms, flags)


def predicted_log_weights(instance: IsingInstance, gamma: float, theta: float,
                          spectrum: EnergyTable | None = None,
                          hierarchy: MixtureFit | str | None = None,
                          use_full_form: bool = True) -> np.ndarray:
    """Mean-centered predicted ln|F(x)|^2 for every configuration x.

    Non-degenerate instances use the global sigma_EH(x).  Field-free instances
    use sigma_EH+(x) and h0 of the hierarchy holding x: by default the
    per-reference mirror split, or the global split of a ``MixtureFit``.
    """
    spectrum = full_spectrum(instance) if spectrum is None else spectrum
    base = joint_moments(instance, 0, spectrum)
    if hierarchy is None and not instance.degenerate:
        m = _with_sigma_eh(base, sigma_eh_all(instance, spectrum))
        y = predicted_log_weight_nondegenerate(m, gamma, theta).log_weight
    else:
        if hierarchy is None or hierarchy == "mirror":
            sig, h0 = mirror_hierarchy_sigma_eh(instance, spectrum)
        elif isinstance(hierarchy, MixtureFit):
            sig, h0 = hierarchy_sigma_eh(instance, hierarchy, spectrum), hierarchy_h0(instance, hierarchy)
        else:
            raise ValueError(f"unknown hierarchy {hierarchy!r}")
        y = predicted_log_weight_degenerate(_with_sigma_eh(base, sig), h0, gamma, theta,
                                            use_full_form).log_weight
    y = np.broadcast_to(np.asarray(y, dtype=float), (len(spectrum),))
    return y - y.mean()


def _with_sigma_eh(m: JointMoments, sigma_eh) -> JointMoments:
    return JointMoments(m.mu_e, m.sigma_e, m.mu_h, m.sigma_h, sigma_eh, math.nan, m.reference)
