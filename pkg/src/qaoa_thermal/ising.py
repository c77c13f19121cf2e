"""Ising instances, random QUBO/MaxCut families and exhaustive spectra.

Configurations are integers in ``[0, 2**n)``; bit ``i`` (least significant
first) is the binary variable ``x_i`` and the spin is ``s_i = 2*x_i - 1``.
Energies are the centered Ising values

    E(s) = 1/2 * sum_ij s_i J_ij s_j + sum_i h_i s_i

and ``offset`` is the constant with ``E = binary_objective + offset``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numba
import numpy as np

RNG_NAME = "numpy.PCG64"
MAX_QUBITS = 24


class SizeLimitError(ValueError):
    """Raised when an exhaustive computation would exceed the qubit limit."""


def check_size(n: int, limit: int = MAX_QUBITS) -> None:
    if n > limit:
        raise SizeLimitError(f"n={n} exceeds the supported maximum of {limit} qubits")


@dataclass(frozen=True, eq=False)
class IsingInstance:
    n: int
    couplings: np.ndarray
    fields: np.ndarray
    offset: float = 0.0
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        J = np.array(self.couplings, dtype=float)
        h = np.array(self.fields, dtype=float)
        if self.n < 1:
            raise ValueError("n must be positive")
        if J.shape != (self.n, self.n) or h.shape != (self.n,):
            raise ValueError(f"shape mismatch: couplings {J.shape}, fields {h.shape} for n={self.n}")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(h)) and math.isfinite(self.offset)):
            raise ValueError("non-finite entries in instance")
        if np.any(np.diag(J) != 0.0):
            raise ValueError("couplings must have zero diagonal")
        if not np.array_equal(J, J.T):
            raise ValueError("couplings must be symmetric")
        J.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "fields", h)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def degenerate(self) -> bool:
        """True for field-free instances, whose spectrum is invariant under a global flip."""
        return not np.any(self.fields)

    def scaled(self, factor: float) -> IsingInstance:
        return IsingInstance(self.n, self.couplings * factor, self.fields * factor,
                             self.offset * factor, dict(self.metadata))

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "couplings": self.couplings.tolist(),
            "fields": self.fields.tolist(),
            "offset": self.offset,
            "generator": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> IsingInstance:
        return cls(
            n=int(data["n"]),
            couplings=np.asarray(data["couplings"], dtype=float),
            fields=np.asarray(data["fields"], dtype=float),
            offset=float(data.get("offset", 0.0)),
            metadata=dict(data.get("generator", {})),
        )


@dataclass(frozen=True, eq=False)
class EnergyTable:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size).bit_length() - 1

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def ground_state(self) -> int:
        return int(np.argmin(self.values))

    @property
    def highest_state(self) -> int:
        return int(np.argmax(self.values))

    def __len__(self) -> int:
        return self.values.size


def spins(x: int, n: int) -> np.ndarray:
    """Spin vector (+/-1) of configuration ``x``."""
    return 2.0 * ((x >> np.arange(n)) & 1) - 1.0


def spin_matrix(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows are the spin vectors of configurations ``start..stop-1``."""
    stop = 1 << n if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    return 2.0 * ((idx[:, None] >> np.arange(n)) & 1) - 1.0


def complement(x, n: int):
    """Bitwise complement (global spin flip); works on ints and integer arrays."""
    return x ^ ((1 << n) - 1)


def hamming(reference: int, n: int) -> np.ndarray:
    """Hamming distance from ``reference`` to every configuration."""
    return np.bitwise_count(np.arange(1 << n, dtype=np.int64) ^ reference).astype(float)


def energy(instance: IsingInstance, config: int) -> float:
    if not 0 <= config < (1 << instance.n):
        raise ValueError(f"configuration {config} out of range for n={instance.n}")
    s = spins(config, instance.n)
    return float(0.5 * s @ instance.couplings @ s + instance.fields @ s)


@numba.njit(cache=True)
def _gray_spectrum(J, h):
    n = h.shape[0]
    size = 1 << n
    out = np.empty(size)
    s = -np.ones(n)
    local = np.zeros(n)
    for i in range(n):
        for j in range(n):
            local[i] += J[i, j] * s[j]
    e = 0.0
    for i in range(n):
        e += s[i] * (0.5 * local[i] + h[i])
    out[0] = e
    gray = 0
    for k in range(1, size):
        i = 0
        while not (k >> i) & 1:
            i += 1
        si = s[i]
        e -= 2.0 * si * (local[i] + h[i])
        for j in range(n):
            local[j] -= 2.0 * si * J[j, i]
        s[i] = -si
        gray ^= 1 << i
        out[gray] = e
    return out


def full_spectrum(instance: IsingInstance, max_qubits: int = MAX_QUBITS) -> EnergyTable:
    """All ``2**n`` energies by Gray-code enumeration with cached local fields.

    Successive Gray codes differ in a single spin, so each step costs O(n).
    Accumulated rounding stays below ~1e-12 relative at desk-scale n.
    """
    check_size(instance.n, max_qubits)
    return EnergyTable(_gray_spectrum(np.ascontiguousarray(instance.couplings),
                                      np.ascontiguousarray(instance.fields)))


def dense_spectrum(instance: IsingInstance, block: int = 1 << 14) -> np.ndarray:
    """Direct O(n^2 2^n) evaluation; independent cross-check for ``full_spectrum``."""
    size = 1 << instance.n
    out = np.empty(size)
    for start in range(0, size, block):
        stop = min(size, start + block)
        S = spin_matrix(instance.n, start, stop)
        out[start:stop] = 0.5 * np.einsum("ki,ij,kj->k", S, instance.couplings, S) + S @ instance.fields
    return out


def _random_q(n: int, density: float, seed: int) -> np.ndarray:
    if n < 2:
        raise ValueError("random families need n >= 2")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    present = rng.random(iu[0].size) < density
    weights = rng.standard_normal(iu[0].size)
    Q = np.zeros((n, n))
    Q[iu] = np.where(present, weights, 0.0)
    return Q + Q.T


def generate_qubo(n: int, density: float = 1.0, seed: int = 0) -> IsingInstance:
    """Random QUBO with N(0, 1) weights mapped to Ising form (J = Q, h = row sums)."""
    Q = _random_q(n, density, seed)
    h = (Q.sum(axis=0) + Q.sum(axis=1)) / 2.0
    meta = {"family": "qubo", "density": density, "seed": seed, "rng_name": RNG_NAME}
    return IsingInstance(n, Q, h, offset=-0.5 * Q.sum(), metadata=meta)


def generate_maxcut(n: int, density: float = 1.0, seed: int = 0) -> IsingInstance:
    """Random weighted MaxCut; the field cancels, leaving a Z2-symmetric instance.

    With ``density=1`` this is a Sherrington-Kirkpatrick type complete graph.
    """
    Q = _random_q(n, density, seed)
    meta = {"family": "maxcut", "density": density, "seed": seed, "rng_name": RNG_NAME}
    return IsingInstance(n, Q, np.zeros(n), offset=0.5 * Q.sum(), metadata=meta)


def two_level(delta: float) -> IsingInstance:
    """Single spin with E = delta/2 * s."""
    if delta == 0:
        raise ValueError("delta must be non-zero")
    meta = {"family": "two_level", "delta": delta}
    return IsingInstance(1, np.zeros((1, 1)), np.array([delta / 2.0]), metadata=meta)


def binary_objective(instance: IsingInstance, config: int) -> float:
    """Original 0/1 objective of a generated QUBO or MaxCut instance."""
    family = instance.metadata.get("family")
    x = ((config >> np.arange(instance.n)) & 1).astype(float)
    Q = instance.couplings
    if family == "qubo":
        return float(2.0 * x @ Q @ x)
    if family == "maxcut":
        return float(-2.0 * x @ Q @ (1.0 - x))
    raise ValueError(f"no binary objective for family {family!r}")


def approximation_ratio(instance: IsingInstance, achieved_energy: float,
                        spectrum: EnergyTable | None = None) -> float:
    spectrum = full_spectrum(instance) if spectrum is None else spectrum
    lo, hi = spectrum.min, spectrum.max
    if hi == lo:
        raise ValueError("flat spectrum: approximation ratio undefined")
    tol = 1e-12 * max(abs(lo), abs(hi), 1.0)
    if not lo - tol <= achieved_energy <= hi + tol:
        raise ValueError(f"energy {achieved_energy} outside spectrum range [{lo}, {hi}]")
    return min(1.0, max(0.0, (hi - achieved_energy) / (hi - lo)))


def spectral_norm(instance: IsingInstance, rtol: float = 1e-9, max_iter: int = 100_000) -> float:
    """Largest singular value of J by power iteration on J^T J."""
    J = instance.couplings
    if not np.any(J):
        return 0.0
    M = J.T @ J
    v = np.random.default_rng(0).standard_normal(instance.n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam_new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(lam_new - lam) <= rtol * 1e-3 * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(lam)
