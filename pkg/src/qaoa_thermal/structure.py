"""Hamming-distance / energy structure of an Ising spectrum.

For a reference configuration ``x`` every other configuration ``x'`` becomes a
point ``(H(x, x'), E(x'))``.  This module computes the moments of that point
cloud, the covariance ``sigma_EH(x)`` for all references at once, the
Mahalanobis / chi-squared(2) normality check, and a two-component Gaussian
mixture fit for field-free (Z2-symmetric) spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ising import EnergyTable, IsingInstance, check_size, full_spectrum, hamming


@dataclass(frozen=True)
class JointMoments:
    mu_e: float
    sigma_e: float
    mu_h: float
    sigma_h: float
    sigma_eh: float
    rho: float
    reference: int

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mu_h, self.mu_e])

    @property
    def covariance(self) -> np.ndarray:
        """Covariance in (H, E) coordinates."""
        return np.array([[self.sigma_h ** 2, self.sigma_eh], [self.sigma_eh, self.sigma_e ** 2]])


@dataclass
class GaussianComponent:
    mean: np.ndarray
    covariance: np.ndarray
    weight: float

    @property
    def rho(self) -> float:
        c = self.covariance
        return float(c[0, 1] / math.sqrt(c[0, 0] * c[1, 1]))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist(),
                "weight": self.weight, "rho": self.rho}


@dataclass
class MixtureFit:
    """Two-component fit; component 0 is the one nearer the reference (smaller mean H)."""

    components: list[GaussianComponent]
    h0: float
    assignments: np.ndarray
    log_likelihood: float
    reference: int
    n: int
    iterations: int = 0
    converged: bool = True
    unimodal: bool = False

    def to_dict(self) -> dict:
        return {
            "reference": self.reference,
            "h0": self.h0,
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "effectively_unimodal": self.unimodal,
            "components": [c.to_dict() for c in self.components],
            "component_sizes": np.bincount(self.assignments, minlength=2).tolist(),
        }


@dataclass
class NormalityReport:
    quantile_levels: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    agreement_fraction: float
    tail_outlier_fraction: float
    max_quantile: float

    @property
    def quantile_pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.empirical.tolist(), self.theoretical.tolist()))

    def to_dict(self) -> dict:
        return {
            "quantile_count": int(self.quantile_levels.size),
            "agreement_fraction": self.agreement_fraction,
            "tail_outlier_fraction": self.tail_outlier_fraction,
            "max_quantile": self.max_quantile,
            "band_rule": "|empirical - chi2| <= max(0.1 * chi2, 0.2)",
        }


def _spectrum(instance: IsingInstance, spectrum: EnergyTable | None) -> np.ndarray:
    return (full_spectrum(instance) if spectrum is None else spectrum).values


def joint_moments(instance: IsingInstance, reference: int,
                  spectrum: EnergyTable | None = None) -> JointMoments:
    E = _spectrum(instance, spectrum)
    H = hamming(reference, instance.n)
    mu_e, mu_h = E.mean(), H.mean()
    sigma_e, sigma_h = E.std(), H.std()
    sigma_eh = float(np.mean((H - mu_h) * (E - mu_e)))
    rho = sigma_eh / (sigma_e * sigma_h) if sigma_e > 0 else 0.0
    return JointMoments(float(mu_e), float(sigma_e), float(mu_h), float(sigma_h), sigma_eh, rho, reference)


def _bit_sums(values: np.ndarray, n: int) -> np.ndarray:
    """T[i] = sum of ``values`` over configurations with bit i set."""
    return np.array([values.reshape(-1, 2, 1 << i)[:, 1, :].sum() for i in range(n)])


def _spread_bits(T: np.ndarray, n: int) -> np.ndarray:
    """out[x] = -sum_i T[i] * s_i(x)."""
    out = np.zeros(1 << n)
    for i in range(n):
        view = out.reshape(-1, 2, 1 << i)
        view[:, 0, :] += T[i]
        view[:, 1, :] -= T[i]
    return out


def sigma_eh_all(instance: IsingInstance, spectrum: EnergyTable | None = None,
                 subset: np.ndarray | None = None) -> np.ndarray:
    """sigma_EH(x) for every reference x in O(n 2^n).

    The Hamming distance splits into per-bit indicators, so the covariance is
    ``-sum_i T_i s_i(x) / |S|`` where ``T_i`` sums the centered energies of the
    configurations in ``S`` with bit i set.  ``subset`` (boolean mask) restricts
    the population ``S``; by default it is the whole space.
    """
    check_size(instance.n)
    E = _spectrum(instance, spectrum)
    if subset is None:
        centered = E - E.mean()
        size = E.size
    else:
        subset = np.asarray(subset, dtype=bool)
        size = int(subset.sum())
        if size == 0:
            raise ValueError("empty subset")
        centered = np.where(subset, E - E[subset].mean(), 0.0)
    return _spread_bits(_bit_sums(centered, instance.n), instance.n) / size


def hierarchy_sigma_eh(instance: IsingInstance, mixture: MixtureFit,
                       spectrum: EnergyTable | None = None) -> np.ndarray:
    """Per-hierarchy covariance sigma_EH+(x), measured within the hierarchy that holds x."""
    in_a = mixture.assignments == 0
    sig_a = sigma_eh_all(instance, spectrum, subset=in_a)
    sig_b = sigma_eh_all(instance, spectrum, subset=~in_a)
    return np.where(in_a, sig_a, sig_b)


def hierarchy_h0(instance: IsingInstance, mixture: MixtureFit) -> np.ndarray:
    """Per-reference shift h0(x) = n/2 - mean Hamming distance to x's own hierarchy."""
    n = instance.n
    out = np.empty(1 << n)
    for label in (0, 1):
        mask = mixture.assignments == label
        counts = _bit_sums(mask.astype(float), n)
        frac_set = counts / mask.sum()
        # mean H(x, .) = sum_i P(bit i differs from x_i)
        mean_h = _spread_bits(frac_set - 0.5, n) + n / 2.0
        out[mask] = n / 2.0 - mean_h[mask]
    return out


def walsh_hadamard(values: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform (its own inverse up to 1/2^n)."""
    out = np.array(values, dtype=float)
    n = out.size.bit_length() - 1
    for k in range(n):
        view = out.reshape(-1, 2, 1 << k)
        a = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = a - view[:, 1, :]
    return out


def xor_convolve(kernel: np.ndarray, values: np.ndarray) -> np.ndarray:
    """out[x] = sum_y kernel[x ^ y] * values[y]."""
    return walsh_hadamard(walsh_hadamard(kernel) * walsh_hadamard(values)) / kernel.size


def mirror_hierarchy_sigma_eh(instance: IsingInstance, spectrum: EnergyTable | None = None
                              ) -> tuple[np.ndarray, float]:
    """sigma_EH+(x) and h0 with the hierarchy of each reference x taken as its own half-space.

    For a Z2-symmetric spectrum the two-Gaussian fit of x's cloud is mirror
    symmetric about H = n/2, so x's hierarchy is the set of configurations
    nearer to x than to its complement (points on the mirror line count half).
    Every such sum is an XOR-convolution with a function of the Hamming weight,
    which the Walsh-Hadamard transform evaluates for all x in O(n 2^n).
    """
    n = instance.n
    check_size(n)
    E = _spectrum(instance, spectrum)
    d = np.bitwise_count(np.arange(1 << n, dtype=np.int64)).astype(float)
    w = np.where(d < n / 2, 1.0, np.where(d == n / 2, 0.5, 0.0))
    size = w.sum()
    mean_h = float(w @ d) / size
    mu_a = xor_convolve(w, E) / size
    sigma = xor_convolve(w * d, E) / size - mean_h * mu_a
    return sigma, n / 2 - mean_h


def fit_sigma_eh_slope(instance: IsingInstance, hierarchy: MixtureFit | str | None = None,
                       spectrum: EnergyTable | None = None) -> tuple[float, float]:
    """Least-squares ``sigma_EH(x) = -c * E_x + omega``; returns ``(c, std(omega))``.

    Field-free instances need a hierarchy: either a ``MixtureFit`` whose
    assignments give one global split, or ``"mirror"`` for the per-reference
    split of :func:`mirror_hierarchy_sigma_eh`.
    """
    E = _spectrum(instance, spectrum)
    if hierarchy is None:
        if instance.degenerate and np.any(instance.couplings):
            raise ValueError("field-free instances need a hierarchy split")
        sig = sigma_eh_all(instance, spectrum)
    elif isinstance(hierarchy, str):
        if hierarchy != "mirror":
            raise ValueError(f"unknown hierarchy mode {hierarchy!r}")
        sig = mirror_hierarchy_sigma_eh(instance, spectrum)[0]
    else:
        sig = hierarchy_sigma_eh(instance, hierarchy, spectrum)
    e_c = E - E.mean()
    var = float(e_c @ e_c)
    if var == 0.0:
        raise ValueError("zero energy variance")
    slope = float(e_c @ (sig - sig.mean())) / var
    resid = sig - sig.mean() - slope * e_c
    return -slope, float(resid.std())


def mahalanobis(sample, moments: JointMoments) -> float | np.ndarray:
    """Mahalanobis distance of (H, E) point(s) from the moments' Gaussian."""
    d = np.sqrt(_mahalanobis_sq(np.atleast_2d(sample), moments.mean, moments.covariance))
    return d if np.ndim(sample) > 1 else float(d[0])


def _mahalanobis_sq(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    if not (cov[0, 0] > 0 and cov[1, 1] > 0) or det <= 1e-12 * cov[0, 0] * cov[1, 1]:
        raise np.linalg.LinAlgError("singular covariance")
    d = points - mean
    inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[0, 1], cov[0, 0]]]) / det
    return np.einsum("ki,ij,kj->k", d, inv, d)


def chi2_2_quantile(q):
    """Quantile function of the chi-squared distribution with two degrees of freedom."""
    return -2.0 * np.log1p(-np.asarray(q, dtype=float))


def qq_agreement(d2: np.ndarray, quantile_count: int = 500, max_quantile: float = 1.0,
                 rel: float = 0.1, abs_: float = 0.2) -> NormalityReport:
    """Compare empirical D_M^2 quantiles with chi2_2 ones under the band rule.

    Levels are the midpoints ``(k + 1/2) / quantile_count``; ``agreement_fraction``
    counts levels up to ``max_quantile``.  ``tail_outlier_fraction`` is one minus
    the largest level below which every quantile pair agrees.
    """
    levels = (np.arange(quantile_count) + 0.5) / quantile_count
    emp = np.quantile(d2, levels)
    theo = chi2_2_quantile(levels)
    ok = np.abs(emp - theo) <= np.maximum(rel * theo, abs_)
    considered = levels <= max_quantile
    agreement = float(ok[considered].mean())
    first_bad = np.flatnonzero(~ok)
    described = 1.0 if first_bad.size == 0 else (levels[first_bad[0]] - 0.5 / quantile_count)
    return NormalityReport(levels, emp, theo, agreement, float(1.0 - described), max_quantile)


def point_cloud(instance: IsingInstance, reference: int,
                spectrum: EnergyTable | None = None) -> np.ndarray:
    """(H, E) pairs for every configuration relative to ``reference``."""
    return np.column_stack([hamming(reference, instance.n), _spectrum(instance, spectrum)])


def normality_test(instance: IsingInstance, reference: int, hierarchy: MixtureFit | None = None,
                   quantile_count: int = 500, max_quantile: float = 1.0,
                   spectrum: EnergyTable | None = None) -> NormalityReport:
    """Mahalanobis-distance Q-Q test of the (H, E) cloud against chi2_2.

    Without ``hierarchy`` every point is scored against the global moments.  With a
    mixture fit, each point is scored against the mean and covariance of the
    cluster it was assigned to (the hard partition truncates each soft component
    at the symmetry line, so the cluster's own moments are the right reference).
    """
    pts = point_cloud(instance, reference, spectrum)
    if hierarchy is None:
        m = joint_moments(instance, reference, spectrum)
        d2 = _mahalanobis_sq(pts, m.mean, m.covariance)
    else:
        d2 = np.empty(len(pts))
        for label in (0, 1):
            mask = hierarchy.assignments == label
            cluster = pts[mask]
            d2[mask] = _mahalanobis_sq(cluster, cluster.mean(axis=0), np.cov(cluster.T, bias=True))
    return qq_agreement(d2, quantile_count, max_quantile)


def _log_gauss(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    return -0.5 * _mahalanobis_sq(points, mean, cov) - math.log(2 * math.pi) - 0.5 * math.log(det)


def em_mixture2(points: np.ndarray, means: np.ndarray, covs: np.ndarray, weights: np.ndarray,
                tol: float = 1e-8, max_iter: int = 500, reg: float = 1e-9):
    """Expectation-maximization for a two-component bivariate Gaussian mixture.

    Stops when the mean per-point log-likelihood gains less than ``tol``.
    Returns ``(means, covs, weights, responsibilities, total_loglik, iterations, converged)``.
    """
    means, covs, weights = means.copy(), covs.copy(), weights.copy()
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        logp = np.column_stack([np.log(weights[k]) + _log_gauss(points, means[k], covs[k]) for k in range(2)])
        top = logp.max(axis=1, keepdims=True)
        norm = top[:, 0] + np.log(np.exp(logp - top).sum(axis=1))
        resp = np.exp(logp - norm[:, None])
        ll = float(norm.mean())
        if ll - prev < tol:
            converged = True
            break
        prev = ll
        nk = resp.sum(axis=0)
        weights = nk / nk.sum()
        for k in range(2):
            means[k] = resp[:, k] @ points / nk[k]
            d = points - means[k]
            covs[k] = (resp[:, k, None] * d).T @ d / nk[k] + reg * np.eye(2)
    logp = np.column_stack([np.log(weights[k]) + _log_gauss(points, means[k], covs[k]) for k in range(2)])
    top = logp.max(axis=1, keepdims=True)
    norm = top[:, 0] + np.log(np.exp(logp - top).sum(axis=1))
    resp = np.exp(logp - norm[:, None])
    return means, covs, weights, resp, float(norm.sum()), it, converged


def fit_mixture2(instance: IsingInstance, reference: int, spectrum: EnergyTable | None = None,
                 tol: float = 1e-8, max_iter: int = 500) -> MixtureFit:
    """Two-Gaussian fit of the (H, E) cloud, used to split a Z2 spectrum into hierarchies.

    Initialization is deterministic: means at ``n/2 -+ sqrt(n)/2`` in H and 0 in E,
    equal weights, diagonal covariances from the global variances.
    """
    n = instance.n
    pts = point_cloud(instance, reference, spectrum)
    if np.all(pts == pts[0]):
        raise ValueError("degenerate data: all points identical")
    var = pts.var(axis=0)
    if np.any(var == 0):
        raise ValueError("degenerate data: zero variance along one axis")
    half = math.sqrt(n) / 2
    mu_e = pts[:, 1].mean()
    means0 = np.array([[n / 2 - half, mu_e], [n / 2 + half, mu_e]])
    covs0 = np.array([np.diag(var), np.diag(var)])
    means, covs, weights, resp, ll, iters, converged = em_mixture2(
        pts, means0, covs0, np.array([0.5, 0.5]), tol=tol, max_iter=max_iter)

    order = np.argsort(means[:, 0], kind="stable")
    means, covs, weights, resp = means[order], covs[order], weights[order], resp[:, order]
    comps = [GaussianComponent(means[k], covs[k], float(weights[k])) for k in range(2)]

    labels = np.argmax(resp, axis=1)
    ties = np.abs(resp[:, 0] - resp[:, 1]) <= 1e-9
    if np.any(ties):
        idx = np.arange(1 << n)
        paired = ties & ties[idx ^ ((1 << n) - 1)]
        # Z2 partners with equal responsibility go to opposite hierarchies
        top = n - 1
        same_top = ((idx >> top) & 1) == ((reference >> top) & 1)
        labels[paired] = np.where(same_top[paired], 0, 1)
        plus = 0 if comps[0].rho >= comps[1].rho else 1
        labels[ties & ~paired] = plus

    h0 = float(abs(means[1, 0] - means[0, 0]) / 2)
    r0, r1 = comps[0].rho, comps[1].rho
    mirrored = r0 * r1 < 0 and abs(r0 + r1) <= 0.25 * max(abs(r0), abs(r1))
    unimodal = bool(not mirrored or weights.min() < 0.25)
    return MixtureFit(comps, h0, labels.astype(np.int64), ll, reference, n, iters, converged, unimodal)
