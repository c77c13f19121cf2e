"""Seeded batch experiments and plot-ready figure data.

An experiment is a JSON config: a problem family, a size, how many random
instances to draw, how to pick the QAOA angles and which analyses to run.
Every instance yields one JSON record; scalar results are also collected in
an aggregate CSV.  Outputs contain no timestamps, so reruns of the same config
are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .baseline import ChainConfig, distance_report, exact_boltzmann, metropolis_sample, mixing_bound_report
from .engine import optimize_angles, qaoa_probabilities
from .ising import (EnergyTable, IsingInstance, approximation_ratio, full_spectrum, generate_maxcut,
                    generate_qubo, hamming, two_level)
from .structure import (fit_mixture2, fit_sigma_eh_slope, joint_moments, normality_test)
from .thermometry import beta_gamma_scan, detect_gamma_c, fit_beta, predicted_beta

FAMILIES = ("qubo", "maxcut", "two_level")
ANALYSES = ("simulate", "structure", "normality", "mixture", "thermal", "scan", "mcmc", "figures")
FIGURE_KINDS = ("fig2", "fig3", "fig4", "fig5", "fig6")
PROFILES = {"quick": {"n": 12, "instance_count": 100}, "full": {"n": 14, "instance_count": 1000}}
SCHEMA_PATH = Path(__file__).with_name("schema.json")

TOLERANCES = {
    "probability_floor": 1e-300,
    "kl_epsilon": 1e-12,
    "qq_band_relative": 0.1,
    "qq_band_absolute": 0.2,
    "normality_max_quantile": 0.99,
    "gamma_c_ratio": 0.5,
    "optimizer_atol": 1e-6,
    "em_tol": 1e-8,
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class ExperimentConfig:
    family: str
    n: int
    density: float | None = 1.0
    instance_count: int = 1
    seed: int | None = 0
    angle_policy: dict[str, Any] = field(default_factory=lambda: {"kind": "optimize"})
    analyses: list[str] = field(default_factory=lambda: ["simulate"])
    output_dir: str = "results"
    delta: float = 1.0
    quantile_count: int = 500
    scan_points: int = 8
    figure_points: int = 5
    mcmc: dict[str, Any] = field(default_factory=dict)
    workers: int = 1
    profile: str | None = None
    save_tables: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")

        if self.family not in FAMILIES:
            bad("family", f"must be one of {FAMILIES}, got {self.family!r}")
        if not isinstance(self.n, int) or self.n < 1:
            bad("n", "must be a positive integer")
        if self.family == "two_level":
            if self.n != 1:
                bad("n", "two_level instances have n = 1")
            if self.density is not None:
                bad("density", "not allowed for two_level (set to null)")
            if self.delta == 0:
                bad("delta", "must be non-zero")
            extra = set(self.analyses) - {"simulate", "figures"}
            if extra:
                bad("analyses", f"{sorted(extra)} need n >= 2 and are unavailable for two_level")
        else:
            if self.n < 2:
                bad("n", "random families need n >= 2")
            if self.density is None or not 0.0 < self.density <= 1.0:
                bad("density", "must lie in (0, 1]")
            if self.seed is None:
                bad("seed", "required for random instance families")
        if not isinstance(self.instance_count, int) or self.instance_count < 1:
            bad("instance_count", "must be a positive integer")
        unknown = set(self.analyses) - set(ANALYSES)
        if unknown:
            bad("analyses", f"unknown entries {sorted(unknown)}")
        kind = self.angle_policy.get("kind")
        if kind == "explicit":
            pairs = self.angle_policy.get("angles")
            if not pairs or any(len(p) != 2 for p in pairs):
                bad("angle_policy.angles", "explicit policy needs a non-empty list of [gamma, theta] pairs")
        elif kind in ("optimize", "grid"):
            for key in ("gamma_points", "theta_points"):
                if int(self.angle_policy.get(key, 41)) < 1:
                    bad(f"angle_policy.{key}", "must be >= 1")
        else:
            bad("angle_policy.kind", "must be 'optimize', 'grid' or 'explicit'")
        if self.quantile_count < 2:
            bad("quantile_count", "must be >= 2")
        if self.scan_points < 2 or self.figure_points < 2:
            bad("scan_points/figure_points", "must be >= 2")
        if self.workers < 1:
            bad("workers", "must be >= 1")
        if self.profile is not None and self.profile not in PROFILES:
            bad("profile", f"must be one of {sorted(PROFILES)}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        profile = data.get("profile")
        if profile is not None:
            if profile not in PROFILES:
                raise ConfigError(f"profile: must be one of {sorted(PROFILES)}")
            for key, value in PROFILES[profile].items():
                data.setdefault(key, value)
        for required in ("family", "n"):
            if required not in data:
                raise ConfigError(f"{required}: missing")
        if data["family"] == "two_level":
            data.setdefault("density", None)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class ResultRecord:
    index: int
    instance: dict[str, Any]
    angles: list[dict[str, Any]]
    analyses: dict[str, Any]
    config: dict[str, Any]
    tolerances: dict[str, float] = field(default_factory=lambda: dict(TOLERANCES))
    code_version: str = field(default_factory=_version)

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(asdict(self))


def _jsonable(obj):
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def instance_seed(seed: int, index: int) -> int:
    """Independent per-instance seed derived from the experiment seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def make_instance(config: ExperimentConfig, index: int) -> IsingInstance:
    if config.family == "two_level":
        return two_level(config.delta)
    generate = generate_qubo if config.family == "qubo" else generate_maxcut
    inst = generate(config.n, config.density, instance_seed(config.seed, index))
    inst.metadata["experiment_seed"] = config.seed
    inst.metadata["index"] = index
    return inst


def choose_angles(config: ExperimentConfig, instance: IsingInstance,
                  spectrum: EnergyTable) -> list[dict[str, Any]]:
    policy = config.angle_policy
    if policy["kind"] == "explicit":
        return [{"gamma": float(g), "theta": float(t), "source": "explicit"} for g, t in policy["angles"]]
    res = optimize_angles(instance, int(policy.get("gamma_points", 41)), int(policy.get("theta_points", 41)),
                          policy.get("gamma_max"), spectrum, TOLERANCES["optimizer_atol"])
    if policy["kind"] == "grid":
        grid = res.trace[: int(policy.get("gamma_points", 41)) * int(policy.get("theta_points", 41))]
        g, t, e = min(grid, key=lambda r: r[2])
        return [{"gamma": g, "theta": t, "mean_energy": e, "source": "grid"}]
    return [{"gamma": res.gamma_opt, "theta": res.theta_opt, "mean_energy": res.mean_energy,
             "grid_best": res.grid_best, "symmetry_class": res.symmetry_class,
             "evaluations": len(res.trace), "source": "optimize"}]


def _references(instance: IsingInstance, spectrum: EnergyTable) -> list[int]:
    if instance.degenerate:
        return [spectrum.ground_state]
    return [spectrum.ground_state, spectrum.highest_state]


def _slope(instance: IsingInstance, spectrum: EnergyTable) -> tuple[float, float]:
    return fit_sigma_eh_slope(instance, "mirror" if instance.degenerate else None, spectrum)


def analyze_instance(config: ExperimentConfig, index: int) -> ResultRecord:
    instance = make_instance(config, index)
    spectrum = full_spectrum(instance)
    angles = choose_angles(config, instance, spectrum)
    wanted = set(config.analyses)
    out: dict[str, Any] = {}

    if "simulate" in wanted:
        rows = []
        for a in angles:
            p = qaoa_probabilities(spectrum, a["gamma"], a["theta"])
            e = float(p @ spectrum.values)
            rows.append({"gamma": a["gamma"], "theta": a["theta"], "mean_energy": e,
                         "approximation_ratio": approximation_ratio(instance, e, spectrum),
                         "ground_probability": float(p[spectrum.ground_state])})
        out["simulate"] = rows

    if "structure" in wanted:
        m = joint_moments(instance, spectrum.ground_state, spectrum)
        c, omega = _slope(instance, spectrum)
        out["structure"] = {"reference": spectrum.ground_state, "moments": asdict(m), "c": c,
                            "omega_std": omega,
                            "hierarchy": "mirror" if instance.degenerate else "none"}

    mixtures = {}
    if "mixture" in wanted or ("normality" in wanted and instance.degenerate):
        for ref in _references(instance, spectrum):
            mixtures[ref] = fit_mixture2(instance, ref, spectrum, tol=TOLERANCES["em_tol"])
        if "mixture" in wanted:
            out["mixture"] = [mixtures[r].to_dict() for r in mixtures]

    if "normality" in wanted:
        reports = []
        for ref in _references(instance, spectrum):
            hier = mixtures.get(ref) if instance.degenerate else None
            rep = normality_test(instance, ref, hier, config.quantile_count,
                                 TOLERANCES["normality_max_quantile"], spectrum)
            reports.append({"reference": ref, "clustered": hier is not None, **rep.to_dict()})
        out["normality"] = reports

    fits = []
    if wanted & {"thermal", "mcmc"}:
        c = _slope(instance, spectrum)[0]
        for a in angles:
            f = fit_beta(qaoa_probabilities(spectrum, a["gamma"], a["theta"]), spectrum)
            row: dict[str, Any] = {"gamma": a["gamma"], "theta": a["theta"], "fit": f.to_dict(), "c": c}
            try:
                row["predicted_beta"] = predicted_beta(c, a["gamma"], a["theta"], instance.degenerate)
            except ValueError as exc:
                row["predicted_beta"] = None
                row["predicted_beta_error"] = str(exc)
            row["mixing_bound"] = mixing_bound_report(instance, f).to_dict()
            fits.append((row, f))
        if "thermal" in wanted:
            out["thermal"] = [r for r, _ in fits]

    if "scan" in wanted:
        out["scan"] = _scan(config, instance, spectrum, angles[0])

    if "mcmc" in wanted:
        beta = config.mcmc.get("beta")
        beta = fits[0][1].beta if beta is None else float(beta)
        chain = ChainConfig(beta=beta, sweeps=int(config.mcmc.get("sweeps", 2_000)),
                            burn_in_sweeps=int(config.mcmc.get("burn_in_sweeps", 100)),
                            seed=instance_seed(config.seed if config.seed is not None else 0, index),
                            chain_count=int(config.mcmc.get("chain_count", 8)))
        res = metropolis_sample(instance, chain)
        exact = exact_boltzmann(spectrum, beta)
        out["mcmc"] = {"chain": asdict(chain), "acceptance_rate": res.acceptance_rate,
                       "samples": res.samples,
                       "distance": distance_report(res.empirical, exact, TOLERANCES["kl_epsilon"]).to_dict()}

    return ResultRecord(index, {**instance.metadata, "n": instance.n, "e_min": spectrum.min,
                                "e_max": spectrum.max, "degenerate": instance.degenerate},
                        angles, out, config.to_dict())


def _scan(config: ExperimentConfig, instance: IsingInstance, spectrum: EnergyTable,
          angle: dict[str, Any]) -> dict[str, Any]:
    """beta over gamma = gamma_opt * k / K (k = 1..K), then out to 3 gamma_opt for gamma_c."""
    g_opt, theta = angle["gamma"], angle["theta"]
    k = config.scan_points
    linear = [g_opt * (i + 1) / k for i in range(k)]
    extended = [g_opt * (1 + 2 * (i + 1) / k) for i in range(k)]
    table = beta_gamma_scan(instance, theta, linear + extended, spectrum)
    betas = np.array([f.beta for _, f in table[:k]])
    pearson = float(np.corrcoef(np.abs(linear), betas)[0, 1]) if np.ptp(betas) > 0 else math.nan
    gc = detect_gamma_c([g for g, _ in table], [f for _, f in table], TOLERANCES["gamma_c_ratio"])
    rows = [{"gamma": g, "theta": theta, "beta": f.beta, "intercept": f.intercept, "r2": f.r_squared,
             "residual_std": f.residual_std, "excluded_fraction": f.excluded_fraction} for g, f in table]
    return {"rows": rows, "pearson_abs_gamma_beta": pearson, "gamma_c": gc.gamma_c,
            "gamma_c_threshold": gc.threshold, "gamma_c_reached": gc.reached}


def _write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return str(v)


SUMMARY_COLUMNS = ["index", "family", "n", "seed", "gamma", "theta", "mean_energy", "approximation_ratio",
                   "ground_probability", "c", "omega_std", "normality_agreement", "beta", "r2",
                   "predicted_beta", "temperature_over_norm", "pearson_abs_gamma_beta", "gamma_c",
                   "mcmc_tvd", "mcmc_kl"]


def _summary_row(rec: dict[str, Any]) -> list[Any]:
    a = rec["analyses"]
    first = rec["angles"][0]
    sim = a.get("simulate", [{}])[0]
    th = a.get("thermal", [{}])[0]
    norm = a.get("normality")
    return [rec["index"], rec["instance"].get("family"), rec["instance"]["n"], rec["instance"].get("seed"),
            first["gamma"], first["theta"], sim.get("mean_energy"), sim.get("approximation_ratio"),
            sim.get("ground_probability"), a.get("structure", {}).get("c"),
            a.get("structure", {}).get("omega_std"),
            float(np.mean([r["agreement_fraction"] for r in norm])) if norm else None,
            th.get("fit", {}).get("beta"), th.get("fit", {}).get("r_squared"), th.get("predicted_beta"),
            th.get("mixing_bound", {}).get("ratio"), a.get("scan", {}).get("pearson_abs_gamma_beta"),
            a.get("scan", {}).get("gamma_c"), a.get("mcmc", {}).get("distance", {}).get("tvd"),
            a.get("mcmc", {}).get("distance", {}).get("kl")]


def _prepare_dir(path: str | Path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output_dir {out} is not writable: {exc}") from exc
    return out


def _records(config: ExperimentConfig) -> list[ResultRecord]:
    indices = range(config.instance_count)
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(analyze_instance, [config] * config.instance_count, indices))
    return [analyze_instance(config, i) for i in indices]


def write_probability_table(path: Path, spectrum: EnergyTable, probs: np.ndarray) -> Path:
    _write_csv(path, ["x", "E_x", "prob"], ([x, e, p] for x, (e, p) in enumerate(zip(spectrum.values, probs))))
    return path


def write_qq_table(path: Path, report) -> Path:
    _write_csv(path, ["q", "d2_empirical", "chi2_theoretical"],
               zip(report.quantile_levels, report.empirical, report.theoretical))
    return path


def _save_tables(config: ExperimentConfig, out: Path) -> list[Path]:
    """Per-instance probability tables at the first angle pair and ground-reference Q-Q tables."""
    tables = out / "tables"
    tables.mkdir(exist_ok=True)
    written = []
    for i in range(config.instance_count):
        instance = make_instance(config, i)
        spectrum = full_spectrum(instance)
        a = choose_angles(config, instance, spectrum)[0]
        written.append(write_probability_table(tables / f"probabilities_{i:04d}.csv", spectrum,
                                               qaoa_probabilities(spectrum, a["gamma"], a["theta"])))
        if instance.n >= 2:
            ref = spectrum.ground_state
            hier = fit_mixture2(instance, ref, spectrum, tol=TOLERANCES["em_tol"]) if instance.degenerate else None
            rep = normality_test(instance, ref, hier, config.quantile_count, 1.0, spectrum)
            written.append(write_qq_table(tables / f"qq_{i:04d}.csv", rep))
    return written


def run_experiment(config: ExperimentConfig) -> list[Path]:
    """Run the configured analyses; returns the written files."""
    out = _prepare_dir(config.output_dir)
    written = []
    if set(config.analyses) - {"figures"}:
        rec_dir = out / "records"
        rec_dir.mkdir(exist_ok=True)
        records = [r.to_dict() for r in _records(config)]
        for rec in records:
            path = rec_dir / f"record_{rec['index']:04d}.json"
            path.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            written.append(path)
        summary = out / "summary.csv"
        _write_csv(summary, SUMMARY_COLUMNS, (_summary_row(r) for r in records))
        written.append(summary)
        if "scan" in config.analyses:
            scan = out / "scan.csv"
            cols = ["gamma", "theta", "beta", "intercept", "r2", "residual_std", "excluded_fraction"]
            _write_csv(scan, ["index"] + cols,
                       ([r["index"]] + [row[c] for c in cols] for r in records for row in r["analyses"]["scan"]["rows"]))
            written.append(scan)
    if config.save_tables:
        written.extend(_save_tables(config, out))
    if "figures" in config.analyses:
        kinds = ["fig2"] if config.family == "two_level" else ["fig3", "fig4", "fig5", "fig6"]
        for kind in kinds:
            written.extend(emit_figure_data(kind, config))
    return written


def write_instances(config: ExperimentConfig) -> list[Path]:
    out = _prepare_dir(config.output_dir) / "instances"
    out.mkdir(exist_ok=True)
    paths = []
    for i in range(config.instance_count):
        path = out / f"instance_{i:04d}.json"
        path.write_text(json.dumps(_jsonable(make_instance(config, i).to_dict()), sort_keys=True) + "\n",
                        encoding="utf-8")
        paths.append(path)
    return paths


def _ellipse(mean: np.ndarray, cov: np.ndarray, weight: float = 1.0, level: float = 0.95) -> dict[str, Any]:
    """Confidence ellipse of a 2-d Gaussian in (H, E) coordinates."""
    vals, vecs = np.linalg.eigh(cov)
    scale = -2.0 * math.log(1.0 - level)
    return {"center": mean.tolist(), "covariance": cov.tolist(), "weight": weight, "level": level,
            "semi_axes": np.sqrt(np.maximum(vals, 0) * scale).tolist(),
            "angle_rad": float(math.atan2(vecs[1, 1], vecs[0, 1]))}


def emit_figure_data(kind: str, config: ExperimentConfig) -> list[Path]:
    """Write the plot-ready CSV (and sidecar JSON for fig3) for one figure kind."""
    if kind not in FIGURE_KINDS:
        raise ConfigError(f"kind: must be one of {FIGURE_KINDS}")
    if (kind == "fig2") != (config.family == "two_level"):
        raise ConfigError(f"kind: {kind} needs family {'two_level' if kind == 'fig2' else 'qubo or maxcut'}")
    out = _prepare_dir(config.output_dir)
    path = out / f"{kind}.csv"
    meta: dict[str, Any] = {"kind": kind, "config": config.to_dict(), "code_version": _version()}

    if kind == "fig2":
        thetas = np.linspace(-math.pi / 2, math.pi / 2, 41)
        gammas = np.linspace(-math.pi, math.pi, 41)
        spectrum = full_spectrum(two_level(config.delta))
        g_idx, e_idx = spectrum.ground_state, spectrum.highest_state
        rows = []
        for t in thetas:
            for g in gammas:
                p = qaoa_probabilities(spectrum, g, t)
                rows.append([t, g, p[g_idx], p[e_idx]])
        _write_csv(path, ["theta", "gamma", "p_ground", "p_excited"], rows)
        return [path]

    written = [path]
    rows, sidecar = [], []
    for i in range(config.instance_count):
        instance = make_instance(config, i)
        spectrum = full_spectrum(instance)
        ref = spectrum.ground_state
        if kind == "fig3":
            H = hamming(ref, instance.n)
            if instance.degenerate:
                mix = fit_mixture2(instance, ref, spectrum, tol=TOLERANCES["em_tol"])
                labels = mix.assignments
                ellipses = [_ellipse(c.mean, c.covariance, c.weight) for c in mix.components]
            else:
                labels = np.zeros(H.size, dtype=int)
                m = joint_moments(instance, ref, spectrum)
                ellipses = [_ellipse(m.mean, m.covariance)]
            rows.extend([i, int(h), e, int(lab)] for h, e, lab in zip(H, spectrum.values, labels))
            sidecar.append({"index": i, "reference": ref, "ellipses": ellipses})
        elif kind == "fig4":
            hier = fit_mixture2(instance, ref, spectrum, tol=TOLERANCES["em_tol"]) if instance.degenerate else None
            rep = normality_test(instance, ref, hier, config.quantile_count, 1.0, spectrum)
            rows.extend([i, q, e, t] for q, e, t in zip(rep.quantile_levels, rep.empirical, rep.theoretical))
        else:
            angle = choose_angles(config, instance, spectrum)[0]
            g_opt, t_opt = angle["gamma"], angle["theta"]
            k = config.figure_points
            if kind == "fig5":
                points = [(g_opt * 2.0 * j / (k - 1), g_opt * 2.0 * j / (k - 1), t_opt) for j in range(k)]
            else:
                ts = np.linspace(math.pi / 8, 3 * math.pi / 8, k)
                points = [(t, g_opt, t) for t in ts]
            for label, g, t in points:
                p = qaoa_probabilities(spectrum, g, t)
                rows.extend([i, label, x, e, pr] for x, (e, pr) in enumerate(zip(spectrum.values, p)))
            sidecar.append({"index": i, **angle})

    if kind == "fig3":
        _write_csv(path, ["instance", "H", "E", "component_label"], rows)
        meta["instances"] = sidecar
        side = out / "fig3_ellipses.json"
        side.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(side)
    elif kind == "fig4":
        _write_csv(path, ["instance", "q", "d2_empirical", "chi2_theoretical"], rows)
    else:
        _write_csv(path, ["instance", "gamma_or_theta", "x", "E_x", "prob"], rows)
        meta["instances"] = sidecar
        meta["scan_variable"] = "gamma" if kind == "fig5" else "theta"
        side = out / f"{kind}_meta.json"
        side.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(side)
    return written
