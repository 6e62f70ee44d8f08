"""End-to-end Monte Carlo verification of the joint limit laws.

For each horizon ``T`` the harness simulates every component on a fine mesh,
records the maximum over the mesh (continuous-time proxy) and over the two
grids, normalises them, and compares the empirical joint CDF on a lattice with
the theoretical limit ``G``.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import norm

from . import rng
from .errors import (ConfigMismatch, GridMeshMismatch, InsufficientExceedances,
                     PreconditionError)
from .gp_sim import (CorrelationModel, SimulationMesh, VectorProcessSpec, grid_stride,
                     mixing_draws, sample_points, support_maxima)
from .limit_laws import (CASE_KINDS, CONTINUOUS_KIND, ConstantSpacing, GaussHermite,
                         MonteCarlo, PickandsBank, PickandsSpacing, PiterbargParams,
                         PowerLogSpacing, TheoremCase, classify_grid, eval_G,
                         lattice_points, norm_constants)

DEFAULT_LATTICE = tuple(np.linspace(-2.0, 2.5, 5))
DEFAULT_LADDER = (math.exp(4), math.exp(6), math.exp(8))


@dataclass(frozen=True)
class Estimation:
    """Where Pickands-type constants come from: fixed values and/or a simulated bank."""

    H_alpha: float | None = None
    H_D: tuple = ()                       # ((D, value), ...)
    lam: float = 32.0
    reps: int = 4000
    seed: int = 11
    mesh: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    process: VectorProcessSpec
    grids: tuple
    case: TheoremCase
    T_values: tuple = DEFAULT_LADDER
    reps: int = 10_000
    seed: int = 0
    mesh_eps: float = 0.05
    lattice: tuple = DEFAULT_LATTICE
    estimation: Estimation = Estimation()
    integration: str = "gauss_hermite"
    continuous_proxy: str = "mesh"        # "mesh" maximum or "bridge"-corrected (alpha = 1 only)
    max_final_distance: float | None = None
    require_trend: bool = False

    @property
    def alpha(self) -> float:
        return self.process.components[0].alpha

    def validate(self) -> None:
        alphas = {m.alpha for m in self.process.components}
        if len(alphas) != 1:
            raise ConfigMismatch("all components must share alpha")
        kinds = tuple(classify_grid(g, self.alpha).tag for g in self.grids)
        want = CASE_KINDS[self.case.tag]
        if kinds != want:
            raise ConfigMismatch(f"case {self.case.tag} needs grids {want}, got {kinds}")
        for g, d in zip(self.grids, (self.case.D1, self.case.D2)):
            if isinstance(g, PickandsSpacing) and d is not None and d != g.D:
                raise ConfigMismatch(f"case spacing {d} differs from grid D={g.D}")
        if self.case.tag == "T22_i" and self.grids[0].D == self.grids[1].D:
            raise ConfigMismatch("T22_i needs two different Pickands spacings")
        for T in self.T_values:
            self.process.at_horizon(T).rho()
        if self.continuous_proxy not in ("mesh", "bridge"):
            raise ConfigMismatch(f"unknown continuous proxy {self.continuous_proxy!r}")
        if self.continuous_proxy == "bridge" and self.alpha != 1.0:
            raise ConfigMismatch("the bridge proxy needs alpha = 1")
        if self.reps < 1:
            raise PreconditionError("reps must be positive")

    def to_dict(self) -> dict:
        return config_to_dict(self)

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------- config (de)serialisation

def _grid_to_dict(g) -> dict:
    if isinstance(g, ConstantSpacing):
        return {"form": "constant", "delta0": g.delta0}
    if isinstance(g, PickandsSpacing):
        return {"form": "pickands", "D": g.D}
    return {"form": "powerlog", "beta": g.beta}


def grid_from_dict(d: dict):
    d = dict(d)
    form = d.pop("form", None)
    allowed = {"constant": ("delta0", ConstantSpacing), "pickands": ("D", PickandsSpacing),
               "powerlog": ("beta", PowerLogSpacing)}
    if form not in allowed:
        raise ConfigMismatch(f"unknown grid form {form!r}")
    key, cls = allowed[form]
    if set(d) != {key}:
        raise ConfigMismatch(f"grid form {form!r} takes exactly the key {key!r}")
    return cls(float(d[key]))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    proc = cfg.process
    case = {"tag": cfg.case.tag}
    for k in ("theta1", "theta2", "D1", "D2"):
        if getattr(cfg.case, k) is not None:
            case[k] = getattr(cfg.case, k)
    est = cfg.estimation
    return {
        "schema_version": 1,
        "process": {"alpha": cfg.alpha, "C": [m.c for m in proc.components],
                    "cross": [list(r) for r in proc.cross]},
        "grids": [_grid_to_dict(g) for g in cfg.grids],
        "case": case,
        "estimation": {"H_alpha": est.H_alpha, "H_D": [[d, v] for d, v in est.H_D],
                       "lambda": est.lam, "reps": est.reps, "seed": est.seed, "mesh": est.mesh},
        "experiment": {"T_values": list(cfg.T_values), "reps": cfg.reps, "seed": cfg.seed,
                       "mesh_eps": cfg.mesh_eps, "lattice": list(cfg.lattice),
                       "integration": cfg.integration,
                       "continuous_proxy": cfg.continuous_proxy,
                       "max_final_distance": cfg.max_final_distance,
                       "require_trend": cfg.require_trend},
    }


def _take(d: dict, section: str, allowed: Sequence[str]) -> dict:
    if not isinstance(d, dict):
        raise ConfigMismatch(f"section {section!r} must be an object")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigMismatch(f"unknown keys in {section!r}: {sorted(extra)}")
    return d


def config_from_dict(doc: dict) -> ExperimentConfig:
    _take(doc, "root", ("schema_version", "process", "grids", "case", "estimation",
                        "experiment", "output"))
    if doc.get("schema_version") != 1:
        raise ConfigMismatch(f"unsupported schema_version {doc.get('schema_version')!r}")
    proc = _take(doc["process"], "process", ("alpha", "C", "cross", "p"))
    cross = np.asarray(proc.get("cross", [[0.0] * proc.get("p", 1)] * proc.get("p", 1)), float)
    p = cross.shape[0]
    cs = proc.get("C", 1.0)
    cs = [float(cs)] * p if np.isscalar(cs) else [float(c) for c in cs]
    comps = tuple(CorrelationModel(float(proc["alpha"]), cs[k], float(cross[k, k]))
                  for k in range(p))
    exp_ = _take(doc.get("experiment", {}), "experiment",
                 ("T_values", "log_T", "reps", "seed", "mesh_eps", "lattice", "integration",
                  "continuous_proxy",
                  "max_final_distance", "require_trend"))
    if "log_T" in exp_:
        T_values = tuple(math.exp(float(v)) for v in exp_["log_T"])
    else:
        T_values = tuple(float(v) for v in exp_.get("T_values", DEFAULT_LADDER))
    process = VectorProcessSpec(comps, cross, T_values[0])
    grids = doc["grids"]
    if not isinstance(grids, list) or len(grids) != 2:
        raise ConfigMismatch("grids must be a list of two grid objects")
    grids = tuple(grid_from_dict(g) for g in grids)
    case_d = dict(_take(doc["case"], "case", ("tag", "theta1", "theta2", "D1", "D2")))
    tag = case_d.pop("tag")
    est = _take(doc.get("estimation", {}), "estimation",
                ("H_alpha", "H_D", "lambda", "reps", "seed", "mesh"))
    estimation = Estimation(
        H_alpha=est.get("H_alpha"),
        H_D=tuple((float(d), float(v)) for d, v in est.get("H_D", [])),
        lam=float(est.get("lambda", 32.0)), reps=int(est.get("reps", 4000)),
        seed=int(est.get("seed", 11)), mesh=est.get("mesh"))
    cfg = ExperimentConfig(
        process=process, grids=grids, case=TheoremCase(tag, **case_d),
        T_values=T_values, reps=int(exp_.get("reps", 10_000)), seed=int(exp_.get("seed", 0)),
        mesh_eps=float(exp_.get("mesh_eps", 0.05)),
        lattice=tuple(float(v) for v in exp_.get("lattice", DEFAULT_LATTICE)),
        estimation=estimation, integration=exp_.get("integration", "gauss_hermite"),
        continuous_proxy=exp_.get("continuous_proxy", "mesh"),
        max_final_distance=exp_.get("max_final_distance"),
        require_trend=bool(exp_.get("require_trend", False)))
    cfg.validate()
    return cfg


# ------------------------------------------------------------ constants

@dataclass
class ResolvedConstants:
    norm: dict
    bank: PickandsBank | None


def resolve_constants(cfg: ExperimentConfig, workers: int | None = None) -> ResolvedConstants:
    """Fixed constants from the config, a simulated bank for whatever is missing."""
    est = cfg.estimation
    norm_c = {}
    if est.H_alpha is not None:
        norm_c["H_alpha"] = float(est.H_alpha)
    for d, v in est.H_D:
        norm_c[("H_D", d)] = float(v)
    pick_D = sorted({g.D for g in cfg.grids if isinstance(g, PickandsSpacing)})
    missing = "H_alpha" not in norm_c or any(("H_D", d) not in norm_c for d in pick_D)
    bank = None
    if cfg.case.needs_constants or missing:
        bank = PickandsBank.simulate(cfg.alpha, pick_D, est.lam, est.reps, est.seed,
                                     est.mesh, workers)
        for k, v in bank.norm_dict().items():
            norm_c.setdefault(k, v)
    return ResolvedConstants(norm_c, bank)


# ------------------------------------------------------------ simulation

def mesh_for(cfg: ExperimentConfig, T: float) -> tuple[float, list[float]]:
    """Mesh step and grid spacings at horizon T.

    The step is at most ``mesh_eps`` Pickands units and divides the finer
    non-sparse grid. With ``alpha != 1`` every grid must be a mesh multiple.
    """
    alpha = cfg.alpha
    h_max = cfg.mesh_eps * (2 * math.log(T)) ** (-1.0 / alpha)
    deltas = [g.delta(T, alpha) for g in cfg.grids]
    fine = [d for g, d in zip(cfg.grids, deltas) if not isinstance(g, ConstantSpacing)]
    base = min(fine) if fine else min(deltas)
    k = math.ceil(base / h_max - 1e-12)
    need = deltas if alpha != 1.0 else fine
    for kk in range(k, k + 64):
        h = base / kk
        try:
            for d in need:
                grid_stride(d, h)
            return h, deltas
        except GridMeshMismatch:
            continue
    raise GridMeshMismatch(f"no mesh step <= {h_max:.3g} divides grid spacings {deltas}")


@dataclass(frozen=True)
class MaximaSample:
    """Raw and normalised maxima at one horizon; arrays are (reps, p)."""

    T: float
    mesh_spacing: float
    raw: tuple          # (M(T), M(delta1, T), M(delta2, T))
    normalised: tuple
    norms: tuple        # NormConstants per support and component: [support][k]


def simulate_maxima(cfg: ExperimentConfig, T: float, t_index: int,
                    constants: ResolvedConstants, workers: int | None = None) -> MaximaSample:
    spec = cfg.process.at_horizon(T)
    rho = np.diag(spec.rho())
    h, deltas = mesh_for(cfg, T)
    mesh = SimulationMesh.covering(T, h)
    raw = np.empty((3, cfg.reps, spec.p))
    for k, model in enumerate(spec.components):
        m = support_maxima(model, mesh, deltas, cfg.reps, cfg.seed,
                           (rng.PATHS, t_index, k), workers, horizon=T,
                           bridge=cfg.continuous_proxy == "bridge")
        raw[:, :, k] = m.T
    z = mixing_draws(spec, range(cfg.reps), cfg.seed, (rng.MIXING, t_index))
    raw = np.sqrt(1 - rho) * raw + np.sqrt(rho) * z
    kinds = [CONTINUOUS_KIND] + [classify_grid(g, cfg.alpha) for g in cfg.grids]
    ds = [None] + deltas
    norms = tuple(tuple(norm_constants(T, cfg.alpha, m.c, kind, d, constants.norm)
                        for m in spec.components) for kind, d in zip(kinds, ds))
    normed = np.empty_like(raw)
    for s in range(3):
        for k in range(spec.p):
            normed[s, :, k] = norms[s][k].normalise(raw[s, :, k])
    return MaximaSample(T, h, tuple(raw), tuple(normed), norms)


# ------------------------------------------------------------ empirical CDF

def empirical_cdf_counts(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Number of rows of ``values`` (reps, d) that are <= each point (npts, d)."""
    counts = np.zeros(len(points), dtype=np.int64)
    step = max(1, 4_000_000 // max(1, values.shape[0] * values.shape[1]))
    for s in range(0, len(points), step):
        le = values[None, :, :] <= points[s:s + step, None, :]
        counts[s:s + step] = le.all(axis=2).sum(axis=1)
    return counts


def lattice_cdf_counts(values: np.ndarray, lattice: Sequence[float]) -> np.ndarray:
    """Counts on the full cartesian lattice via a rank histogram, C-ordered."""
    lat = np.asarray(lattice, dtype=float)
    L, d = len(lat), values.shape[1]
    ranks = np.searchsorted(lat, values, side="left")      # value <= lat[i] iff rank <= i
    hist = np.zeros((L + 1,) * d, dtype=np.int64)
    np.add.at(hist, tuple(ranks.T), 1)
    for ax in range(d):
        hist = np.cumsum(hist, axis=ax)
    return hist[(slice(0, L),) * d].reshape(-1)


@dataclass(frozen=True)
class EmpiricalJointCDF:
    points: np.ndarray
    counts: np.ndarray
    reps: int

    @property
    def values(self) -> np.ndarray:
        return self.counts / self.reps

    @property
    def stderr(self) -> np.ndarray:
        f = self.values
        return np.sqrt(f * (1 - f) / self.reps)


# ------------------------------------------------------------ reports

@dataclass
class TResult:
    T: float
    mesh_spacing: float
    empirical: np.ndarray
    theoretical: np.ndarray
    stderr: np.ndarray
    sup_distance: float

    def __eq__(self, other):
        return (isinstance(other, TResult) and self.T == other.T
                and self.mesh_spacing == other.mesh_spacing
                and self.sup_distance == other.sup_distance
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("empirical", "theoretical", "stderr")))


@dataclass
class ComparisonReport:
    config: dict
    config_hash: str
    seed: int
    reps: int
    p: int
    points: np.ndarray
    results: list
    runtimes: dict = field(default_factory=dict, compare=False)

    def __eq__(self, other):
        return (isinstance(other, ComparisonReport) and self.config == other.config
                and self.config_hash == other.config_hash and self.seed == other.seed
                and self.reps == other.reps and self.p == other.p
                and np.array_equal(self.points, other.points) and self.results == other.results)

    @property
    def distances(self) -> list:
        return [r.sup_distance for r in self.results]


def _points(cfg: ExperimentConfig) -> np.ndarray:
    x, y1, y2 = lattice_points(cfg.lattice, cfg.process.p)
    return np.concatenate([x, y1, y2], axis=1)


def _integration(cfg: ExperimentConfig):
    if cfg.integration == "gauss_hermite":
        return GaussHermite(64) if cfg.process.p == 1 else MonteCarlo(200_000, cfg.seed)
    if cfg.integration == "monte_carlo":
        return MonteCarlo(200_000, cfg.seed)
    raise ConfigMismatch(f"unknown integration {cfg.integration!r}")


def theoretical_cdf(cfg: ExperimentConfig, points: np.ndarray,
                    constants: ResolvedConstants) -> np.ndarray:
    p = cfg.process.p
    case = replace(cfg.case, bank=constants.bank) if cfg.case.needs_constants else cfg.case
    params = PiterbargParams.from_cross(cfg.process.cross)
    return eval_G(params, case, points[:, :p], points[:, p:2 * p], points[:, 2 * p:],
                  _integration(cfg))


def run_experiment(cfg: ExperimentConfig, workers: int | None = None,
                   constants: ResolvedConstants | None = None) -> ComparisonReport:
    cfg.validate()
    t0 = time.perf_counter()
    constants = constants or resolve_constants(cfg, workers)
    runtimes = {"constants": time.perf_counter() - t0}
    points = _points(cfg)
    theo = theoretical_cdf(cfg, points, constants)
    results = []
    for i, T in enumerate(cfg.T_values):
        t1 = time.perf_counter()
        sample = simulate_maxima(cfg, T, i, constants, workers)
        vals = np.concatenate(sample.normalised, axis=1)
        counts = lattice_cdf_counts(vals, cfg.lattice)
        emp = EmpiricalJointCDF(points, counts, cfg.reps)
        dist = float(np.max(np.abs(emp.values - theo))) if len(points) else 0.0
        results.append(TResult(float(T), sample.mesh_spacing, emp.values, theo, emp.stderr, dist))
        runtimes[f"T={T!r}"] = time.perf_counter() - t1
    return ComparisonReport(cfg.to_dict(), cfg.digest(), cfg.seed, cfg.reps, cfg.process.p,
                            points, results, runtimes)


def acceptance(cfg: ExperimentConfig, report: ComparisonReport) -> dict:
    """Named predicate -> bool for the thresholds configured in ``cfg``."""
    d = report.distances
    out = {}
    if cfg.max_final_distance is not None:
        out["final_distance"] = d[-1] <= cfg.max_final_distance
    if cfg.require_trend:
        out["trend"] = d[-1] <= d[0]
    return out


@dataclass(frozen=True)
class SweepResult:
    T_values: tuple
    distances: tuple
    threshold: float | None

    @property
    def trend_ok(self) -> bool:
        return self.distances[-1] <= self.distances[0]

    @property
    def passed(self) -> bool:
        ok = self.trend_ok
        return ok and (self.threshold is None or self.distances[-1] <= self.threshold)


def convergence_sweep(cfg: ExperimentConfig, workers: int | None = None,
                      report: ComparisonReport | None = None) -> SweepResult:
    if len(cfg.T_values) < 3:
        raise PreconditionError("a convergence sweep needs at least three horizons")
    report = report or run_experiment(cfg, workers)
    return SweepResult(tuple(cfg.T_values), tuple(report.distances), cfg.max_final_distance)


# ------------------------------------------------------------ dependence checks

def independence_gap(a: np.ndarray, b: np.ndarray, lattice: Sequence[float]) -> float:
    """max over the lattice of |F_ab(s, t) - F_a(s) F_b(t)| from paired samples."""
    lat = np.asarray(lattice, dtype=float)
    if len(lat) == 0:
        return 0.0
    joint = lattice_cdf_counts(np.column_stack([a, b]), lat).reshape(len(lat), len(lat))
    n = len(a)
    fa = (a[:, None] <= lat[None, :]).mean(axis=0)
    fb = (b[:, None] <= lat[None, :]).mean(axis=0)
    return float(np.max(np.abs(joint / n - np.outer(fa, fb))))


def independence_check(cfg: ExperimentConfig, T: float | None = None, component: int = 0,
                       workers: int | None = None,
                       constants: ResolvedConstants | None = None) -> float:
    """Gap between the joint CDF of (sparse-grid max, other-grid max) and the product."""
    if any(m.r_long > 0 for m in cfg.process.components):
        raise PreconditionError("independence check needs weak dependence (all r_kk = 0)")
    kinds = [classify_grid(g, cfg.alpha).tag for g in cfg.grids]
    if kinds[0] != "Sparse" or kinds[1] == "Sparse":
        raise ConfigMismatch("need a sparse first grid and a Pickands or dense second grid")
    T = cfg.T_values[-1] if T is None else T
    constants = constants or resolve_constants(cfg, workers)
    s = simulate_maxima(cfg, T, list(cfg.T_values).index(T) if T in cfg.T_values else 0,
                        constants, workers)
    return independence_gap(s.normalised[1][:, component], s.normalised[2][:, component],
                            cfg.lattice)


def dense_gap_probability(cfg: ExperimentConfig, T: float, threshold: float = 0.25,
                          grid_index: int = 1, component: int = 0,
                          workers: int | None = None,
                          constants: ResolvedConstants | None = None) -> float:
    """Empirical P(a_T |M(delta_dense, T) - M(T)| > threshold)."""
    constants = constants or resolve_constants(cfg, workers)
    i = list(cfg.T_values).index(T) if T in cfg.T_values else 0
    s = simulate_maxima(cfg, T, i, constants, workers)
    a = s.norms[0][component].a
    gap = a * np.abs(s.raw[1 + grid_index][:, component] - s.raw[0][:, component])
    return float(np.mean(gap > threshold))


def mesh_halving_diagnostic(cfg: ExperimentConfig, T: float, reps: int | None = None,
                            component: int = 0, workers: int | None = None) -> float:
    """Mean normalised gain ``a_T (M_{h/2} - M_h)`` from halving the mesh (common paths)."""
    h, _ = mesh_for(cfg, T)
    model = cfg.process.components[component]
    mesh = SimulationMesh.covering(T, h / 2)
    m = support_maxima(model, mesh, [h], reps or cfg.reps, cfg.seed,
                       (rng.PATHS, 99, component), workers, horizon=T)
    return float(math.sqrt(2 * math.log(T)) * np.mean(m[:, 0] - m[:, 1]))


# ------------------------------------------------------------ tail check

@dataclass(frozen=True)
class PointTailRatio:
    ratio: float
    probability: float
    prob_stderr: float
    bound: float
    events: int


def alternating_points(n: int, spacings: Sequence[float] = (1.0, 1.5)) -> np.ndarray:
    steps = np.resize(np.asarray(spacings, dtype=float), n - 1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def tail_check_lemmaA5(model: CorrelationModel, points, u: float, reps: int, seed: int,
                       ) -> PointTailRatio:
    """Empirical P(max over the point set > u) divided by N * Phi_bar(u)."""
    pts = np.sort(np.asarray(points, dtype=float))
    N = len(pts)
    bound = N * norm.sf(u)
    if not 1e-3 < bound < 1e-1:
        raise PreconditionError(f"N * Phi_bar(u) = {bound:.3g} outside (1e-3, 1e-1)")
    if N > 1:
        gap = np.diff(pts).min()
        if gap * (u * u / 2) ** (1 / model.alpha) <= 1:
            raise PreconditionError("point set is not sparse at this level")
    x = sample_points(model, pts, reps, seed)
    events = int(np.sum(x.max(axis=1) > u))
    if events < 50:
        raise InsufficientExceedances(f"only {events} exceedances in {reps} reps")
    p = events / reps
    return PointTailRatio(p / bound, p, math.sqrt(p * (1 - p) / reps), bound, events)


# ------------------------------------------------------------ export

def _fmt(v) -> str:
    return repr(float(v))


def report_to_json(report: ComparisonReport) -> str:
    doc = {
        "config": report.config, "config_hash": report.config_hash, "seed": report.seed,
        "reps": report.reps, "p": report.p, "points": report.points.tolist(),
        "results": [{"T": r.T, "mesh_spacing": r.mesh_spacing, "sup_distance": r.sup_distance,
                     "empirical": r.empirical.tolist(), "theoretical": r.theoretical.tolist(),
                     "stderr": r.stderr.tolist()} for r in report.results],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def report_from_json(text: str) -> ComparisonReport:
    doc = json.loads(text)
    res = [TResult(r["T"], r["mesh_spacing"], np.array(r["empirical"], float),
                   np.array(r["theoretical"], float), np.array(r["stderr"], float),
                   r["sup_distance"]) for r in doc["results"]]
    pts = np.array(doc["points"], float).reshape(-1, 3 * doc["p"])
    return ComparisonReport(doc["config"], doc["config_hash"], doc["seed"], doc["reps"],
                            doc["p"], pts, res)


def report_to_csv(report: ComparisonReport) -> str:
    p = report.p
    lines = [
        f"# config_hash={report.config_hash}",
        f"# seed={report.seed}",
        f"# reps={report.reps}",
        "# config=" + json.dumps(report.config, sort_keys=True, separators=(",", ":")),
    ]
    lines += [f"# mesh T={_fmt(r.T)} spacing={_fmt(r.mesh_spacing)}" for r in report.results]
    cols = (["T", "point_index"] + [f"x{k + 1}" for k in range(p)]
            + [f"y1_{k + 1}" for k in range(p)] + [f"y2_{k + 1}" for k in range(p)]
            + ["empirical", "theoretical", "stderr", "sup_distance"])
    lines.append(",".join(cols))
    for r in report.results:
        for i, pt in enumerate(report.points):
            row = [_fmt(r.T), str(i)] + [_fmt(v) for v in pt]
            row += [_fmt(r.empirical[i]), _fmt(r.theoretical[i]), _fmt(r.stderr[i]),
                    _fmt(r.sup_distance)]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def report_from_csv(text: str) -> ComparisonReport:
    meta, mesh, rows, header = {}, {}, [], None
    for line in text.splitlines():
        if line.startswith("# mesh "):
            t, s = (kv.split("=", 1)[1] for kv in line[7:].split())
            mesh[float(t)] = float(s)
        elif line.startswith("# "):
            k, v = line[2:].split("=", 1)
            meta[k] = v
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    p = (len(header) - 6) // 3
    data = np.array([[float(v) for v in r] for r in rows]) if rows else np.empty((0, len(header)))
    Ts = list(dict.fromkeys(data[:, 0].tolist()))
    results, points = [], np.empty((0, 3 * p))
    for T in Ts:
        block = data[data[:, 0] == T]
        block = block[np.argsort(block[:, 1], kind="stable")]
        points = block[:, 2:2 + 3 * p]
        results.append(TResult(T, mesh[T], block[:, -4], block[:, -3], block[:, -2],
                               float(block[0, -1])))
    return ComparisonReport(json.loads(meta["config"]), meta["config_hash"], int(meta["seed"]),
                            int(meta["reps"]), p, points, results)


def export_report(report: ComparisonReport, fmt: str, path) -> None:
    text = {"json": report_to_json, "csv": report_to_csv}[fmt](report)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def load_report(path) -> ComparisonReport:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return report_from_json(text)
    return report_from_csv(text)
