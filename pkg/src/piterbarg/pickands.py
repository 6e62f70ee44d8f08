"""Monte Carlo estimation of Pickands-type constants.

All constants here have the form

    H = lim_{lam -> inf} lam^{-1} E exp(min_i (M_i - o_i))

where ``M_i`` is the maximum of ``B*(t) = sqrt(2) B_{alpha/2}(t) - |t|^alpha`` over
a support (the whole mesh as a stand-in for continuous time, or a grid ``{kD}``)
and ``o_i`` are offsets. The integral over the level ``s`` of the joint
exceedance probability is done analytically, which leaves one expectation.

Two estimators of that expectation are provided.

``method="direct"`` averages ``exp(min_i(M_i - o_i)) / lam`` over one-sided paths
on ``[0, lam]``. Its summand has a tail ``P(. > v) ~ 1/v`` up to ``v ~ e^lam``,
so at moderate replication counts the sample mean sits far below the target.

``method="stationary"`` (default) uses two-sided paths on ``[-lam/2, lam/2]``
and weights each path by ``1 / (L sum_k exp(B*(kL)))``, where ``L`` is a lattice
step under which every support of the batch is shift invariant. The weighted
summand is bounded, the estimator targets the same limit, and all estimators
computed from one batch share the weights. Per-path identities (dominance,
offset saturation, common shifts) therefore carry over to batch estimates
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from . import rng
from .errors import (EqualSpacings, GridMeshMismatch, InsufficientExceedances,
                     PreconditionError)
from .gp_sim import (CorrelationModel, SimulationMesh, fbm_rows, grid_stride,
                     support_maxima)

MAX_MESH = 0.01
MIN_EVENTS = 50


@dataclass(frozen=True)
class Continuous:
    def __str__(self):
        return "continuous"


@dataclass(frozen=True)
class Grid:
    D: float

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError("grid spacing D must be positive")

    def __str__(self):
        return f"grid({self.D!r})"


CONTINUOUS = Continuous()


def default_mesh(*spacings: float) -> float:
    """min(D)/32, refined so it is at most MAX_MESH; every D must be a multiple."""
    if not spacings:
        return MAX_MESH
    dmin = min(spacings)
    h = dmin / 32
    if h > MAX_MESH:
        h = dmin / math.ceil(dmin / MAX_MESH)
    for d in spacings:
        grid_stride(d, h)
    return h


@dataclass(frozen=True)
class FieldMaxima:
    """Per-path maxima of ``B*`` over several supports, drawn on common paths."""

    alpha: float
    lam: float
    mesh_spacing: float
    supports: tuple
    method: str
    lattice: float
    seed: int
    maxima: np.ndarray = field(repr=False)
    log_weight: np.ndarray = field(repr=False)
    maxima_half: np.ndarray = field(repr=False)
    log_weight_half: np.ndarray = field(repr=False)

    @property
    def reps(self) -> int:
        return self.maxima.shape[0]

    def column(self, support) -> int:
        try:
            return self.supports.index(support)
        except ValueError:
            raise KeyError(f"support {support} not simulated in this batch") from None

    def summands(self, offsets: dict, half: bool = False) -> np.ndarray:
        """Per-path ``exp(min_i (M_i - o_i)) * weight`` for the given support offsets."""
        mx = self.maxima_half if half else self.maxima
        lw = self.log_weight_half if half else self.log_weight
        cols = [mx[:, self.column(s)] - float(o) for s, o in offsets.items()]
        return np.exp(reduce(np.minimum, cols) + lw)

    def evaluate(self, offsets: dict) -> float:
        """Batch mean only; vectorised use inside limit-law formulas."""
        return float(np.mean(self.summands(offsets)))


def _lcm(values: Sequence[int]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


def _field_chunk(hurst, mesh, reps, seed, alpha, strides, lat, centre, n_half, method):
    b = fbm_rows(hurst, mesh, reps, seed, (rng.FIELD, 0))
    n = mesh.n_points
    t = mesh.times()
    if method == "stationary":
        b -= b[:, centre:centre + 1]
        b *= math.sqrt(2.0)
        b -= np.abs(t - t[centre]) ** alpha
        starts = [centre % s if s else 0 for s in strides]
    else:
        b *= math.sqrt(2.0)
        b -= t ** alpha
        starts = [0] * len(strides)

    def reduce_window(x, offset):
        cols = []
        for st, s in zip(starts, strides):
            cols.append(x[:, (st - offset) % s::s].max(axis=1) if s else x.max(axis=1))
        return np.stack(cols, axis=1)

    full = reduce_window(b, 0)
    if method == "stationary":
        lo, hi = centre - n_half, centre + n_half + 1
        half = reduce_window(b[:, lo:hi], lo)
        s0 = centre % lat
        lw = -(logsumexp(b[:, s0::lat], axis=1) + math.log(lat * mesh.spacing))
        h0 = (centre - lo) % lat
        lwh = -(logsumexp(b[:, lo:hi][:, h0::lat], axis=1) + math.log(lat * mesh.spacing))
    else:
        half = reduce_window(b[:, :n // 2 + 1], 0)
        lam = (n - 1) * mesh.spacing
        lw = np.full(len(reps), -math.log(lam))
        lwh = np.full(len(reps), -math.log((n // 2) * mesh.spacing))
    return np.concatenate([full, lw[:, None], half, lwh[:, None]], axis=1)


def field_maxima(alpha: float, lam: float, mesh: float | None, supports: Sequence,
                 reps: int, seed: int, method: str = "stationary",
                 workers: int | None = None) -> FieldMaxima:
    """Simulate ``B*`` and record maxima over every support on common paths.

    Every support contains the anchor point ``t = 0`` (the window centre for the
    stationary method), so every maximum is >= 0.
    """
    if method not in ("stationary", "direct"):
        raise ValueError(f"unknown method {method!r}")
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    supports = tuple(supports)
    grids = [s.D for s in supports if isinstance(s, Grid)]
    h = default_mesh(*grids) if mesh is None else float(mesh)
    strides = [grid_stride(s.D, h) if isinstance(s, Grid) else 0 for s in supports]
    n_steps = int(round(lam / h))
    if abs(n_steps * h - lam) > 1e-9 * max(lam, h):
        raise GridMeshMismatch(f"lambda {lam!r} is not a multiple of mesh spacing {h!r}")
    smesh = SimulationMesh(h, n_steps + 1)
    lat = _lcm([s for s in strides if s]) if method == "stationary" else 1
    centre = n_steps // 2 if method == "stationary" else 0
    n_half = n_steps // 4
    k = len(supports)
    chunk = max(1, min(512, 4_000_000 // smesh.n_points))

    def work(r):
        return _field_chunk(alpha / 2.0, smesh, r, seed, alpha, strides, lat, centre,
                            n_half, method)

    if reps:
        data = np.concatenate(rng.chunked_map(work, reps, chunk, workers), axis=0)
    else:
        data = np.empty((0, 2 * k + 2))
    return FieldMaxima(alpha, float(lam), h, supports, method, lat * h, int(seed),
                       data[:, :k], data[:, k], data[:, k + 1:2 * k + 1], data[:, 2 * k + 1])


@dataclass(frozen=True)
class ConstantEstimate:
    kind: str
    alpha: float
    value: float
    stderr: float
    lam: float
    mesh_spacing: float
    reps: int
    args: tuple = ()
    value_half: float = math.nan
    low_confidence: bool = False
    method: str = "stationary"

    def arg(self, name: str):
        return dict(self.args).get(name)

    @property
    def lambda_drift(self) -> float:
        """Value at lam minus value at lam/2; a large gap flags unconverged lam."""
        return self.value - self.value_half

    @property
    def extrapolated(self) -> float:
        """Linear-in-1/lam extrapolation from (lam/2, lam); diagnostic only."""
        return 2.0 * self.value - self.value_half


CSV_COLUMNS = ("kind", "alpha", "D1", "D2", "x", "z1", "z2", "lambda", "mesh", "reps",
               "value", "stderr")


def estimate_row(est: ConstantEstimate) -> list:
    a = dict(est.args)
    d1 = a.get("D1", a.get("D"))
    z1 = a.get("z1", a.get("y"))

    def fmt(v):
        return "" if v is None else repr(float(v))
    return [est.kind, fmt(est.alpha), fmt(d1), fmt(a.get("D2")), fmt(a.get("x")), fmt(z1),
            fmt(a.get("z2")), fmt(est.lam), fmt(est.mesh_spacing), str(est.reps),
            fmt(est.value), fmt(est.stderr)]


def write_estimates_csv(estimates: Sequence[ConstantEstimate], fh) -> None:
    fh.write(",".join(CSV_COLUMNS) + "\n")
    for est in estimates:
        fh.write(",".join(estimate_row(est)) + "\n")


def _summarise(batch: FieldMaxima, offsets: dict, kind: str, args: dict) -> ConstantEstimate:
    vals = batch.summands(offsets)
    n = len(vals)
    value = math.fsum(vals) / n
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    half = math.fsum(batch.summands(offsets, half=True)) / n
    return ConstantEstimate(kind, batch.alpha, value, stderr, batch.lam, batch.mesh_spacing,
                            n, tuple(args.items()), half, n < 2, batch.method)


def _batch_for(batch, supports, alpha, lam, mesh, reps, seed, method, workers):
    if batch is None:
        return field_maxima(alpha, lam, mesh, supports, reps, seed, method, workers)
    for s in supports:
        batch.column(s)
    return batch


def estimate_H_alpha(alpha: float, lam: float, mesh: float | None, reps: int, seed: int,
                     *, batch: FieldMaxima | None = None, method: str = "stationary",
                     workers: int | None = None) -> ConstantEstimate:
    b = _batch_for(batch, [CONTINUOUS], alpha, lam, mesh, reps, seed, method, workers)
    return _summarise(b, {CONTINUOUS: 0.0}, "H", {})


def estimate_H_D(alpha: float, D: float, lam: float, reps: int, seed: int, *,
                 mesh: float | None = None, batch: FieldMaxima | None = None,
                 method: str = "stationary", workers: int | None = None) -> ConstantEstimate:
    # the grid alone needs no finer mesh than D itself
    mesh = D if mesh is None and batch is None else mesh
    g = Grid(D)
    b = _batch_for(batch, [g], alpha, lam, mesh, reps, seed, method, workers)
    return _summarise(b, {g: 0.0}, "H_D", {"D": D})


def estimate_H_xy(alpha: float, D: float, x: float, y: float, lam: float,
                  mesh: float | None, reps: int, seed: int, *,
                  batch: FieldMaxima | None = None, method: str = "stationary",
                  workers: int | None = None) -> ConstantEstimate:
    g = Grid(D)
    b = _batch_for(batch, [CONTINUOUS, g], alpha, lam, mesh, reps, seed, method, workers)
    return _summarise(b, {CONTINUOUS: x, g: y}, "H_xy", {"D": D, "x": x, "y": y})


def _check_pair(D1, D2):
    if D1 == D2:
        raise EqualSpacings("the two Pickands grids must have different spacings")


def estimate_H_D1D2(alpha: float, D1: float, D2: float, z1: float, z2: float, lam: float,
                    mesh: float | None, reps: int, seed: int, *,
                    batch: FieldMaxima | None = None, method: str = "stationary",
                    workers: int | None = None) -> ConstantEstimate:
    _check_pair(D1, D2)
    g1, g2 = Grid(D1), Grid(D2)
    b = _batch_for(batch, [g1, g2], alpha, lam, mesh, reps, seed, method, workers)
    return _summarise(b, {g1: z1, g2: z2}, "H_D1D2", {"D1": D1, "D2": D2, "z1": z1, "z2": z2})


def estimate_H_x_z1z2(alpha: float, D1: float, D2: float, x: float, z1: float, z2: float,
                      lam: float, mesh: float | None, reps: int, seed: int, *,
                      batch: FieldMaxima | None = None, method: str = "stationary",
                      workers: int | None = None) -> ConstantEstimate:
    _check_pair(D1, D2)
    g1, g2 = Grid(D1), Grid(D2)
    b = _batch_for(batch, [CONTINUOUS, g1, g2], alpha, lam, mesh, reps, seed, method, workers)
    return _summarise(b, {CONTINUOUS: x, g1: z1, g2: z2}, "H_x_z1z2",
                      {"D1": D1, "D2": D2, "x": x, "z1": z1, "z2": z2})


# ----------------------------------------------------------- tail checks

@dataclass(frozen=True)
class TailRatio:
    ratio: float
    probability: float
    prob_stderr: float
    expected: float
    events: int
    constant: float


def tail_expected(S: float, H: float, u: float, alpha: float, c: float = 1.0) -> float:
    return S * c ** (1.0 / alpha) * H * u ** (2.0 / alpha) * norm.sf(u)


def horizon_for_probability(target: float, H: float, u: float, alpha: float,
                            c: float = 1.0) -> float:
    return target / tail_expected(1.0, H, u, alpha, c)


def tail_prob_check(alpha: float, D1: float, D2: float, x: float, S: float, u: float,
                    mesh: float | None, reps: int, seed: int, *, c: float = 1.0,
                    H: float | ConstantEstimate | None = None,
                    estimation: dict | None = None, workers: int | None = None) -> TailRatio:
    """Empirical two-grid exceedance probability against its asymptotic form.

    Grids have spacings ``D_i u^{-2/alpha}`` (in the local time scale of the kernel);
    the event is ``max over grid 1 > u`` and ``max over grid 2 > u + x/u``.
    """
    if H is None:
        est = dict(lam=32.0, mesh=None, reps=4000, seed=seed + 1)
        est.update(estimation or {})
        H = estimate_H_D1D2(alpha, D1, D2, 0.0, x, est["lam"], est["mesh"], est["reps"],
                            est["seed"], workers=workers)
    Hval = H.value if isinstance(H, ConstantEstimate) else float(H)
    expected = tail_expected(S, Hval, u, alpha, c)
    if not 1e-3 < expected < 1e-1:
        raise PreconditionError(f"asymptotic probability {expected:.3g} outside (1e-3, 1e-1)")
    scale = c ** (-1.0 / alpha) * u ** (-2.0 / alpha)
    d1, d2 = D1 * scale, D2 * scale
    h = min(d1, d2) if mesh is None else mesh
    model = CorrelationModel(alpha, c)
    smesh = SimulationMesh.covering(S, h)
    mx = support_maxima(model, smesh, [d1, d2], reps, seed, (rng.PATHS, 7), workers, horizon=S)
    hit = (mx[:, 1] > u) & (mx[:, 2] > u + x / u)
    events = int(hit.sum())
    if events < MIN_EVENTS:
        raise InsufficientExceedances(f"only {events} joint exceedances in {reps} reps")
    p = events / reps
    se = math.sqrt(p * (1 - p) / reps)
    return TailRatio(p / expected, p, se, expected, events, Hval)
