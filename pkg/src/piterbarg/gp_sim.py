"""Exact simulation of stationary Gaussian processes on uniform meshes.

The short-range kernel is ``exp(-C |t|^alpha)``. Paths are drawn by circulant
embedding of the lag-covariance sequence (real-FFT variant, one real normal
per embedding coordinate). Strong dependence is realised by a random-effect
construction: each component is ``sqrt(1 - rho) * eta + sqrt(rho) * Z`` with
``rho = r / ln T`` and a Gaussian vector ``Z`` shared across time.

For ``alpha == 1`` the kernel is the Ornstein-Uhlenbeck correlation, which is
Markov; :func:`support_maxima` then runs an exact AR(1) recursion on an
arbitrary sorted point set, so grids need not be aligned with the mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numba
import numpy as np
import scipy.fft

from . import rng
from .errors import GridMeshMismatch, InvalidHorizon, NonEmbeddable, NonPSD

TOL_EIG_FACTOR = 1e-10
MAX_DOUBLINGS = 6
GRID_RTOL = 1e-9


@dataclass(frozen=True)
class CorrelationModel:
    alpha: float
    c: float = 1.0
    r_long: float = 0.0
    family: str = "exp_power"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.c > 0.0 or not math.isfinite(self.c):
            raise ValueError(f"local scale C must be positive, got {self.c}")
        if not 0.0 <= self.r_long < math.inf:
            raise ValueError(f"r_long must be finite and >= 0, got {self.r_long}")
        if self.family != "exp_power":
            raise ValueError(f"unsupported kernel family {self.family!r}")

    def kernel(self, t):
        return np.exp(-self.c * np.abs(np.asarray(t, dtype=float)) ** self.alpha)


@dataclass(frozen=True)
class MixingVector:
    """Covariance of the random-effect vector ``Z``."""

    cov: np.ndarray = field(repr=False)

    @classmethod
    def from_cross(cls, cross) -> "MixingVector":
        r = np.asarray(cross, dtype=float)
        d = np.diag(r)
        denom = np.sqrt(np.outer(d, d))
        cov = np.divide(r, denom, out=np.zeros_like(r), where=denom > 0)
        np.fill_diagonal(cov, 1.0)
        w = np.linalg.eigvalsh(cov)
        if w.min() < -1e-12:
            raise NonPSD(f"mixing covariance has eigenvalue {w.min():.3g}")
        cov.setflags(write=False)
        return cls(cov)

    def sqrt(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class VectorProcessSpec:
    components: tuple
    cross: tuple
    horizon_T: float

    def __post_init__(self):
        comps = tuple(self.components)
        r = np.asarray(self.cross, dtype=float)
        p = len(comps)
        if p < 1:
            raise ValueError("need at least one component")
        if r.shape != (p, p):
            raise ValueError(f"cross must be {p}x{p}, got {r.shape}")
        if not np.allclose(r, r.T, rtol=0, atol=1e-12):
            raise ValueError("cross-dependence matrix must be symmetric")
        if np.any(r < 0):
            raise ValueError("cross-dependence entries must be >= 0")
        if not np.allclose(np.diag(r), [m.r_long for m in comps], rtol=0, atol=1e-12):
            raise ValueError("diagonal of cross must equal each component's r_long")
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be positive")
        MixingVector.from_cross(r)
        if p > 1 and self.horizon_T > 1:
            off = r[~np.eye(p, dtype=bool)]
            if off.max() / math.log(self.horizon_T) >= 1:
                raise InvalidHorizon("induced cross-correlation r_kl / ln T reaches 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "cross", tuple(tuple(map(float, row)) for row in r))

    @classmethod
    def independent(cls, model: CorrelationModel, p: int, horizon_T: float):
        comps = tuple(replace(model, r_long=0.0) for _ in range(p))
        return cls(comps, np.zeros((p, p)), horizon_T)

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def cross_matrix(self) -> np.ndarray:
        return np.array(self.cross)

    @property
    def mixing(self) -> MixingVector:
        return MixingVector.from_cross(self.cross)

    def at_horizon(self, T: float) -> "VectorProcessSpec":
        return replace(self, horizon_T=float(T))

    def rho(self) -> np.ndarray:
        """Matrix ``r_kl / ln T`` at the current horizon."""
        lnT = math.log(self.horizon_T)
        r = self.cross_matrix
        if lnT <= np.diag(r).max(initial=0.0):
            raise InvalidHorizon(
                f"ln T = {lnT:.4g} must exceed max r_kk = {np.diag(r).max():.4g}")
        return r / lnT


@dataclass(frozen=True)
class SimulationMesh:
    spacing: float
    n_points: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("mesh spacing must be positive")
        if self.n_points < 1:
            raise ValueError("mesh needs at least one point")

    @classmethod
    def covering(cls, horizon: float, spacing: float) -> "SimulationMesh":
        n = int(math.ceil(horizon / spacing - GRID_RTOL)) + 1
        return cls(float(spacing), max(n, 2))

    @property
    def horizon(self) -> float:
        return (self.n_points - 1) * self.spacing

    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing


@dataclass(frozen=True)
class SeedRecord:
    root: int
    stream: tuple
    reps: int

    def spawn_key(self, rep: int) -> tuple:
        return (*self.stream, rep)


@dataclass(frozen=True)
class PathBatch:
    values: np.ndarray = field(repr=False)
    mesh: SimulationMesh
    seed_record: SeedRecord

    @property
    def reps(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------- embedding

def covariance_sequence(model: CorrelationModel, mesh: SimulationMesh) -> np.ndarray:
    return model.kernel(np.arange(mesh.n_points) * mesh.spacing)


def _circulant_row(cov: np.ndarray, m: int, kernel=None) -> np.ndarray:
    n = len(cov)
    half = m // 2
    lags = np.zeros(half + 1)
    k = min(n, half + 1)
    lags[:k] = cov[:k]
    if kernel is not None and half + 1 > n:
        lags[n:] = kernel(np.arange(n, half + 1))
    return np.concatenate([lags, lags[1:half][::-1]])


def circulant_embed(cov, kernel=None, tol_factor: float = TOL_EIG_FACTOR,
                    max_doublings: int = MAX_DOUBLINGS) -> np.ndarray:
    """Eigenvalues of a nonnegative-definite circulant extension of ``cov``.

    Starts from the minimal extension of length ``2 (n - 1)`` and doubles up to
    ``max_doublings`` times. Extra lags come from ``kernel(lag_index)`` when
    given, otherwise they are zero. Eigenvalues within ``tol_factor * m`` below
    zero are clipped to zero.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 1 or len(cov) == 0:
        raise ValueError("cov must be a non-empty vector")
    if len(cov) == 1:
        return cov.copy()
    m = 2 * (len(cov) - 1)
    worst = None
    for _ in range(max_doublings + 1):
        eig = scipy.fft.rfft(_circulant_row(cov, m, kernel)).real
        tol = tol_factor * m
        if eig.min() >= -tol:
            eig = np.clip(eig, 0.0, None)
            return np.concatenate([eig, eig[1:m // 2][::-1]])
        worst = eig.min()
        m *= 2
    raise NonEmbeddable(
        f"minimum eigenvalue {worst:.3g} below tolerance at embedding size {m // 2}")


@lru_cache(maxsize=32)
def _embedding(model: CorrelationModel, spacing: float, n: int) -> np.ndarray:
    mesh = SimulationMesh(spacing, n)
    eig = circulant_embed(covariance_sequence(model, mesh),
                          kernel=lambda k: model.kernel(k * spacing))
    return _sqrt_weights(eig)


def _fgn_cov(hurst: float, spacing: float):
    def kern(k):
        k = np.abs(np.asarray(k, dtype=float))
        return 0.5 * spacing ** (2 * hurst) * (
            np.abs(k + 1) ** (2 * hurst) - 2 * k ** (2 * hurst) + np.abs(k - 1) ** (2 * hurst))
    return kern


@lru_cache(maxsize=32)
def _fgn_embedding(hurst: float, spacing: float, n_inc: int) -> np.ndarray:
    kern = _fgn_cov(hurst, spacing)
    return _sqrt_weights(circulant_embed(kern(np.arange(n_inc)), kernel=kern))


def _sqrt_weights(eig: np.ndarray) -> np.ndarray:
    """Per-coordinate scales for the real-FFT sampler (see :func:`_circulant_rows`)."""
    m = len(eig)
    if m == 1:
        return np.sqrt(eig)
    half = m // 2
    s = np.empty(half + 1)
    s[0] = math.sqrt(eig[0])
    s[half] = math.sqrt(eig[half])
    s[1:half] = np.sqrt(eig[1:half] / 2.0)
    s.setflags(write=False)
    return s


def _circulant_rows(weights: np.ndarray, n: int, z: np.ndarray) -> np.ndarray:
    """Map rows of ``m`` standard normals to rows of ``n`` correlated values."""
    m = z.shape[1]
    if m == 1:
        return z * weights[0]
    half = m // 2
    w = np.empty((z.shape[0], half + 1), dtype=complex)
    w[:, 0] = weights[0] * z[:, 0]
    w[:, half] = weights[half] * z[:, 1]
    w[:, 1:half] = weights[1:half] * (z[:, 2:half + 1] + 1j * z[:, half + 1:])
    x = scipy.fft.irfft(w, n=m, axis=-1)[:, :n]
    x *= math.sqrt(m)
    return x


def _embedding_size(weights: np.ndarray) -> int:
    return 1 if len(weights) == 1 else 2 * (len(weights) - 1)


def scalar_rows(model: CorrelationModel, mesh: SimulationMesh, reps: Sequence[int],
                seed: int, stream: tuple = (rng.PATHS, 0)) -> np.ndarray:
    """Paths for the given replication indices, one row each."""
    weights = _embedding(model, mesh.spacing, mesh.n_points)
    z = rng.rep_normals(seed, reps, _embedding_size(weights), *stream)
    return _circulant_rows(weights, mesh.n_points, z)


def fbm_rows(hurst: float, mesh: SimulationMesh, reps: Sequence[int], seed: int,
             stream: tuple = (rng.PATHS, 0)) -> np.ndarray:
    """Fractional Brownian motion rows on the mesh, anchored at ``B(0) = 0``."""
    if not 0.0 < hurst <= 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1], got {hurst}")
    n = mesh.n_points
    out = np.zeros((len(reps), n))
    if n == 1 or len(reps) == 0:
        return out
    if hurst == 1.0:
        z = rng.rep_normals(seed, reps, 1, *stream)
        return z * mesh.times()
    weights = _fgn_embedding(float(hurst), mesh.spacing, n - 1)
    z = rng.rep_normals(seed, reps, _embedding_size(weights), *stream)
    np.cumsum(_circulant_rows(weights, n - 1, z), axis=1, out=out[:, 1:])
    return out


def _batch(rows_fn, reps: int, chunk: int, workers) -> np.ndarray:
    parts = rng.chunked_map(rows_fn, reps, chunk, workers)
    return np.concatenate(parts, axis=0) if parts else None


def _chunk_for(n: int) -> int:
    return max(1, min(256, 2_000_000 // max(n, 1)))


def sample_scalar_paths(model: CorrelationModel, mesh: SimulationMesh, reps: int,
                        seed: int, workers: int | None = None) -> PathBatch:
    stream = (rng.PATHS, 0)
    record = SeedRecord(int(seed), stream, int(reps))
    if reps == 0:
        return PathBatch(np.empty((0, 1, mesh.n_points)), mesh, record)
    _embedding(model, mesh.spacing, mesh.n_points)  # surface NonEmbeddable early
    vals = _batch(lambda r: scalar_rows(model, mesh, r, seed, stream),
                  reps, _chunk_for(mesh.n_points), workers)
    return PathBatch(vals[:, None, :], mesh, record)


def vector_parts(spec: VectorProcessSpec, mesh: SimulationMesh, reps: int, seed: int,
                 workers: int | None = None):
    """Independent short-range paths ``eta`` (reps, p, n) and mixing draws ``Z`` (reps, p)."""
    rho = spec.rho()
    eta = np.empty((reps, spec.p, mesh.n_points))
    for k, model in enumerate(spec.components):
        short = replace(model, r_long=0.0)
        if reps:
            eta[:, k] = _batch(lambda r: scalar_rows(short, mesh, r, seed, (rng.PATHS, k)),
                               reps, _chunk_for(mesh.n_points), workers)
    z = mixing_draws(spec, range(reps), seed)
    return eta, z, rho


def mixing_draws(spec: VectorProcessSpec, reps: Sequence[int], seed: int,
                 stream: tuple = (rng.MIXING,)) -> np.ndarray:
    root = spec.mixing.sqrt()
    g = rng.rep_normals(seed, reps, spec.p, *stream)
    return g @ root.T


def sample_vector_paths(spec: VectorProcessSpec, mesh: SimulationMesh, reps: int,
                        seed: int, workers: int | None = None) -> PathBatch:
    eta, z, rho = vector_parts(spec, mesh, reps, seed, workers)
    d = np.diag(rho)
    vals = np.sqrt(1.0 - d)[None, :, None] * eta + (np.sqrt(d) * z)[:, :, None]
    return PathBatch(vals, mesh, SeedRecord(int(seed), (rng.PATHS,), int(reps)))


def sample_fbm(hurst: float, mesh: SimulationMesh, reps: int, seed: int,
               workers: int | None = None) -> PathBatch:
    stream = (rng.FIELD, 0)
    record = SeedRecord(int(seed), stream, int(reps))
    if reps == 0:
        return PathBatch(np.empty((0, 1, mesh.n_points)), mesh, record)
    vals = _batch(lambda r: fbm_rows(hurst, mesh, r, seed, stream),
                  reps, _chunk_for(mesh.n_points), workers)
    return PathBatch(vals[:, None, :], mesh, record)


def grid_stride(spacing: float, mesh_spacing: float, rtol: float = GRID_RTOL) -> int:
    ratio = spacing / mesh_spacing
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > rtol * max(ratio, 1.0):
        raise GridMeshMismatch(
            f"grid spacing {spacing!r} is not a multiple of mesh spacing {mesh_spacing!r}")
    return k


def subsample_grid(batch, spacing: float) -> np.ndarray:
    """Mesh indices of the grid ``{k * spacing}`` inside the mesh horizon."""
    mesh = batch.mesh if isinstance(batch, PathBatch) else batch
    return np.arange(0, mesh.n_points, grid_stride(spacing, mesh.spacing))


def sample_points(model: CorrelationModel, times, reps: int, seed: int,
                  stream: tuple = (rng.POINTS, 0)) -> np.ndarray:
    """Exact draws at an arbitrary (small) point set via Cholesky."""
    t = np.asarray(times, dtype=float)
    cov = model.kernel(t[:, None] - t[None, :])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        if w.min() < -1e-10:
            raise NonPSD(f"point covariance has eigenvalue {w.min():.3g}")
        chol = v * np.sqrt(np.clip(w, 0, None))
    z = rng.rep_normals(seed, range(reps), len(t), *stream)
    return z @ chol.T


def dump_paths_csv(batch: PathBatch, path) -> None:
    """Rows are mesh times, columns ``rep<i>_k<j>``."""
    reps, p, n = batch.values.shape
    header = ["t"] + [f"rep{i}_k{j}" for i in range(reps) for j in range(p)]
    cols = batch.values.reshape(reps * p, n).T
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t, row in zip(batch.mesh.times(), cols):
            fh.write(",".join([repr(float(t))] + [repr(float(v)) for v in row]) + "\n")


# ------------------------------------------------------- support maxima

@numba.njit(nogil=True, cache=True)
def _ar1_maxima(z, phi, sig, bits, nsup, out):
    reps, n = z.shape
    for r in range(reps):
        for s in range(nsup):
            out[r, s] = -np.inf
        x = z[r, 0]
        for i in range(n):
            if i > 0:
                x = phi[i] * x + sig[i] * z[r, i]
            b = bits[i]
            for s in range(nsup):
                if (b >> s) & 1 and x > out[r, s]:
                    out[r, s] = x


@dataclass(frozen=True)
class PointSet:
    """Sorted union of a uniform mesh and extra grid points with membership bits."""

    times: np.ndarray = field(repr=False)
    bits: np.ndarray = field(repr=False)
    n_supports: int


def merged_points(mesh: SimulationMesh, grid_spacings: Sequence[float],
                  horizon: float | None = None) -> PointSet:
    """Bit 0 marks mesh points; bit ``i + 1`` marks points of grid ``i``."""
    horizon = mesh.horizon if horizon is None else horizon
    h = mesh.spacing
    base = mesh.times()
    base_bits = np.ones(mesh.n_points, dtype=np.uint8)
    extra_t, extra_b = [], []
    for i, d in enumerate(grid_spacings):
        pts = np.arange(int(math.floor(horizon / d + GRID_RTOL)) + 1) * d
        idx = np.rint(pts / h).astype(np.int64)
        on_mesh = (np.abs(pts / h - idx) <= 1e-7) & (idx < mesh.n_points)
        base_bits[idx[on_mesh]] |= np.uint8(1 << (i + 1))
        off = pts[~on_mesh]
        extra_t.append(off)
        extra_b.append(np.full(len(off), 1 << (i + 1), dtype=np.uint8))
    if extra_t and sum(len(e) for e in extra_t):
        t = np.concatenate([base] + extra_t)
        b = np.concatenate([base_bits] + extra_b)
        order = np.argsort(t, kind="stable")
        t, b = t[order], b[order]
        # coincident extra points from different grids share one node
        dup = np.flatnonzero(np.diff(t) <= 1e-12 * max(horizon, 1.0))
        if len(dup):
            keep = np.ones(len(t), dtype=bool)
            for j in dup[::-1]:
                b[j] |= b[j + 1]
                keep[j + 1] = False
            t, b = t[keep], b[keep]
    else:
        t, b = base, base_bits
    return PointSet(t, b, 1 + len(grid_spacings))


@numba.njit(nogil=True, cache=True)
def _bridge_candidates(z, phi, sig, level, cut):
    """Endpoints of intervals whose bridge could top ``level`` with non-negligible odds."""
    n = z.shape[0]
    count = 0
    x = z[0]
    for i in range(1, n):
        y = phi[i] * x + sig[i] * z[i]
        if (level - x) * (level - y) < cut[i]:
            count += 1
        x = y
    xa = np.empty(count)
    xb = np.empty(count)
    idx = np.empty(count, dtype=np.int64)
    k = 0
    x = z[0]
    for i in range(1, n):
        y = phi[i] * x + sig[i] * z[i]
        if (level - x) * (level - y) < cut[i]:
            xa[k] = x
            xb[k] = y
            idx[k] = i
            k += 1
        x = y
    return xa, xb, idx


BRIDGE_CUT = 40.0


def markov_support_maxima(model: CorrelationModel, points: PointSet, reps: Sequence[int],
                          seed: int, stream: tuple, bridge: bool = False) -> np.ndarray:
    """Maxima of the exact AR(1) skeleton; with ``bridge`` column 0 is the continuous max.

    Between nodes the process is replaced by a Brownian bridge with the local
    diffusion ``2c``, whose maximum has a closed-form inverse CDF. Intervals
    where exceeding the node maximum has probability below ``exp(-40)`` are skipped.
    """
    if model.alpha != 1.0:
        raise ValueError("the Markov sampler needs alpha == 1")
    dt = np.diff(points.times, prepend=points.times[0])
    phi = np.exp(-model.c * dt)
    sig = np.sqrt(-np.expm1(-2.0 * model.c * dt))
    n = len(points.times)
    out = np.empty((len(reps), points.n_supports))
    if not bridge:
        z = rng.rep_normals(seed, reps, n, *stream)
        _ar1_maxima(z, phi, sig, points.bits, points.n_supports, out)
        return out
    ch = model.c * dt
    cut = BRIDGE_CUT * ch
    z = np.empty((1, n))
    for j, rep in enumerate(reps):
        g = rng.rep_generator(seed, rep, *stream)
        g.standard_normal(n, out=z[0])
        _ar1_maxima(z, phi, sig, points.bits, points.n_supports, out[j:j + 1])
        node_max = out[j].max()
        xa, xb, idx = _bridge_candidates(z[0], phi, sig, node_max, cut)
        e = g.standard_exponential(len(xa))
        if len(xa):
            m = 0.5 * (xa + xb + np.sqrt((xa - xb) ** 2 + 4.0 * ch[idx] * e))
            out[j, 0] = max(node_max, m.max())
        else:
            out[j, 0] = node_max
    return out


def support_maxima(model: CorrelationModel, mesh: SimulationMesh,
                   grid_spacings: Sequence[float], reps: int, seed: int,
                   stream: tuple = (rng.PATHS, 0), workers: int | None = None,
                   horizon: float | None = None, bridge: bool = False) -> np.ndarray:
    """Per-replication maxima over the mesh and over each grid in ``[0, horizon]``.

    Columns: continuous-time proxy, then one column per grid spacing. The
    ``alpha == 1`` case uses the exact Markov recursion (grids may be off-mesh)
    and, with ``bridge``, Brownian-bridge maxima between nodes so the first
    column is the continuous maximum up to O(h). Otherwise the first column is
    the mesh maximum and every grid must be a multiple of the mesh spacing.
    """
    short = replace(model, r_long=0.0)
    if short.alpha == 1.0:
        pts = merged_points(mesh, grid_spacings, horizon)
        chunk = max(1, min(64, 8_000_000 // len(pts.times)))
        fn = lambda r: markov_support_maxima(short, pts, r, seed, stream, bridge)
    else:
        strides = [grid_stride(d, mesh.spacing) for d in grid_spacings]
        chunk = max(1, min(64, 4_000_000 // mesh.n_points))

        def fn(r):
            x = scalar_rows(short, mesh, r, seed, stream)
            cols = [x.max(axis=1)] + [x[:, ::s].max(axis=1) for s in strides]
            return np.stack(cols, axis=1)
    if reps == 0:
        return np.empty((0, 1 + len(grid_spacings)))
    return np.concatenate(rng.chunked_map(fn, reps, chunk, workers), axis=0)
