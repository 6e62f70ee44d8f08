"""Closed-form side: grid classes, normalising constants, limit distributions.

The joint limit of normalised maxima over continuous time and two grids is

    G(x, y1, y2) = E exp(-sum_k f(x_k, y_k1, y_k2) exp(-r_kk + sqrt(2 r_kk) Z_k))

with ``f`` depending on the pair of grid classes. Cases that involve Pickands
grids need Pickands-type constants at shifted offsets; these are evaluated
exactly on a stored batch of field maxima (see :class:`PickandsBank`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import rng
from .errors import MissingConstant, NonPSD, UnclassifiableGrid
from .gp_sim import MixingVector
from .pickands import CONTINUOUS, FieldMaxima, Grid, field_maxima

CLAMP = 40.0


# ------------------------------------------------------------------ grids

@dataclass(frozen=True)
class ConstantSpacing:
    delta0: float

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ValueError("delta0 must be positive")

    def delta(self, T: float, alpha: float) -> float:
        return self.delta0


@dataclass(frozen=True)
class PickandsSpacing:
    D: float

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError("D must be positive")

    def delta(self, T: float, alpha: float) -> float:
        return self.D * (2.0 * math.log(T)) ** (-1.0 / alpha)


@dataclass(frozen=True)
class PowerLogSpacing:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def delta(self, T: float, alpha: float) -> float:
        return (2.0 * math.log(T)) ** (-self.beta / alpha)


@dataclass(frozen=True)
class GridKind:
    tag: str
    D: float | None = None

    def __str__(self):
        return f"Pickands({self.D!r})" if self.tag == "Pickands" else self.tag


SPARSE = GridKind("Sparse")
DENSE = GridKind("Dense")
CONTINUOUS_KIND = GridKind("Continuous")


def classify_grid(grid, alpha: float | None = None) -> GridKind:
    """Class of ``lim (2 ln T)^{1/alpha} delta(T)``: infinite, finite D or zero."""
    if isinstance(grid, ConstantSpacing):
        return SPARSE
    if isinstance(grid, PickandsSpacing):
        return GridKind("Pickands", grid.D)
    if isinstance(grid, PowerLogSpacing):
        if grid.beta == 1:
            raise UnclassifiableGrid("beta = 1 is a Pickands grid; use PickandsSpacing")
        return DENSE if grid.beta > 1 else SPARSE
    raise TypeError(f"unknown grid form {grid!r}")


def pickands_scale(grid, alpha: float, T_values: Sequence[float]) -> np.ndarray:
    """``(2 ln T)^{1/alpha} delta(T)`` along a horizon schedule (diagnostic)."""
    return np.array([(2 * math.log(T)) ** (1 / alpha) * grid.delta(T, alpha) for T in T_values])


# ------------------------------------------------------ normalisation

@dataclass(frozen=True)
class NormConstants:
    a: float
    b: float

    def normalise(self, m):
        return self.a * (np.asarray(m) - self.b)


def norm_constants(T: float, alpha: float, C: float, kind: GridKind,
                   delta: float | None = None, constants: dict | None = None) -> NormConstants:
    """``a_T`` and the location constant for a grid class.

    ``constants`` maps ``"H_alpha"`` and ``("H_D", D)`` to values.
    """
    if not T > 1:
        raise ValueError("T must exceed 1")
    a = math.sqrt(2.0 * math.log(T))
    constants = constants or {}
    if kind.tag == "Sparse":
        if delta is None:
            raise MissingConstant("sparse normalisation needs the grid spacing delta(T)")
        return NormConstants(a, a - math.log(a * delta * math.sqrt(2 * math.pi)) / a)
    if kind.tag == "Pickands":
        key = ("H_D", kind.D)
        if key not in constants:
            raise MissingConstant(f"H_D for D={kind.D} is required")
        H = constants[key]
    else:
        if "H_alpha" not in constants:
            raise MissingConstant("H_alpha is required")
        H = constants["H_alpha"]
    H = getattr(H, "value", H)
    inner = (2 * math.pi) ** -0.5 * C ** (1 / alpha) * H * a ** (-1 + 2 / alpha)
    return NormConstants(a, a + math.log(inner) / a)


# ------------------------------------------------------- constant banks

class PickandsBank:
    """Pickands-type constants evaluated on one batch of field maxima.

    All values come from the same paths and weights, so shift and saturation
    identities between them hold exactly. Evaluations are memoised.
    """

    def __init__(self, batch: FieldMaxima, provenance: str = ""):
        self.batch = batch
        self.provenance = provenance
        self._eval = lru_cache(maxsize=200_000)(self._evaluate)

    @classmethod
    def simulate(cls, alpha: float, D: Sequence[float], lam: float, reps: int, seed: int,
                 mesh: float | None = None, workers: int | None = None) -> "PickandsBank":
        supports = [CONTINUOUS] + [Grid(d) for d in D]
        batch = field_maxima(alpha, lam, mesh, supports, reps, seed, workers=workers)
        prov = f"field:alpha={alpha!r}:lam={lam!r}:mesh={batch.mesh_spacing!r}:reps={reps}:seed={seed}"
        return cls(batch, prov)

    def _evaluate(self, key: tuple) -> float:
        return self.batch.evaluate({s: o for s, o in key})

    def _h(self, offsets: dict) -> float:
        return self._eval(tuple(sorted(offsets.items(), key=lambda kv: str(kv[0]))))

    @property
    def H_alpha(self) -> float:
        return self._h({CONTINUOUS: 0.0})

    def H_D(self, D: float) -> float:
        return self._h({Grid(D): 0.0})

    def H_xy(self, D: float, x: float, y: float) -> float:
        return self._h({CONTINUOUS: x, Grid(D): y})

    def H_D1D2(self, D1: float, D2: float, z1: float, z2: float) -> float:
        return self._h({Grid(D1): z1, Grid(D2): z2})

    def H_x_z1z2(self, D1: float, D2: float, x: float, z1: float, z2: float) -> float:
        return self._h({CONTINUOUS: x, Grid(D1): z1, Grid(D2): z2})

    def norm_dict(self) -> dict:
        out = {"H_alpha": self.H_alpha}
        for s in self.batch.supports:
            if isinstance(s, Grid):
                out[("H_D", s.D)] = self.H_D(s.D)
        return out


# ------------------------------------------------------------- cases

CASES = ("T21_i", "T21_ii", "T21_iii", "T21_iv", "T22_i", "T22_ii", "T22_iii")
# grid classes each case expects for (grid 1, grid 2)
CASE_KINDS = {
    "T21_i": ("Sparse", "Sparse"),
    "T21_ii": ("Sparse", "Sparse"),
    "T21_iii": ("Sparse", "Pickands"),
    "T21_iv": ("Sparse", "Dense"),
    "T22_i": ("Pickands", "Pickands"),
    "T22_ii": ("Pickands", "Dense"),
    "T22_iii": ("Dense", "Dense"),
}


@dataclass(frozen=True)
class TheoremCase:
    tag: str
    theta1: float | None = None
    theta2: float | None = None
    D1: float | None = None
    D2: float | None = None
    bank: PickandsBank | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.tag not in CASES:
            raise ValueError(f"unknown theorem case {self.tag!r}")
        if self.tag == "T21_ii":
            if self.theta1 is None or self.theta2 is None:
                raise ValueError("T21_ii needs theta1 and theta2")
            if self.theta1 < 0 or self.theta2 < 0:
                raise ValueError("theta1, theta2 must be >= 0")
        if self.tag in ("T21_iii",) and self.D2 is None:
            raise ValueError("T21_iii needs D2")
        if self.tag in ("T22_i", "T22_ii") and self.D1 is None:
            raise ValueError(f"{self.tag} needs D1")
        if self.tag == "T22_i" and (self.D2 is None or self.D2 == self.D1):
            raise ValueError("T22_i needs D2 different from D1")

    @property
    def needs_constants(self) -> bool:
        return self.tag in ("T21_iii", "T22_i", "T22_ii")

    def _bank(self) -> PickandsBank:
        if self.bank is None:
            raise MissingConstant(f"case {self.tag} needs Pickands-type constants")
        return self.bank

    def to_json(self) -> str:
        params = {k: getattr(self, k) for k in ("theta1", "theta2", "D1", "D2")
                  if getattr(self, k) is not None}
        doc = {"tag": self.tag, "params": params, "constants": {}}
        if self.bank is not None:
            b = self.bank
            doc["constants"]["H_alpha"] = {"value": b.H_alpha, "id": b.provenance}
            for s in b.batch.supports:
                if isinstance(s, Grid):
                    doc["constants"][f"H_D({s.D!r})"] = {"value": b.H_D(s.D), "id": b.provenance}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, bank: PickandsBank | None = None) -> "TheoremCase":
        doc = json.loads(text)
        return cls(doc["tag"], bank=bank, **doc.get("params", {}))


def _clamp(v):
    return np.clip(np.asarray(v, dtype=float), -CLAMP, CLAMP)


def f_case(case: TheoremCase, x, y1, y2):
    """Exponent function ``f(x, y1, y2)`` of a theorem case (array friendly)."""
    x, y1, y2 = np.broadcast_arrays(_clamp(x), _clamp(y1), _clamp(y2))
    t = case.tag
    if t == "T21_i":
        return np.exp(-x) + np.exp(-y1) + np.exp(-y2)
    if t == "T21_ii":
        th1, th2 = case.theta1, case.theta2
        th = th2 - th1
        first = y1 > y2 + th
        return (np.exp(-x) + np.exp(-y1) + np.exp(-y2)
                - np.where(first, np.exp(-y1 - th1), 0.0)
                - np.where(first, 0.0, np.exp(-y2 - th2)))
    if t == "T21_iv":
        return np.exp(-y1) + np.exp(-np.minimum(x, y2))
    if t == "T22_iii":
        return np.exp(-np.minimum(np.minimum(x, y1), y2))
    bank = case._bank()
    lh = math.log(bank.H_alpha)
    if t == "T21_iii":
        D2 = case.D2
        ld2 = math.log(bank.H_D(D2))
        h = _vec(lambda a, b: bank.H_xy(D2, lh + a, ld2 + b), x, y2)
        return np.exp(-x) + np.exp(-y1) + np.exp(-y2) - h
    if t == "T22_ii":
        D1 = case.D1
        ld1 = math.log(bank.H_D(D1))
        mn = np.minimum(x, y2)
        h = _vec(lambda a, b: bank.H_xy(D1, lh + a, ld1 + b), mn, y1)
        return np.exp(-mn) + np.exp(-y1) - h
    # T22_i
    D1, D2 = case.D1, case.D2
    ld1, ld2 = math.log(bank.H_D(D1)), math.log(bank.H_D(D2))
    h1 = _vec(lambda a, b: bank.H_xy(D1, lh + a, ld1 + b), x, y1)
    h2 = _vec(lambda a, b: bank.H_xy(D2, lh + a, ld2 + b), x, y2)
    h12 = _vec(lambda a, b: bank.H_D1D2(D1, D2, ld1 + a, ld2 + b), y1, y2)
    h123 = _vec(lambda a, b, c: bank.H_x_z1z2(D1, D2, lh + a, ld1 + b, ld2 + c), x, y1, y2)
    return np.exp(-x) + np.exp(-y1) + np.exp(-y2) - h1 - h2 - h12 + h123


def _vec(fn: Callable, *args) -> np.ndarray:
    flat = [np.ravel(a) for a in args]
    out = np.fromiter((fn(*map(float, v)) for v in zip(*flat)), float, len(flat[0]))
    return out.reshape(np.shape(args[0]))


# --------------------------------------------------------- distribution

@dataclass(frozen=True)
class PiterbargParams:
    p: int
    r_diag: tuple
    mixing: MixingVector

    @classmethod
    def from_cross(cls, cross) -> "PiterbargParams":
        r = np.asarray(cross, dtype=float)
        return cls(r.shape[0], tuple(np.diag(r)), MixingVector.from_cross(r))

    @classmethod
    def weak(cls, p: int) -> "PiterbargParams":
        return cls.from_cross(np.zeros((p, p)))


@dataclass(frozen=True)
class GaussHermite:
    order: int = 64


@dataclass(frozen=True)
class MonteCarlo:
    reps: int = 100_000
    seed: int = 0


@lru_cache(maxsize=16)
def _hermite(order: int):
    z, w = np.polynomial.hermite_e.hermegauss(order)
    return z, w / w.sum()


def _mixture_nodes(params: PiterbargParams, integration):
    """Nodes (n, p) of Z and weights approximating the law of Z."""
    if isinstance(integration, GaussHermite):
        z1, w1 = _hermite(integration.order)
        active = [k for k in range(params.p) if params.r_diag[k] > 0]
        grids = np.meshgrid(*([z1] * len(active)), indexing="ij")
        wg = np.meshgrid(*([w1] * len(active)), indexing="ij")
        z = np.zeros((grids[0].size if active else 1, params.p))
        if active:
            sub = MixingVector(params.mixing.cov[np.ix_(active, active)]).sqrt()
            g = np.stack([a.ravel() for a in grids], -1)
            z[:, active] = g @ sub.T
        w = np.prod([a.ravel() for a in wg], axis=0) if active else np.ones(1)
        return z, w
    if isinstance(integration, MonteCarlo):
        gen = rng.rep_generator(integration.seed, 0, rng.G_MC)
        g = gen.standard_normal((integration.reps, params.p))
        return g @ params.mixing.sqrt().T, np.full(integration.reps, 1.0 / integration.reps)
    raise TypeError(f"unknown integration rule {integration!r}")


def eval_G(params: PiterbargParams, cases, x, y1, y2, integration=None):
    """Limit distribution at points ``x, y1, y2`` of shape (..., p)."""
    p = params.p
    cases = [cases] * p if isinstance(cases, TheoremCase) else list(cases)
    x, y1, y2 = (np.asarray(v, dtype=float) for v in (x, y1, y2))
    x, y1, y2 = np.broadcast_arrays(x, y1, y2)
    if x.shape[-1] != p:
        raise ValueError(f"last axis must have length p={p}")
    F = np.stack([f_case(cases[k], x[..., k], y1[..., k], y2[..., k]) for k in range(p)], -1)
    r = np.asarray(params.r_diag, dtype=float)
    if not np.any(r > 0):
        return np.exp(-F.sum(axis=-1))
    if integration is None:
        integration = GaussHermite(64) if p == 1 else MonteCarlo()
    w = np.linalg.eigvalsh(params.mixing.cov)
    if w.min() < -1e-12:
        raise NonPSD("mixing covariance is not positive semi-definite")
    z, wts = _mixture_nodes(params, integration)
    scale = np.exp(-r + np.sqrt(2 * r) * z)          # (nodes, p)
    flat = F.reshape(-1, p)
    out = np.empty(len(flat))
    step = max(1, 2_000_000 // len(wts))
    for s in range(0, len(flat), step):
        expo = flat[s:s + step] @ scale.T              # (pts, nodes)
        out[s:s + step] = np.exp(-expo) @ wts
    return out.reshape(F.shape[:-1])


def G_evaluator(params: PiterbargParams, cases, integration=None) -> Callable:
    return lambda x, y1, y2: eval_G(params, cases, x, y1, y2, integration)


def check_max_stability(G: Callable, n: int, points) -> float:
    """max over points of |G(. + ln n)^n - G(.)|; points is an iterable of (x, y1, y2)."""
    if n == 1:
        return 0.0
    if n < 1:
        raise ValueError("n must be a positive integer")
    x, y1, y2 = (np.asarray(v, dtype=float) for v in zip(*points))
    if x.ndim == 1:                                   # scalar arguments: p = 1
        x, y1, y2 = x[:, None], y1[:, None], y2[:, None]
    c = math.log(n)
    shifted = G(x + c, y1 + c, y2 + c) ** n
    return float(np.max(np.abs(shifted - G(x, y1, y2))))


def gumbel_marginal(G: Callable, p: int, k: int, which: str, z: float) -> float:
    """G with every argument at +CLAMP except argument ``which`` of component ``k``."""
    args = {name: np.full(p, CLAMP) for name in ("x", "y1", "y2")}
    args[which][k] = z
    return float(G(args["x"], args["y1"], args["y2"]))


def gumbel(z):
    return np.exp(-np.exp(-np.asarray(z, dtype=float)))


def lattice_points(values: Sequence[float], p: int):
    """Cartesian lattice over all 3p arguments; returns (x, y1, y2) arrays (npts, p)."""
    v = np.asarray(values, dtype=float)
    mesh = np.stack(np.meshgrid(*([v] * (3 * p)), indexing="ij"), -1).reshape(-1, 3 * p)
    return mesh[:, :p], mesh[:, p:2 * p], mesh[:, 2 * p:]
