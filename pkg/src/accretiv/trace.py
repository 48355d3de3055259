"""Trace inequalities ``int |u|^2 dmu <= C^2 ||grad u||^2`` on grids.

Measures live on the leaves of a dyadic tree over a box; the leaves are the
cells of a zero-extension grid with ``2^D`` points per axis, and ``mu`` at a
leaf is the node mass in the discrete form ``sum_i mu_i u_i^2``.

The best constant comes from a generalised eigenproblem.  The equivalent
conditions (capacity, ball energy, pointwise potential, dyadic sum, Green
energy) are evaluated over sampled families of sets, which is always stated
in the reports.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy import integrate
from scipy.signal import fftconvolve

from . import forms, linalg
from .fieldio import read_field
from .grid import GridSpec


class TraceError(ValueError):
    pass


# ------------------------------------------------------------------ measure


@dataclass
class DyadicMeasure:
    lower: tuple
    upper: tuple
    depth: int
    leaves: np.ndarray
    levels: list = field(init=False, repr=False)

    def __post_init__(self):
        self.lower = tuple(float(v) for v in self.lower)
        self.upper = tuple(float(v) for v in self.upper)
        n = len(self.lower)
        side = 2 ** self.depth
        leaves = np.asarray(self.leaves, dtype=float)
        if leaves.shape != (side,) * n:
            raise TraceError(f"leaf array has shape {leaves.shape}, expected {(side,) * n}")
        if np.any(leaves < 0) or not np.all(np.isfinite(leaves)):
            raise TraceError("leaf masses must be finite and nonnegative")
        self.leaves = leaves
        levels = [leaves]
        for _ in range(self.depth):
            m = levels[-1]
            s = m.shape[0] // 2
            m = m.reshape(sum(([s, 2] for _ in range(n)), [])).sum(axis=tuple(range(1, 2 * n, 2)))
            levels.append(m)
        self.levels = levels[::-1]  # levels[j] has 2^j cubes per axis

    @property
    def ndim(self) -> int:
        return len(self.lower)

    @property
    def total(self) -> float:
        return float(self.levels[0].sum())

    def grid(self) -> GridSpec:
        return GridSpec(self.lower, self.upper, (2 ** self.depth,) * self.ndim, "zero")

    def cube_volume(self, level: int) -> float:
        return float(np.prod([(hi - lo) / 2 ** level for lo, hi in zip(self.lower, self.upper)]))

    def scaled(self, t: float) -> "DyadicMeasure":
        return DyadicMeasure(self.lower, self.upper, self.depth, t * self.leaves)

    def __add__(self, other: "DyadicMeasure") -> "DyadicMeasure":
        return DyadicMeasure(self.lower, self.upper, self.depth, self.leaves + other.leaves)

    def check_tree(self) -> float:
        """Largest violation of ``mu(parent) = sum mu(children)``."""
        worst = 0.0
        for j in range(self.depth):
            child = self.levels[j + 1]
            s = child.shape[0] // 2
            n = self.ndim
            agg = child.reshape(sum(([s, 2] for _ in range(n)), [])).sum(axis=tuple(range(1, 2 * n, 2)))
            worst = max(worst, float(np.abs(agg - self.levels[j]).max()))
        return worst

    # -------------------------------------------------------- constructors

    @classmethod
    def lebesgue(cls, depth: int, lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0)) -> "DyadicMeasure":
        n = len(lower)
        vol = np.prod([(hi - lo) for lo, hi in zip(lower, upper)]) / 2 ** (depth * n)
        return cls(lower, upper, depth, np.full((2 ** depth,) * n, vol))

    @classmethod
    def point(cls, depth: int, at, mass: float = 1.0, lower=(0.0, 0.0, 0.0),
              upper=(1.0, 1.0, 1.0)) -> "DyadicMeasure":
        m = cls(lower, upper, depth, np.zeros((2 ** depth,) * len(lower)))
        return m.add_points(np.atleast_2d(at), np.array([mass]))

    def add_points(self, xs, masses) -> "DyadicMeasure":
        """Bin point masses into leaves (points on the upper faces go to the last leaf)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        masses = np.asarray(masses, dtype=float)
        if xs.shape[1] != self.ndim:
            raise TraceError(f"points have {xs.shape[1]} coordinates, box has {self.ndim}")
        lo, hi = np.array(self.lower), np.array(self.upper)
        if np.any(xs < lo) or np.any(xs > hi):
            raise TraceError("point outside the measure box")
        side = 2 ** self.depth
        idx = np.minimum(((xs - lo) / (hi - lo) * side).astype(int), side - 1)
        leaves = self.leaves.copy()
        np.add.at(leaves, tuple(idx.T), masses)
        return DyadicMeasure(self.lower, self.upper, self.depth, leaves)

    @classmethod
    def from_csv(cls, path, depth: int, lower, upper) -> "DyadicMeasure":
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise TraceError(f"{path}:{lineno}: {exc}") from exc
        n = len(lower)
        if any(len(r) != n + 1 for r in rows):
            raise TraceError(f"{path}: every line needs {n} coordinates and a mass")
        m = cls(lower, upper, depth, np.zeros((2 ** depth,) * n))
        if not rows:
            return m
        arr = np.array(rows)
        if np.any(arr[:, -1] < 0):
            raise TraceError(f"{path}: negative mass")
        return m.add_points(arr[:, :-1], arr[:, -1])

    @classmethod
    def from_field(cls, path, lower=None, upper=None) -> "DyadicMeasure":
        ff = read_field(path)
        if ff.rank != 0:
            raise TraceError(f"{path}: leaf masses must be a scalar field")
        side = ff.points[0]
        depth = int(round(np.log2(side)))
        if 2 ** depth != side or any(p != side for p in ff.points):
            raise TraceError(f"{path}: need 2^D points on every axis, got {ff.points}")
        if lower is None:
            lower = tuple(-e / 2 for e in ff.extents)
            upper = tuple(e / 2 for e in ff.extents)
        return cls(lower, upper, depth, np.real(ff.values))


# ----------------------------------------------------------- best constant


@dataclass
class TraceConstant:
    c: float
    witness: np.ndarray | None

    @property
    def c2(self) -> float:
        return self.c ** 2


def _stiffness(grid: GridSpec):
    return forms.principal_matrix(np.broadcast_to(np.eye(grid.ndim), grid.shape + (grid.ndim,) * 2), grid)


def best_trace_constant(mu: DyadicMeasure, grid: GridSpec | None = None) -> TraceConstant:
    """``c^2 = lambda_max(diag(mu), K)``: the exact discrete least constant."""
    grid = grid or mu.grid()
    if grid.shape != mu.leaves.shape:
        raise TraceError("grid is not aligned with the dyadic leaves")
    return trace_constant(mu.leaves, grid)


def trace_constant(masses, grid: GridSpec) -> TraceConstant:
    """Best constant for node masses on any zero-extension grid."""
    masses = np.asarray(masses, dtype=float)
    if masses.shape != grid.shape or np.any(masses < 0):
        raise TraceError("node masses must be nonnegative and match the grid")
    if not np.any(masses):
        return TraceConstant(0.0, None)
    K = _stiffness(grid)
    Q = forms._diag(masses).tocsr()
    try:
        top = linalg.largest_pencil_eigenvalue(Q, K)
    except Exception as exc:  # ARPACK reports through several exception types
        raise linalg.EigenError(f"pencil eigensolver failed: {exc}") from exc
    return TraceConstant(float(np.sqrt(max(top.value, 0.0))), top.vector.reshape(grid.shape))


def dyadic_condition(mu: DyadicMeasure) -> float:
    """``c5 = max_P S(P)/mu(P)`` with ``S(P) = sum_{Q in P} mu(Q)^2 / |Q|^{1-2/n}``."""
    n = mu.ndim
    if n < 3:
        raise TraceError("the dyadic condition needs n >= 3")
    e = 1 - 2 / n
    S = None
    best = 0.0
    for j in range(mu.depth, -1, -1):
        m = mu.levels[j]
        own = m ** 2 / mu.cube_volume(j) ** e
        if S is None:
            S = own
        else:
            s = m.shape[0]
            S = own + S.reshape(sum(([s, 2] for _ in range(n)), [])).sum(axis=tuple(range(1, 2 * n, 2)))
        pos = m > 0
        if np.any(pos):
            best = max(best, float((S[pos] / m[pos]).max()))
    return best


# ------------------------------------------------------------- potentials


@lru_cache(maxsize=4)
def self_cell_constant(n: int) -> float:
    """``K_n`` with ``mean over a cube of side h of |z|^{1-n} = K_n / h^{n-1}``.

    Splitting the cube into ``2n`` pyramids gives
    ``K_n = n * int_{[-1,1]^{n-1}} (1 + |s|^2)^{(1-n)/2} ds``.
    """
    if n == 1:
        return 1.0
    if n == 2:
        return 4.0 * np.log(1.0 + np.sqrt(2.0))
    if n == 3:
        val, _ = integrate.dblquad(lambda t, s: 1.0 / (1.0 + s * s + t * t), -1, 1, -1, 1)
        return 3.0 * val
    raise TraceError("dimension must be 1, 2 or 3")


def _kernel(grid: GridSpec, shape, cn: float, bessel: bool):
    """Kernel values on all offsets for an array of the given shape."""
    axes = [np.arange(-(s - 1), s) * h for s, h in zip(shape, grid.spacing)]
    Z = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(sum(z ** 2 for z in Z))
    n = grid.ndim
    with np.errstate(divide="ignore"):
        k = cn * r ** (1 - n)
    centre = tuple(s - 1 for s in shape)
    h = float(np.prod(grid.spacing)) ** (1.0 / n)
    k[centre] = cn * self_cell_constant(n) / h ** (n - 1)
    if bessel:
        k = k * np.exp(-r)
    return k


def riesz_potential(masses, grid: GridSpec, cn: float = 1.0, bessel: bool = False) -> np.ndarray:
    """``I_1 mu(x) = c(n) sum_y mu_y |x - y|^{1-n}`` at every node.

    The self term uses the cell average of the kernel.  ``bessel=True``
    multiplies the kernel by ``exp(-|x - y|)`` (a surrogate for the Bessel
    kernel).  ``masses`` may also be a :class:`DyadicMeasure`.
    """
    if isinstance(masses, DyadicMeasure):
        masses = masses.leaves
    m = np.asarray(masses, dtype=float)
    if grid.ndim < 2:
        raise TraceError("Riesz potentials need n >= 2")
    if not np.any(m):
        return np.zeros(m.shape)
    k = _kernel(grid, m.shape, cn, bessel)
    out = fftconvolve(m, k, mode="valid")
    return np.maximum(out, 0.0)


def energy_ball_condition(mu: DyadicMeasure, cn: float = 1.0, min_level: int = 0) -> tuple[float, dict]:
    """``c3 = max_B int_B (I_1 mu_B)^2 / mu(B)`` over balls inscribed in dyadic cubes."""
    if mu.ndim < 3:
        raise TraceError("the ball energy condition needs n >= 3")
    grid = mu.grid()
    X = grid.coords()
    w = grid.cell_volume
    best, arg = 0.0, {}
    for j in range(min_level, mu.depth + 1):
        s = 2 ** (mu.depth - j)
        for idx in np.ndindex(*mu.levels[j].shape):
            if mu.levels[j][idx] <= 0:
                continue
            sl = tuple(slice(i * s, (i + 1) * s) for i in idx)
            sub = [x[sl] for x in X]
            centre = [x.mean() for x in sub]
            rad = 0.5 * min((hi - lo) / 2 ** j for lo, hi in zip(mu.lower, mu.upper))
            inside = sum((x - c) ** 2 for x, c in zip(sub, centre)) <= rad ** 2 * (1 + 1e-12)
            mB = np.where(inside, mu.leaves[sl], 0.0)
            tot = float(mB.sum())
            if tot <= 0:
                continue
            pot = riesz_potential(mB, grid, cn)
            val = float(np.sum(pot[inside] ** 2) * w) / tot
            if val > best:
                best, arg = val, {"level": j, "cube": tuple(int(i) for i in idx)}
    return best, arg


def pointwise_condition(mu: DyadicMeasure, cn: float = 1.0) -> tuple[float, dict]:
    """``c4 = max_x I_1[(I_1 mu)^2](x) / I_1 mu(x)`` over nodes with ``I_1 mu > 0``."""
    if mu.ndim < 3:
        raise TraceError("the pointwise condition needs n >= 3")
    grid = mu.grid()
    p1 = riesz_potential(mu.leaves, grid, cn)
    if not np.any(p1 > 0):
        return 0.0, {}
    p2 = riesz_potential(p1 ** 2 * grid.cell_volume, grid, cn)
    pos = p1 > 0
    ratio = np.where(pos, p2 / np.where(pos, p1, 1.0), 0.0)
    i = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return float(ratio[i]), {"node": tuple(int(v) for v in i)}


# --------------------------------------------------------------- capacity


class _Green:
    """Dense inverse of the stiffness matrix, shared across measures."""

    def __init__(self, grid: GridSpec, inhomogeneous: bool = False):
        K = _stiffness(grid)
        if inhomogeneous:
            K = K + forms.mass_matrix(np.ones(grid.shape), grid)
        self.grid = grid
        self.K = K.tocsr()
        self.G = sla.inv(K.toarray())
        self.G = 0.5 * (self.G + self.G.T)
        self._cap = {}

    def capacity(self, mask) -> float:
        mask = np.asarray(mask, dtype=bool).ravel()
        key = mask.tobytes()
        if key in self._cap:
            return self._cap[key]
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            val = 0.0
        elif idx.size == mask.size:
            val = float(self.K.sum())
        else:
            ones = np.ones(idx.size)
            val = float(ones @ sla.solve(self.G[np.ix_(idx, idx)], ones, assume_a="pos"))
        self._cap[key] = val
        return val


@lru_cache(maxsize=4)
def green(grid: GridSpec, inhomogeneous: bool = False) -> _Green:
    return _Green(grid, inhomogeneous)


def capacity(mask, grid: GridSpec, inhomogeneous: bool = False, method: str = "direct") -> float:
    """``cap(e)``: Dirichlet energy of the equilibrium potential of the node set ``e``.

    ``inhomogeneous=True`` adds the mass term (the ``Cap`` variant).  The
    direct method solves the constrained system; ``method="green"`` uses the
    Schur-complement identity ``cap(e) = 1^T (G_ee)^{-1} 1`` with the cached
    Green matrix.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise TraceError("node set does not fit the grid")
    if method == "green":
        return green(grid, inhomogeneous).capacity(mask)
    u = equilibrium_potential(mask, grid, inhomogeneous)
    K = _stiffness(grid)
    if inhomogeneous:
        K = K + forms.mass_matrix(np.ones(grid.shape), grid)
    v = u.ravel()
    return float(v @ (K @ v))


def equilibrium_potential(mask, grid: GridSpec, inhomogeneous: bool = False) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool).ravel()
    K = _stiffness(grid)
    if inhomogeneous:
        K = K + forms.mass_matrix(np.ones(grid.shape), grid)
    K = K.tocsr()
    u = np.zeros(grid.size)
    u[mask] = 1.0
    free = ~mask
    if np.any(free) and np.any(mask):
        rhs = -K[free][:, mask] @ np.ones(int(mask.sum()))
        u[free] = spla.spsolve(K[free][:, free].tocsc(), rhs)
    return u.reshape(grid.shape)


def _cube_mask(grid, lo_idx, hi_idx):
    m = np.zeros(grid.shape, dtype=bool)
    m[tuple(slice(max(a, 0), min(b, s)) for a, b, s in zip(lo_idx, hi_idx, grid.shape))] = True
    return m


@dataclass
class CapacityCondition:
    c2: float
    argmax: dict
    family: str


def capacity_condition(mu: DyadicMeasure, inflations: int = 3) -> CapacityCondition:
    """``c2 = max mu(e)/cap(e)`` over dyadic cubes and inflations of the best cube."""
    grid = mu.grid()
    gr = green(grid)
    best, arg = 0.0, {}
    for j in range(mu.depth + 1):
        s = 2 ** (mu.depth - j)
        for idx in np.ndindex(*mu.levels[j].shape):
            m = float(mu.levels[j][idx])
            if m <= 0:
                continue
            lo = tuple(i * s for i in idx)
            mask = _cube_mask(grid, lo, tuple(a + s for a in lo))
            val = m / gr.capacity(mask)
            if val > best:
                best, arg = val, {"level": j, "lo": lo, "side": s, "inflation": 0}
    if arg:
        lo, s = arg["lo"], arg["side"]
        for k in range(1, inflations + 1):
            mask = _cube_mask(grid, tuple(a - k for a in lo), tuple(a + s + k for a in lo))
            val = float(mu.leaves[mask].sum()) / gr.capacity(mask)
            if val > best:
                best = val
                arg = dict(arg, inflation=k)
    return CapacityCondition(best, arg, "dyadic cubes + inflations of the maximising cube")


# ----------------------------------------------------------- Green energy


def green_energy_condition(mu: DyadicMeasure) -> tuple[float, dict]:
    """``max_e (mu_e^T G_ee mu_e) / mu(e)`` over dyadic cubes."""
    grid = mu.grid()
    G = green(grid).G
    flat = mu.leaves.ravel()
    best, arg = 0.0, {}
    for j in range(mu.depth + 1):
        s = 2 ** (mu.depth - j)
        for idx in np.ndindex(*mu.levels[j].shape):
            m = float(mu.levels[j][idx])
            if m <= 0:
                continue
            lo = tuple(i * s for i in idx)
            sel = np.flatnonzero(_cube_mask(grid, lo, tuple(a + s for a in lo)).ravel())
            me = flat[sel]
            val = float(me @ G[np.ix_(sel, sel)] @ me) / m
            if val > best:
                best, arg = val, {"level": j, "lo": lo}
    return best, arg


def green_weighted_norm(mu: DyadicMeasure) -> float:
    """``||D^{1/2} G D^{1/2}||`` with ``D = diag(mu)``."""
    grid = mu.grid()
    d = np.sqrt(mu.leaves.ravel())
    if not np.any(d):
        return 0.0
    G = green(grid).G
    n = d.size
    op = spla.LinearOperator((n, n), matvec=lambda x: d * (G @ (d * np.ravel(x))), dtype=float)
    v0 = np.random.default_rng(linalg.SEED).standard_normal(n)
    top = spla.eigsh(op, k=1, which="LA", v0=v0, tol=1e-12)[0]
    return float(top[0])


# ----------------------------------------------------------------- report


@dataclass
class TraceReport:
    c: float
    c2: float | None = None
    c3: float | None = None
    c4: float | None = None
    c5: float | None = None
    green_energy: float | None = None
    green_norm: float | None = None
    families: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    def summary(self) -> dict:
        keys = ("c", "c2", "c3", "c4", "c5", "green_energy", "green_norm")
        out = {k: getattr(self, k) for k in keys}
        out["families"] = dict(self.families)
        return out

    def to_json(self, extra: dict | None = None) -> str:
        doc = self.summary()
        doc.update(extra or {})
        return json.dumps(doc, indent=2, default=str)

    def to_text(self) -> str:
        lines = [f"{k}: {v:.10g}" for k, v in self.summary().items()
                 if isinstance(v, float)]
        lines += [f"family.{k}: {v}" for k, v in self.families.items()]
        return "\n".join(lines) + "\n"


def trace_report(mu: DyadicMeasure, conditions=("c", "c2", "c3", "c4", "c5", "green")) -> TraceReport:
    tc = best_trace_constant(mu)
    rep = TraceReport(tc.c)
    if tc.witness is not None:
        rep.witnesses["c"] = tc.witness
    if "c2" in conditions:
        cc = capacity_condition(mu)
        rep.c2 = cc.c2
        rep.families["c2"] = cc.family
    if mu.ndim >= 3:
        if "c3" in conditions:
            rep.c3, _ = energy_ball_condition(mu)
            rep.families["c3"] = "balls inscribed in dyadic cubes"
        if "c4" in conditions:
            rep.c4, _ = pointwise_condition(mu)
        if "c5" in conditions:
            rep.c5 = dyadic_condition(mu)
    if "green" in conditions:
        rep.green_energy, _ = green_energy_condition(mu)
        rep.green_norm = green_weighted_norm(mu)
        rep.families["green_energy"] = "dyadic cubes"
    return rep
