"""Hodge decomposition, stream functions, dyadic BMO and the Jacobian constant.

On a periodic grid every vector field splits as

    btilde = grad f + Div G + mean(btilde),

with ``f = lap^{-1} div btilde`` and ``G = lap^{-1} (Curl btilde)^T`` (so
``G_jk = lap^{-1}(d_k b_j - d_j b_k)``).  All operators are the staggered
forward/backward differences of :mod:`accretiv.calculus` and the inverse
Laplacian is the matching 5-point (7-point) FFT solve, so the identity holds
to rounding.  In two dimensions ``G`` has one entry and ``g = -G_12`` is the
stream function: ``btilde - mean = (-D2 g, D1 g)`` when ``div btilde = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus, forms, linalg
from .grid import GridSpec


class HodgeError(ValueError):
    pass


@dataclass
class HodgeParts:
    grid: GridSpec
    f: np.ndarray
    G: np.ndarray
    mean: np.ndarray
    g: np.ndarray | None = None  # n = 2 stream function
    psi: np.ndarray | None = None  # n = 3 vector potential, curl psi = Div G

    def gradient_part(self) -> np.ndarray:
        return calculus.periodic_gradient(self.f, self.grid)

    def solenoidal_part(self) -> np.ndarray:
        return calculus.matrix_div(self.G, self.grid)

    def reconstruct(self) -> np.ndarray:
        return self.gradient_part() + self.solenoidal_part() + self.mean

    def residual(self, btilde) -> float:
        return float(np.abs(np.asarray(btilde) - self.reconstruct()).max())


def _periodic(grid: GridSpec) -> GridSpec:
    if grid.periodic:
        return grid
    return grid.with_boundary("periodic")


def hodge_decompose(btilde, grid: GridSpec) -> HodgeParts:
    """Split a vector field on a periodic grid (zero-extension grids are wrapped)."""
    grid = _periodic(grid)
    b = np.asarray(btilde, dtype=float)
    n = grid.ndim
    if n < 2:
        raise HodgeError("the decomposition needs n >= 2")
    if b.shape != grid.shape + (n,):
        raise HodgeError(f"vector field of shape {b.shape} does not fit grid {grid.shape}")
    mean = b.reshape(-1, n).mean(axis=0)
    f = calculus.poisson_periodic(calculus.periodic_divergence(b, grid), grid)
    curl = calculus.matrix_curl(b, grid)
    G = calculus.poisson_periodic(np.swapaxes(curl, -1, -2), grid)
    G = 0.5 * (G - np.swapaxes(G, -1, -2))  # remove rounding asymmetry
    parts = HodgeParts(grid, f, G, mean)
    if n == 2:
        parts.g = -G[..., 0, 1]
    else:
        parts.psi = np.stack([G[..., 1, 2], -G[..., 0, 2], G[..., 0, 1]], axis=-1)
    return parts


def stream_function_2d(btilde, grid: GridSpec, div_tol: float = 1e-8) -> np.ndarray:
    """Mean-zero ``g`` with ``(-D2 g, D1 g) = btilde - mean(btilde)``.

    The relative divergence ``h * ||div b||_inf / ||b||_inf`` must not exceed
    ``div_tol``; a divergence-free field is required in two dimensions.
    """
    grid = _periodic(grid)
    if grid.ndim != 2:
        raise HodgeError("stream functions are two-dimensional")
    b = np.asarray(btilde, dtype=float)
    scale = float(np.abs(b).max())
    if scale == 0:
        return np.zeros(grid.shape)
    div = calculus.periodic_divergence(b, grid)
    rel = float(np.abs(div).max()) * min(grid.spacing) / scale
    if rel > div_tol:
        raise HodgeError(f"btilde is not divergence free (relative divergence {rel:.3e} > {div_tol:.1e})")
    return hodge_decompose(b, grid).g


# --------------------------------------------------------------------- BMO


@dataclass
class BmoEstimate:
    value: float
    level: int  # number of dyadic halvings of the box
    corner: tuple  # index of the lower corner of the maximising cube
    side: tuple  # its side in cells

    def __float__(self):
        return self.value


def _blocks(u, side):
    """View ``u`` as an array of blocks: shape (m1, ..., mn, s1, ..., sn)."""
    shape = []
    for N, s in zip(u.shape, side):
        shape += [N // s, s]
    n = u.ndim
    order = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    return u.reshape(shape).transpose(order)


def bmo_norm(field, min_cube: int = 2) -> BmoEstimate:
    """Largest mean oscillation ``|Q|^{-1} sum_Q |f - f_Q|`` over dyadic cubes.

    Cubes come from repeated halving of the whole grid box and keep at least
    ``min_cube`` cells per side; every side must stay an integer.
    """
    u = np.asarray(field, dtype=float)
    if min_cube < 2:
        raise HodgeError("min_cube must be at least 2")
    n = u.ndim
    best = BmoEstimate(0.0, 0, (0,) * n, u.shape)
    level = 0
    side = u.shape
    while all(s >= min_cube for s in side):
        blk = _blocks(u, side)
        axes = tuple(range(n, 2 * n))
        mean = blk.mean(axis=axes, keepdims=True)
        osc = np.abs(blk - mean).mean(axis=axes)
        idx = np.unravel_index(int(np.argmax(osc)), osc.shape)
        if osc[idx] > best.value:
            corner = tuple(int(i) * s for i, s in zip(idx, side))
            best = BmoEstimate(float(osc[idx]), level, corner, tuple(side))
        if any(s % 2 for s in side):
            break
        side = tuple(s // 2 for s in side)
        level += 1
    return best


# ----------------------------------------------------------- Jacobian form


@dataclass
class JacobianConstant:
    value: float
    u: np.ndarray | None
    v: np.ndarray | None


def jacobian_matrix(g, grid: GridSpec):
    """Antisymmetric ``J`` with ``u^T J v = sum g (D1 u D2 v - D2 u D1 v) w``."""
    if grid.ndim != 2:
        raise HodgeError("the Jacobian form is two-dimensional")
    if grid.periodic:
        raise HodgeError("the Jacobian form needs a zero-extension grid")
    C1 = calculus.central_matrix(grid, 0)
    C2 = calculus.central_matrix(grid, 1)
    Gd = forms._diag(np.asarray(g, dtype=float))
    return (grid.cell_volume * (C1.T @ Gd @ C2 - C2.T @ Gd @ C1)).tocsr()


def jacobian_constant(g, grid: GridSpec) -> JacobianConstant:
    """Best constant in ``|int g J[u,v]| <= C ||grad u|| ||grad v||`` on the grid."""
    J = jacobian_matrix(g, grid)
    K = forms.principal_matrix(np.broadcast_to(np.eye(2), grid.shape + (2, 2)), grid)
    wn = linalg.whitened_antisymmetric_norm(J, K)
    return JacobianConstant(wn.value, wn.u, wn.v)


# ------------------------------------------------------ smallness report


@dataclass
class SmallnessReport:
    epsilon: float
    f_admissibility_C: float
    G_bmo: float
    g_bmo: float | None
    direct_verdict: str
    direct_lambda_min: float | None
    classification: str
    thresholds: dict
    residual: float

    def summary(self) -> dict:
        return dict(self.__dict__)


def check_smallness(red, epsilon: float, thresholds: dict | None = None,
                 min_cube: int = 2) -> SmallnessReport:
    """Report ``(C, ||G||_BMO, epsilon)`` for the real triple, plus the direct test.

    The smallness levels are not explicit, so the classification is only made
    against user supplied ``thresholds`` (keys ``C`` and ``bmo``); without them
    it is ``unclassified``.  The direct Hermitian test always runs.
    """
    from . import accretivity, trace

    if not 0 < epsilon <= 1:
        raise HodgeError("epsilon must lie in (0, 1]")
    grid = red.grid
    if grid.ndim < 2:
        raise HodgeError("the decomposition needs n >= 2")
    zgrid = grid if not grid.periodic else grid.with_boundary("zero")
    parts = hodge_decompose(red.btilde, grid)
    grad = parts.gradient_part()
    mu = np.sum(grad ** 2, axis=-1) * grid.cell_volume
    C = trace.trace_constant(mu, zgrid).c
    if grid.ndim == 2:
        g_bmo = bmo_norm(parts.g, min_cube).value
        G_bmo = g_bmo
    else:
        g_bmo = None
        G_bmo = max(bmo_norm(parts.G[..., j, k], min_cube).value
                    for j in range(grid.ndim) for k in range(j + 1, grid.ndim))
    coeffs = red.provenance.get("coefficients") if red.provenance else None
    if coeffs is not None and not coeffs.grid.periodic:
        d = accretivity.check_direct(accretivity.assemble_L(coeffs))
        verdict, lam = d.verdict, d.lambda_min
    else:
        lam = accretivity.triple_lambda_min(red) if not grid.periodic else None
        tol = None
        if lam is not None:
            tol = accretivity.NONNEG_RTOL * linalg.matrix_norm(
                accretivity.hermitian_from_triple(red)) / grid.cell_volume
        verdict = "inconclusive" if lam is None else ("accretive" if lam >= -tol else "not-accretive")
    th = dict(thresholds or {})
    if {"C", "bmo"} <= set(th):
        small = C <= th["C"] and G_bmo <= th["bmo"]
        classification = "small" if small else "not-small"
    else:
        classification = "unclassified"
    return SmallnessReport(epsilon, C, G_bmo, g_bmo, verdict, lam, classification, th,
                       parts.residual(red.btilde))


check_thm_i2 = check_smallness
