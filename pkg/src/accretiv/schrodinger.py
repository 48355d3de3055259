"""The Schrodinger form ``[h]^2 = <P grad h, grad h> - <sigma h, h>``.

Besides assembly and the smallest-eigenvalue test this module handles
vector-field certificates ``g`` with ``sigma <= div(P g) - (P g) . g``.

On the grid a certificate lives on the edges of the stencil graph of the
form matrix ``H``: write ``H = sum_{i<j} a_ij (e_i - e_j)(e_i - e_j)^T +
diag(d)`` and give every edge a ratio ``rho_ij = exp(-len_ij * g_ij)``
(``rho_ji = 1 / rho_ij``).  The discrete counterpart of
``div(P g) - (P g) . g - sigma`` is then

    margin_i = (d_i + sum_j a_ij (1 - rho_ij)) / w,

and ``a (h_i - h_j)^2 >= a (1 - rho) h_i^2 + a (1 - 1/rho) h_j^2`` (the
Schwarz step) gives ``h^T H h >= sum_i w margin_i h_i^2`` whenever every
``a_ij >= 0``.  For the ground-state certificate ``rho_ij = phi_j / phi_i``
the margin is the constant ``lambda_min`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import calculus, forms, linalg
from .coefficients import ReducedTriple
from .grid import GridSpec

NONNEG_RTOL = 1e-8


class FormError(ValueError):
    pass


@dataclass
class FormMatrix:
    H: sp.csr_matrix
    stiffness: sp.csr_matrix
    potential: sp.csr_matrix  # <sigma h, h> part, so H = stiffness - potential
    grid: GridSpec
    P: np.ndarray
    sigma: np.ndarray
    atoms: dict = field(default_factory=dict)

    @property
    def weight(self) -> float:
        return self.grid.cell_volume

    @property
    def size(self) -> int:
        return self.H.shape[0]

    def value(self, h) -> float:
        h = np.ravel(h)
        return float(h @ (self.H @ h))

    def norm(self) -> float:
        """Scale of the pencil ``(H, w I)``, used for relative tolerances."""
        return linalg.matrix_norm(self.H) / self.weight

    def stencil_value(self, h) -> float:
        """Recompute ``h^T H h`` from the fields with array stencils."""
        return stencil_form_value(self.P, self.sigma, self.grid, h, self.atoms)


def _check_symmetric(P):
    P = np.asarray(P, dtype=float)
    if not np.allclose(P, np.swapaxes(P, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(P).max())):
        raise FormError("P is not symmetric at every node")
    return P


def _atom_dict(p_atoms=(), sigma_atoms=(), reb_atoms=()):
    return {"p": tuple(p_atoms), "sigma": tuple(sigma_atoms), "reb": tuple(reb_atoms)}


def assemble(P, sigma, grid: GridSpec, p_atoms=(), sigma_atoms=(), reb_atoms=()) -> FormMatrix:
    if grid.periodic:
        raise FormError("forms are assembled on zero-extension grids")
    P = _check_symmetric(P)
    sigma = np.asarray(sigma, dtype=float)
    if (p_atoms or sigma_atoms or reb_atoms) and grid.ndim != 1:
        raise FormError("atoms need a one-dimensional grid")
    K = forms.principal_matrix(P, grid)
    for a in p_atoms:
        K = K + forms.atom_principal(float(np.real(a.weight)), a.at, grid)
    S = forms.mass_matrix(sigma, grid)
    for a in sigma_atoms:
        S = S + forms.atom_mass(float(np.real(a.weight)), a.at, grid)
    for a in reb_atoms:
        # a real drift atom beta contributes -beta h(x0) h'(x0) to the form
        S = S + forms.atom_weak_drift(float(np.real(a.weight)), a.at, grid)
    K, S = K.tocsr(), S.tocsr()
    return FormMatrix((K - S).tocsr(), K, S, grid, P, sigma,
                      _atom_dict(p_atoms, sigma_atoms, reb_atoms))


def assemble_triple(red: ReducedTriple) -> FormMatrix:
    return assemble(red.P, red.sigma, red.grid, red.p_atoms, red.sigma_atoms, red.reb_atoms)


def _central(h, axis, grid):
    pad = [(0, 0)] * h.ndim
    pad[axis] = (1, 1)
    e = np.pad(h, pad)
    hi = [slice(None)] * h.ndim
    lo = [slice(None)] * h.ndim
    hi[axis] = slice(2, None)
    lo[axis] = slice(0, -2)
    return (e[tuple(hi)] - e[tuple(lo)]) / (2 * grid.spacing[axis])


def stencil_form_value(P, sigma, grid: GridSpec, h, atoms=None) -> float:
    h = np.asarray(h, dtype=float).reshape(grid.shape)
    w = grid.cell_volume
    grads = calculus.gradient(h, grid)
    val = 0.0
    for k in range(grid.ndim):
        val += np.sum(calculus.face_average(P[..., k, k], grid, k) * grads[k] ** 2) * w
    for j in range(grid.ndim):
        for k in range(grid.ndim):
            if j != k:
                val += np.sum(P[..., j, k] * _central(h, j, grid) * _central(h, k, grid)) * w
    val -= np.sum(sigma * h ** 2) * w
    if atoms:
        g0 = grads[0]
        for a in atoms.get("p", ()):
            i = grid.nearest_node(a.at)
            val += np.real(a.weight) * g0[i + 1] ** 2
        for a in atoms.get("sigma", ()):
            i = grid.nearest_node(a.at)
            val -= np.real(a.weight) * h[i] ** 2
        for a in atoms.get("reb", ()):
            i = grid.nearest_node(a.at)
            val -= np.real(a.weight) * h[i] * g0[i + 1]
    return float(val)


# ------------------------------------------------------------ eigenvalues


@dataclass
class MinEig:
    value: float
    witness: np.ndarray
    residual: float
    tolerance: float

    @property
    def nonnegative(self) -> bool:
        return self.value >= -self.tolerance


def min_eig(form, rtol: float | None = None) -> MinEig:
    """Smallest eigenvalue of the pencil ``(H, w I)`` with its eigenvector.

    Accepts a :class:`FormMatrix` or a bare symmetric matrix (weight 1).
    """
    if isinstance(form, FormMatrix):
        H, w = form.H, form.weight
    else:
        H, w = form, 1.0
    if not sp.issparse(H):
        H = np.asarray(H)
        if not np.allclose(H, H.T.conj()):
            raise FormError("matrix is not symmetric")
    try:
        ep = linalg.smallest_eigenpair(H, mass=w)
    except linalg.EigenError as exc:
        raise FormError(f"eigensolver failed: {exc}") from exc
    tol = (NONNEG_RTOL if rtol is None else rtol) * linalg.matrix_norm(H) / w
    return MinEig(ep.value, ep.vector, ep.residual, tol)


@dataclass
class FormBounds:
    epsilon: float
    K: float
    upper_ratio: float  # max <sigma h,h> / <P grad h, grad h>
    lower_ratio: float  # min of the same ratio
    upper_witness: np.ndarray
    lower_witness: np.ndarray


def form_bounds(P, sigma, grid: GridSpec, **atoms) -> FormBounds:
    """Best ``epsilon`` and ``K`` in the upper and lower form bounds of ``sigma``."""
    fm = assemble(P, sigma, grid, **atoms)
    stiff_min = linalg.smallest_eigenpair(fm.stiffness, mass=fm.weight)
    if stiff_min.value <= NONNEG_RTOL * linalg.matrix_norm(fm.stiffness) / fm.weight:
        raise FormError("stiffness form is singular: P degenerates on the grid")
    top = linalg.largest_pencil_eigenvalue(fm.potential, fm.stiffness)
    bot = linalg.smallest_pencil_eigenvalue(fm.potential, fm.stiffness)
    eps2 = min(1.0, max(0.0, 1.0 - top.value))
    return FormBounds(float(np.sqrt(eps2)), max(0.0, -bot.value), top.value, bot.value,
                      top.vector, bot.vector)


# ------------------------------------------------------------ certificates


@dataclass
class EdgeGraph:
    i: np.ndarray
    j: np.ndarray
    a: np.ndarray  # edge weights a_ij = -H_ij
    d: np.ndarray  # row sums of H
    length: np.ndarray
    direction: np.ndarray  # unit vectors, shape (E, n)


def _finish_graph(i, j, a, grid, d):
    coords = np.stack([x.ravel() for x in grid.coords()], axis=-1)
    vec = coords[j] - coords[i]
    length = np.linalg.norm(vec, axis=-1)
    return EdgeGraph(i, j, a, d, length, vec / length[:, None])


def form_graph(fm: FormMatrix) -> EdgeGraph:
    H = fm.H.tocsr()
    d = np.asarray(H.sum(axis=1)).ravel()
    up = sp.coo_matrix(sp.triu(H, k=1))
    mask = up.data != 0
    return _finish_graph(up.row[mask], up.col[mask], -up.data[mask], fm.grid, d)


@dataclass
class GCertificate:
    graph: EdgeGraph
    g: np.ndarray  # g projected on each edge direction (E,)
    margin: np.ndarray  # nodal margin of div(Pg) - (Pg).g - sigma
    min_margin: float
    schwarz_applicable: bool
    chain_margin: float | None
    witness: np.ndarray | None
    tolerance: float
    provenance: str = "user-supplied"

    @property
    def passed(self) -> bool:
        ok = self.min_margin >= -self.tolerance
        if not self.schwarz_applicable:
            ok = ok and self.chain_margin is not None and self.chain_margin >= -self.tolerance
        return bool(ok)

    def nodal_field(self) -> np.ndarray:
        """Average the edge values back to a nodal vector field."""
        n = self.graph.direction.shape[1]
        size = self.margin.size
        acc = np.zeros((size, n))
        cnt = np.zeros((size, n))
        axis_edges = np.abs(self.graph.direction).max(axis=1) > 1 - 1e-12
        for idx in np.flatnonzero(axis_edges):
            k = int(np.argmax(np.abs(self.graph.direction[idx])))
            s = np.sign(self.graph.direction[idx, k])
            for node in (self.graph.i[idx], self.graph.j[idx]):
                acc[node, k] += s * self.g[idx]
                cnt[node, k] += 1
        return acc / np.maximum(cnt, 1)


def certificate_margin(graph: EdgeGraph, g_edge, weight: float) -> np.ndarray:
    rho = np.exp(-graph.length * g_edge)
    m = graph.d.copy()
    np.add.at(m, graph.i, graph.a * (1 - rho))
    with np.errstate(divide="ignore", over="ignore"):
        np.add.at(m, graph.j, graph.a * (1 - 1 / rho))
    return m / weight


def _chain_margin(fm: FormMatrix, margin, h) -> float:
    """``h^T H h - sum w margin h^2``; equals the sum of Schwarz remainders."""
    h = np.ravel(h).real
    return float(h @ (fm.H @ h) - fm.weight * np.sum(margin * h ** 2))


def project_vector_field(g, graph: EdgeGraph, grid: GridSpec) -> np.ndarray:
    """Edge values ``g(midpoint) . direction`` from a nodal vector field."""
    g = np.asarray(g, dtype=float).reshape(grid.size, grid.ndim)
    mid = 0.5 * (g[graph.i] + g[graph.j])
    return np.sum(mid * graph.direction, axis=1)


def verify_g_certificate(P, sigma, g, grid: GridSpec, witness=None, **atoms) -> GCertificate:
    """Check ``sigma <= div(P g) - (P g).g`` on the grid.

    ``g`` is either a nodal vector field or an array of edge values for the
    stencil graph of the assembled form.  The Schwarz chain is replayed on
    ``witness`` (default: the bottom eigenvector of the form).
    """
    fm = assemble(P, sigma, grid, **atoms)
    return _verify(fm, g, witness)


def _verify(fm: FormMatrix, g, witness=None, provenance="user-supplied") -> GCertificate:
    graph = form_graph(fm)
    g = np.asarray(g, dtype=float)
    if g.shape == (graph.i.size,):
        g_edge = g
    else:
        g_edge = project_vector_field(g, graph, fm.grid)
    if not np.all(np.isfinite(g_edge)):
        raise FormError("certificate has non-finite values")
    margin = certificate_margin(graph, g_edge, fm.weight)
    applicable = bool(np.all(graph.a >= -1e-14 * max(1.0, np.abs(graph.a).max(initial=0.0))))
    if witness is None:
        witness = min_eig(fm).witness
    chain = _chain_margin(fm, margin, witness)
    scale = fm.norm()
    return GCertificate(graph, g_edge, margin.reshape(fm.grid.shape), float(margin.min()),
                        applicable, chain, np.ravel(witness), 1e-6 * scale, provenance)


def construct_g_certificate(fm: FormMatrix) -> GCertificate:
    """Ground-state certificate ``g = -grad(log phi)`` on the stencil edges."""
    me = min_eig(fm)
    if me.value <= me.tolerance:
        raise FormError(f"lambda_min = {me.value:.3e} is not strictly positive; no certificate")
    phi = np.real(me.witness)
    phi = phi * np.sign(phi[np.argmax(np.abs(phi))])
    if np.any(phi <= 0):
        raise FormError("ground state changes sign on the grid")
    graph = form_graph(fm)
    g_edge = -np.log(phi[graph.j] / phi[graph.i]) / graph.length
    return _verify(fm, g_edge, witness=phi, provenance="ground-state")
