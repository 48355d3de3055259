"""Sparse assembly of the discrete quadratic and sesquilinear forms.

All matrices ``M`` are stored so that ``v^H M u`` is the form evaluated at
``(u, v)``, with the uniform quadrature weight already folded in.  Unknowns
are the grid nodes in C order; zero extension supplies the boundary.

Discretisation choices (every path in the package goes through these):

* principal part: diagonal entries on staggered faces with forward
  differences, off-diagonal entries at nodes with central differences;
* drift: skew-symmetric split ``(B - B^T)/2 - diag(div b)/2`` with central
  differences, so a real drift only contributes ``-div(b)/2`` to the real
  part of the form;
* one-dimensional atoms sit at the node containing them; the gradient they
  see is the forward difference on the face to the right of that node.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import calculus
from .grid import GridSpec


def _diag(v) -> sp.dia_matrix:
    return sp.diags(np.ravel(v))


def principal_matrix(A, grid: GridSpec) -> sp.csr_matrix:
    """``<A grad u, grad v>`` for a symmetric (possibly complex) matrix field."""
    A = np.asarray(A)
    n, w = grid.ndim, grid.cell_volume
    out = sp.csr_matrix((grid.size, grid.size), dtype=A.dtype)
    for k in range(n):
        G = calculus.gradient_matrix(grid, k)
        out = out + G.T @ _diag(calculus.face_average(A[..., k, k], grid, k)) @ G
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            coef = A[..., j, k]
            if not np.any(coef):
                continue
            Cj = calculus.central_matrix(grid, j)
            Ck = calculus.central_matrix(grid, k)
            out = out + Cj.T @ _diag(coef) @ Ck
    return (w * out).tocsr()


def drift_matrix(b, grid: GridSpec) -> sp.csr_matrix:
    """``<b . grad u, v>`` in skew-symmetric split form."""
    b = np.asarray(b)
    B = sp.csr_matrix((grid.size, grid.size), dtype=b.dtype)
    for k in range(grid.ndim):
        B = B + _diag(b[..., k]) @ calculus.central_matrix(grid, k)
    divb = calculus.field_divergence(b, grid)
    return (grid.cell_volume * (0.5 * (B - B.T) - 0.5 * _diag(divb))).tocsr()


def mass_matrix(c, grid: GridSpec) -> sp.csr_matrix:
    return (grid.cell_volume * _diag(c)).tocsr()


def commutator_matrix(btilde, grid: GridSpec) -> sp.csr_matrix:
    """Real antisymmetric ``T`` with ``u^T T v = <btilde, u grad v - v grad u>``."""
    btilde = np.asarray(btilde, dtype=float)
    B = sp.csr_matrix((grid.size, grid.size))
    for k in range(grid.ndim):
        B = B + _diag(btilde[..., k]) @ calculus.central_matrix(grid, k)
    return (grid.cell_volume * (B - B.T)).tocsr()


# ---------------------------------------------------------------- atoms


def atom_vectors(at: float, grid: GridSpec) -> tuple[int, np.ndarray]:
    """Node index of an atom and the gradient row of the face to its right."""
    i = grid.nearest_node(at)
    G = calculus.gradient_matrix(grid, 0)
    return i, G.getrow(i + 1).toarray().ravel()


def _e(i, size):
    e = np.zeros(size)
    e[i] = 1.0
    return e


def atom_principal(weight, at, grid: GridSpec) -> sp.csr_matrix:
    i, g = atom_vectors(at, grid)
    return sp.csr_matrix(weight * np.outer(g, g))


def atom_drift(weight, at, grid: GridSpec) -> sp.csr_matrix:
    """``weight * u'(x0) * conj(v(x0))``."""
    i, g = atom_vectors(at, grid)
    return sp.csr_matrix(weight * np.outer(_e(i, grid.size), g))


def atom_mass(weight, at, grid: GridSpec) -> sp.csr_matrix:
    i, _ = atom_vectors(at, grid)
    return sp.csr_matrix(([weight], ([i], [i])), shape=(grid.size, grid.size))


def atom_commutator(weight, at, grid: GridSpec) -> sp.csr_matrix:
    """Point commutator ``weight * (u g' - g u')(x0)``."""
    i, g = atom_vectors(at, grid)
    e = _e(i, grid.size)
    return sp.csr_matrix(weight * (np.outer(e, g) - np.outer(g, e)))


def atom_weak_drift(weight, at, grid: GridSpec) -> sp.csr_matrix:
    """Real part of a real drift atom: ``weight * h(x0) h'(x0)``, symmetrised."""
    i, g = atom_vectors(at, grid)
    e = _e(i, grid.size)
    return sp.csr_matrix(0.5 * weight * (np.outer(e, g) + np.outer(g, e)))
