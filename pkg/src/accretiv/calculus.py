"""Discrete differential operators on :class:`~accretiv.grid.GridSpec` grids.

Three families live here.

* Staggered operators for test functions: ``gradient`` takes forward
  differences from nodes to faces and ``divergence`` is its negative
  adjoint, so ``<grad u, F> = -<u, div F>`` holds to rounding for every node
  function (zero extension) and every face field.
* Collocated central differences for test functions (``central_matrix``),
  exactly antisymmetric under zero extension.
* ``derivative`` for coefficient fields, which do not vanish at the edge of
  the box: spectral on periodic grids, fourth-order finite differences
  (one-sided near the walls, exact on quartics) otherwise.

Vector fields are arrays of shape ``grid.shape + (n,)``, matrix fields
``grid.shape + (n, n)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import GridSpec

# ---------------------------------------------------------------- staggered


def _check(u, grid: GridSpec):
    if u.shape[:grid.ndim] != grid.shape:
        raise ValueError(f"field of shape {u.shape} does not live on grid {grid.shape}")


def gradient(u, grid: GridSpec) -> list[np.ndarray]:
    """Forward differences; one face array per axis (see ``GridSpec.face_shape``)."""
    u = np.asarray(u)
    _check(u, grid)
    out = []
    for k, h in enumerate(grid.spacing):
        if grid.periodic:
            out.append((np.roll(u, -1, axis=k) - u) / h)
        else:
            pad = [(0, 0)] * u.ndim
            pad[k] = (1, 1)
            out.append(np.diff(np.pad(u, pad), axis=k) / h)
    return out


def divergence(faces, grid: GridSpec) -> np.ndarray:
    """Backward differences from faces to nodes; equals ``-gradient^T``."""
    total = 0
    for k, h in enumerate(grid.spacing):
        F = np.asarray(faces[k])
        if F.shape != grid.face_shape(k):
            raise ValueError(f"face array {k} has shape {F.shape}, expected {grid.face_shape(k)}")
        if grid.periodic:
            total = total + (F - np.roll(F, 1, axis=k)) / h
        else:
            total = total + np.diff(F, axis=k) / h
    return np.asarray(total)


def laplacian(u, grid: GridSpec) -> np.ndarray:
    return divergence(gradient(u, grid), grid)


def inner(a, b, grid: GridSpec) -> float | complex:
    """Discrete L2 pairing with uniform weights; lists are summed componentwise."""
    if isinstance(a, (list, tuple)):
        return sum(inner(x, y, grid) for x, y in zip(a, b))
    val = np.sum(np.asarray(a) * np.conj(np.asarray(b))) * grid.cell_volume
    return val.item()


def laplacian_symbol(grid: GridSpec) -> np.ndarray:
    """Fourier symbol of the periodic staggered Laplacian (non-positive)."""
    sym = 0
    for k, (n, h) in enumerate(zip(grid.points, grid.spacing)):
        s = -4.0 * np.sin(np.pi * np.fft.fftfreq(n)) ** 2 / h ** 2
        shape = [1] * grid.ndim
        shape[k] = n
        sym = sym + s.reshape(shape)
    return np.broadcast_to(sym, grid.shape)


def poisson_periodic(rho, grid: GridSpec) -> np.ndarray:
    """Mean-zero ``u`` with ``laplacian(u) = rho - mean(rho)`` on a periodic grid."""
    if not grid.periodic:
        raise ValueError("poisson_periodic needs a periodic grid")
    rho = np.asarray(rho)
    _check(rho, grid)
    axes = tuple(range(grid.ndim))
    rhat = np.fft.fftn(rho, axes=axes)
    sym = laplacian_symbol(grid)
    if rho.ndim > grid.ndim:
        sym = sym.reshape(sym.shape + (1,) * (rho.ndim - grid.ndim))
    with np.errstate(divide="ignore", invalid="ignore"):
        uhat = np.where(sym == 0, 0.0, rhat / np.where(sym == 0, 1.0, sym))
    u = np.fft.ifftn(uhat, axes=axes)
    return u.real if np.isrealobj(rho) else u


# ------------------------------------------------- coefficient derivatives

_FD4_INTERIOR = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD4_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_FD4_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


@lru_cache(maxsize=64)
def _fd_matrix(n: int, h: float) -> sp.csr_matrix:
    """1-d derivative matrix, 4th order if n >= 5 (2nd order otherwise)."""
    D = sp.lil_matrix((n, n))
    if n >= 5:
        for i in range(2, n - 2):
            D[i, i - 2:i + 3] = _FD4_INTERIOR
        D[0, 0:5] = _FD4_EDGE0
        D[1, 0:5] = _FD4_EDGE1
        D[n - 1, n - 5:n] = -_FD4_EDGE0[::-1]
        D[n - 2, n - 5:n] = -_FD4_EDGE1[::-1]
    else:
        for i in range(1, n - 1):
            D[i, i - 1] = -0.5
            D[i, i + 1] = 0.5
        D[0, 0:3] = [-1.5, 2.0, -0.5]
        D[n - 1, n - 3:n] = [0.5, -2.0, 1.5]
    return (D / h).tocsr()


def derivative(f, axis: int, grid: GridSpec) -> np.ndarray:
    """Partial derivative of a coefficient field along ``axis``.

    Extra trailing (component) axes are carried along.
    """
    f = np.asarray(f)
    _check(f, grid)
    n, h = grid.points[axis], grid.spacing[axis]
    if grid.periodic:
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        if n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * f.ndim
        shape[axis] = n
        out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(f, axis=axis), axis=axis)
        return out.real if np.isrealobj(f) else out
    D = _fd_matrix(n, h)
    moved = np.moveaxis(f, axis, 0)
    flat = moved.reshape(n, -1)
    out = (D @ flat).reshape(moved.shape)
    return np.moveaxis(out, 0, axis)


def field_gradient(f, grid: GridSpec) -> np.ndarray:
    """Collocated gradient of a scalar coefficient field, shape ``grid.shape + (n,)``."""
    return np.stack([derivative(f, k, grid) for k in range(grid.ndim)], axis=-1)


def field_divergence(F, grid: GridSpec) -> np.ndarray:
    """Collocated divergence of a vector coefficient field."""
    F = np.asarray(F)
    return sum(derivative(F[..., k], k, grid) for k in range(grid.ndim))


# ------------------------------------------------------- matrix Div / Curl


def _dplus(u, axis, grid):
    return (np.roll(u, -1, axis=axis) - u) / grid.spacing[axis]


def _dminus(u, axis, grid):
    return (u - np.roll(u, 1, axis=axis)) / grid.spacing[axis]


def matrix_div(F, grid: GridSpec) -> np.ndarray:
    """Row divergence ``(Div F)_i = sum_j d_j F_ij``.

    On periodic grids this is the staggered (backward difference) operator
    paired with ``matrix_curl``; on zero-extension grids it is built from
    ``derivative``.  Either way ``div(Div F) = 0`` for skew ``F``.
    """
    F = np.asarray(F)
    n = grid.ndim
    if F.shape != grid.shape + (n, n):
        raise ValueError(f"matrix field of shape {F.shape} does not fit grid {grid.shape}")
    if grid.periodic:
        d = lambda a, j: _dminus(a, j, grid)  # noqa: E731
    else:
        d = lambda a, j: derivative(a, j, grid)  # noqa: E731
    return np.stack([sum(d(F[..., i, j], j) for j in range(n)) for i in range(n)], axis=-1)


def matrix_curl(f, grid: GridSpec) -> np.ndarray:
    """``(Curl f)_jk = d_j f_k - d_k f_j``, skew-symmetric at every node.

    Periodic grids use forward differences (so the entries sit on cell edges
    and pair with ``matrix_div``).
    """
    f = np.asarray(f)
    n = grid.ndim
    if f.shape != grid.shape + (n,):
        raise ValueError(f"vector field of shape {f.shape} does not fit grid {grid.shape}")
    if grid.periodic:
        d = lambda a, j: _dplus(a, j, grid)  # noqa: E731
    else:
        d = lambda a, j: derivative(a, j, grid)  # noqa: E731
    out = np.zeros(grid.shape + (n, n), dtype=f.dtype)
    for j in range(n):
        for k in range(j + 1, n):
            c = d(f[..., k], j) - d(f[..., j], k)
            out[..., j, k] = c
            out[..., k, j] = -c
    return out


def periodic_divergence(F, grid: GridSpec) -> np.ndarray:
    """Staggered divergence of a vector field stored node-shaped (periodic grids)."""
    F = np.asarray(F)
    return sum(_dminus(F[..., k], k, grid) for k in range(grid.ndim))


def periodic_gradient(u, grid: GridSpec) -> np.ndarray:
    """Staggered gradient stored node-shaped: component k at face i+1/2 along k."""
    return np.stack([_dplus(u, k, grid) for k in range(grid.ndim)], axis=-1)


# --------------------------------------------------- sparse form operators


def _kron_axis(mat1d: sp.spmatrix, axis: int, grid: GridSpec) -> sp.csr_matrix:
    mats = []
    for k, n in enumerate(grid.points):
        mats.append(mat1d if k == axis else sp.identity(n, format="csr"))
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out.tocsr()


@lru_cache(maxsize=32)
def gradient_matrix(grid: GridSpec, axis: int) -> sp.csr_matrix:
    """Sparse forward-difference operator nodes -> faces normal to ``axis``."""
    n, h = grid.points[axis], grid.spacing[axis]
    if grid.periodic:
        D = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
        D[n - 1, 0] = 1.0
    else:
        D = sp.diags([-np.ones(n), np.ones(n)], [-1, 0], shape=(n + 1, n), format="lil")
    return _kron_axis((D / h).tocsr(), axis, grid)


@lru_cache(maxsize=32)
def central_matrix(grid: GridSpec, axis: int) -> sp.csr_matrix:
    """Sparse central difference on nodes; exactly antisymmetric."""
    n, h = grid.points[axis], grid.spacing[axis]
    C = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], shape=(n, n), format="lil")
    if grid.periodic:
        C[0, n - 1] = -1.0
        C[n - 1, 0] = 1.0
    return _kron_axis((C / (2 * h)).tocsr(), axis, grid)


def face_average(coef, grid: GridSpec, axis: int) -> np.ndarray:
    """Average a nodal coefficient onto the faces normal to ``axis``.

    Boundary faces (zero extension) take the value of their single interior
    neighbour.
    """
    coef = np.asarray(coef)
    if grid.periodic:
        return 0.5 * (coef + np.roll(coef, -1, axis=axis))
    pad = [(0, 0)] * coef.ndim
    pad[axis] = (1, 1)
    ext = np.pad(coef, pad, mode="edge")
    lo = [slice(None)] * coef.ndim
    hi = [slice(None)] * coef.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (ext[tuple(lo)] + ext[tuple(hi)])
