"""Eigen-solvers shared by the form checks.

Small problems go through dense LAPACK; larger sparse ones through ARPACK
(with a shift-invert refinement for the bottom of the spectrum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 1600
SEED = 12345


class EigenError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def hermitian_part(M):
    return 0.5 * (M + M.conj().T)


def matrix_norm(M) -> float:
    """Cheap upper bound of the spectral norm (max absolute row sum)."""
    if sp.issparse(M):
        return float(abs(M).sum(axis=1).max()) if M.shape[0] else 0.0
    M = np.asarray(M)
    return float(np.abs(M).sum(axis=1).max()) if M.size else 0.0


def _is_real_tridiagonal(M) -> bool:
    M = sp.coo_matrix(M)
    if np.iscomplexobj(M.data) and np.any(M.data.imag != 0):
        return False
    return bool(np.all(np.abs(M.row - M.col) <= 1))


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float


def smallest_eigenpair(M, mass: float = 1.0, tol: float = 1e-10) -> EigenPair:
    """Smallest eigenvalue of the pencil ``(M, mass * I)`` for Hermitian ``M``."""
    n = M.shape[0]
    if sp.issparse(M) and n > 2 and _is_real_tridiagonal(M):
        M = sp.csr_matrix(M).real
        d, e = M.diagonal(), M.diagonal(1)
        w, V = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
        x = V[:, 0]
        res = float(np.linalg.norm(M @ x - w[0] * x))
        return EigenPair(float(w[0]) / mass, x, res / mass)
    if n <= DENSE_LIMIT or not sp.issparse(M):
        w, V = sla.eigh(_dense(M), subset_by_index=[0, 0])
        x = V[:, 0]
        res = float(np.linalg.norm(_dense(M) @ x - w[0] * x))
        return EigenPair(float(w[0]) / mass, x, res / mass)
    M = M.tocsc()
    v0 = np.random.default_rng(SEED).standard_normal(n)
    if np.iscomplexobj(M.data):
        v0 = v0.astype(complex)
    try:
        w, _ = spla.eigsh(M, k=1, which="SA", tol=1e-6, v0=v0, ncv=min(n, 64), maxiter=20 * n)
        est = float(w[0])
        shift = est - (1e-2 * abs(est) + 1e-6 * matrix_norm(M))
        w, V = spla.eigsh(M, k=1, sigma=shift, which="LM", tol=tol, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise EigenError("ARPACK did not converge") from exc
    x = V[:, 0]
    res = float(np.linalg.norm(M @ x - w[0] * x))
    return EigenPair(float(w[0]) / mass, x, res / mass)


def largest_pencil_eigenvalue(A, B) -> EigenPair:
    """Largest eigenvalue of ``A x = mu B x`` with ``B`` positive definite."""
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        w, V = sla.eigh(_dense(A), _dense(B), subset_by_index=[n - 1, n - 1])
        return EigenPair(float(w[0]), V[:, 0], 0.0)
    lu = spla.splu(sp.csc_matrix(B))
    Minv = spla.LinearOperator(B.shape, matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(SEED).standard_normal(n)
    w, V = spla.eigsh(sp.csr_matrix(A), k=1, M=sp.csr_matrix(B), Minv=Minv, which="LA", v0=v0, tol=1e-10)
    return EigenPair(float(w[0]), V[:, 0], 0.0)


def smallest_pencil_eigenvalue(A, B) -> EigenPair:
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        w, V = sla.eigh(_dense(A), _dense(B), subset_by_index=[0, 0])
        return EigenPair(float(w[0]), V[:, 0], 0.0)
    lu = spla.splu(sp.csc_matrix(B))
    Minv = spla.LinearOperator(B.shape, matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(SEED).standard_normal(n)
    w, V = spla.eigsh(sp.csr_matrix(A), k=1, M=sp.csr_matrix(B), Minv=Minv, which="SA", v0=v0, tol=1e-10)
    return EigenPair(float(w[0]), V[:, 0], 0.0)


@dataclass
class WhitenedNorm:
    value: float
    u: np.ndarray | None
    v: np.ndarray | None
    kernel_dim: int


def whitened_antisymmetric_norm(T, H, floor: float = 1e-12, kernel_tol: float = 1e-9) -> WhitenedNorm:
    """Spectral norm of ``H^{-1/2} T H^{-1/2}`` on the range of ``H``.

    ``T`` is real antisymmetric and ``H`` real symmetric positive
    semi-definite.  Returns ``inf`` when ``T`` does not annihilate the kernel
    of ``H``.  The witnesses ``u, v`` satisfy ``|u^T T v| = value`` with
    ``u^T H u = v^T H v = 1``.
    """
    n = H.shape[0]
    if (T.count_nonzero() if sp.issparse(T) else np.count_nonzero(T)) == 0:
        return WhitenedNorm(0.0, None, None, 0)
    if n > DENSE_LIMIT and sp.issparse(H):
        return _whitened_norm_sparse(T, H)
    Hd, Td = _dense(H), _dense(T)
    d, V = sla.eigh(Hd)
    scale = max(float(np.abs(d).max()), 1e-300)
    keep = d > floor * scale
    ker = V[:, ~keep]
    tnorm = float(np.abs(Td).max()) if Td.size else 0.0
    if ker.shape[1] and tnorm > 0:
        leak = float(np.abs(Td @ ker).max())
        if leak > kernel_tol * tnorm * max(1.0, np.sqrt(n)):
            return WhitenedNorm(float("inf"), None, None, ker.shape[1])
    Vr = V[:, keep] / np.sqrt(d[keep])
    W = Vr.T @ Td @ Vr
    if W.size == 0:
        return WhitenedNorm(0.0, None, None, ker.shape[1])
    mu, Z = sla.eigh(1j * W)
    i = int(np.argmax(np.abs(mu)))
    z = Z[:, i]
    x = Vr @ z
    u, v = x.real, x.imag
    return _normalised_witness(float(abs(mu[i])), u, v, Hd, ker.shape[1])


def _normalised_witness(value, u, v, H, kdim):
    hu = float(u @ (H @ u))
    hv = float(v @ (H @ v))
    if hu > 0 and hv > 0:
        u, v = u / np.sqrt(hu), v / np.sqrt(hv)
    return WhitenedNorm(value, u, v, kdim)


def _whitened_norm_sparse(T, H) -> WhitenedNorm:
    # iT is Hermitian; the pencil (iT, H) has eigenvalues +-theta_k.
    n = H.shape[0]
    Hc = sp.csc_matrix(H, dtype=complex)
    lu = spla.splu(Hc)
    Minv = spla.LinearOperator(H.shape, matvec=lu.solve, dtype=complex)
    A = sp.csr_matrix(1j * sp.csr_matrix(T))
    v0 = np.random.default_rng(SEED).standard_normal(n).astype(complex)
    w, X = spla.eigsh(A, k=1, M=sp.csr_matrix(Hc), Minv=Minv, which="LM", v0=v0, tol=1e-10)
    x = X[:, 0]
    Hr = sp.csr_matrix(H)
    return _normalised_witness(float(abs(w[0])), x.real, x.imag, Hr, 0)
