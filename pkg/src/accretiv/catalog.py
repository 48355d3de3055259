"""Reference operators used by the demos, the CLI and the acceptance tests."""

from __future__ import annotations

import numpy as np

from .coefficients import CoefficientSet
from .grid import GridSpec


def log_rotation(lam: float, grid: GridSpec) -> CoefficientSet:
    """Two-dimensional operator with ``a_12 = -a_21 = i lam log|x|``.

    The drift ``b = -x |x|^2`` and potential ``c = -2 |x|^2`` cancel in
    ``sigma``, so the real triple is ``P = I``, ``sigma = 0`` and
    ``btilde = (-d2 g, d1 g)`` with ``g = (lam / 2) log|x|``.
    """
    if grid.ndim != 2:
        raise ValueError("log_rotation is two-dimensional")
    x1, x2 = grid.coords()
    r2 = x1 ** 2 + x2 ** 2
    A = np.zeros(grid.shape + (2, 2), dtype=complex)
    A[..., 0, 0] = A[..., 1, 1] = 1.0
    A[..., 0, 1] = 1j * lam * 0.5 * np.log(r2)
    A[..., 1, 0] = -A[..., 0, 1]
    b = -np.stack([x1, x2], axis=-1) * r2[..., None]
    return CoefficientSet(grid, A, b, -2.0 * r2)


def log_window(grid: GridSpec) -> np.ndarray:
    """``log|x|`` on the nodes (a centred even grid never hits 0)."""
    return 0.5 * np.log(grid.radius() ** 2)


def random_coefficients(rng: np.random.Generator, grid: GridSpec, skew: float = 0.25,
                        drift: float | None = None, potential: float | None = None) -> CoefficientSet:
    """Random complex coefficients near ``A = I`` with verdicts of both kinds."""
    def cplx(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    n = grid.ndim
    drift = rng.uniform(0, 12) if drift is None else drift
    potential = rng.uniform(0, 25) if potential is None else potential
    A = np.eye(n) + skew * cplx(grid.shape + (n, n))
    return CoefficientSet(grid, A, drift * cplx(grid.shape + (n,)), potential * cplx(grid.shape))
