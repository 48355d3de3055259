"""Operator coefficients on grids and their reduction to the real triple.

The operator is ``L u = div(A grad u) + b . grad u + c u`` with complex
coefficients sampled at grid nodes.  In one dimension each coefficient may
also carry Dirac atoms ``weight * delta(x - at)``.

Accretivity of ``-L`` only depends on the real triple

* ``P = Re A^s``
* ``btilde = (Im b - Div Im A^c) / 2``
* ``sigma = Re c - div(Re b) / 2``

computed here by :func:`reduce`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import calculus
from .grid import GridSpec


class CoefficientError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    """Point mass ``weight * delta(x - at)`` (one-dimensional grids only)."""
    at: float
    weight: complex

    def node(self, grid: GridSpec) -> int:
        return grid.nearest_node(self.at)


def _as_atoms(items) -> tuple[Atom, ...]:
    out = []
    for it in items or ():
        if isinstance(it, Atom):
            out.append(it)
        elif isinstance(it, dict):
            out.append(Atom(float(it["at"]), complex(it.get("re", 0.0), it.get("im", 0.0))))
        else:
            at, w = it
            out.append(Atom(float(at), complex(w)))
    return tuple(out)


@dataclass
class CoefficientSet:
    grid: GridSpec
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    atoms: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.grid
        n = g.ndim
        self.A = np.asarray(self.A, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)
        self.c = np.asarray(self.c, dtype=complex)
        if self.A.shape != g.shape + (n, n):
            raise CoefficientError(f"A has shape {self.A.shape}, expected {g.shape + (n, n)}")
        if self.b.shape != g.shape + (n,):
            raise CoefficientError(f"b has shape {self.b.shape}, expected {g.shape + (n,)}")
        if self.c.shape != g.shape:
            raise CoefficientError(f"c has shape {self.c.shape}, expected {g.shape}")
        atoms = {k: _as_atoms(self.atoms.get(k)) for k in ("a", "b", "c")}
        unknown = set(self.atoms) - {"a", "b", "c"}
        if unknown:
            raise CoefficientError(f"unknown atom keys {sorted(unknown)}")
        if any(atoms.values()):
            if n != 1:
                raise CoefficientError("atoms are only supported on one-dimensional grids")
            lo, hi = g.lower[0], g.upper[0]
            for key, lst in atoms.items():
                for a in lst:
                    if not lo < a.at < hi:
                        raise CoefficientError(f"atom of {key} at {a.at} is not inside ({lo}, {hi})")
        self.atoms = atoms

    @classmethod
    def constant(cls, grid: GridSpec, A=None, b=None, c=0.0, atoms=None) -> "CoefficientSet":
        n = grid.ndim
        A = np.eye(n) if A is None else np.asarray(A)
        b = np.zeros(n) if b is None else np.asarray(b)
        return cls(grid,
                   np.broadcast_to(A, grid.shape + (n, n)).astype(complex),
                   np.broadcast_to(b, grid.shape + (n,)).astype(complex),
                   np.broadcast_to(c, grid.shape).astype(complex),
                   atoms or {})

    @property
    def has_atoms(self) -> bool:
        return any(self.atoms.values())


@dataclass
class ReducedTriple:
    grid: GridSpec
    P: np.ndarray
    btilde: np.ndarray
    sigma: np.ndarray
    p_atoms: tuple = ()
    btilde_atoms: tuple = ()
    sigma_atoms: tuple = ()
    reb_atoms: tuple = ()  # Re b atoms; enter the form only weakly
    ellipticity: tuple | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def has_atoms(self) -> bool:
        return bool(self.p_atoms or self.btilde_atoms or self.sigma_atoms or self.reb_atoms)

    def scaled_drift(self, t: float) -> "ReducedTriple":
        return replace(self, btilde=t * self.btilde,
                       btilde_atoms=tuple(Atom(a.at, t * a.weight) for a in self.btilde_atoms))


# ------------------------------------------------------------------ algebra


def split_symmetric(A):
    """Return ``(A^s, A^c)`` with ``A^s = (A + A^T)/2`` and ``A^c = (A - A^T)/2``."""
    A = np.asarray(A)
    At = np.swapaxes(A, -1, -2)
    return 0.5 * (A + At), 0.5 * (A - At)


def coefficient_div(F, grid: GridSpec) -> np.ndarray:
    """Row divergence of a matrix coefficient field with ``calculus.derivative``."""
    F = np.asarray(F)
    n = grid.ndim
    return np.stack([sum(calculus.derivative(F[..., i, j], j, grid) for j in range(n))
                     for i in range(n)], axis=-1)


def ellipticity_bounds(P) -> tuple[float, float]:
    """Smallest and largest nodal eigenvalue of a symmetric matrix field."""
    ev = np.linalg.eigvalsh(np.asarray(P))
    return float(ev[..., 0].min()), float(ev[..., -1].max())


def reduce(coeffs: CoefficientSet) -> ReducedTriple:
    g = coeffs.grid
    As, Ac = split_symmetric(coeffs.A)
    P = As.real.copy()
    btilde = 0.5 * (coeffs.b.imag - coefficient_div(Ac.imag, g))
    sigma = coeffs.c.real - 0.5 * calculus.field_divergence(coeffs.b.real, g)
    at = coeffs.atoms
    m, M = ellipticity_bounds(P)
    return ReducedTriple(
        grid=g, P=P, btilde=btilde, sigma=sigma,
        p_atoms=tuple(Atom(a.at, a.weight.real) for a in at["a"] if a.weight.real != 0),
        btilde_atoms=tuple(Atom(a.at, 0.5 * a.weight.imag) for a in at["b"] if a.weight.imag != 0),
        sigma_atoms=tuple(Atom(a.at, a.weight.real) for a in at["c"] if a.weight.real != 0),
        reb_atoms=tuple(Atom(a.at, a.weight.real) for a in at["b"] if a.weight.real != 0),
        ellipticity=(m, M) if m > 0 else None,
        provenance={"source": "reduce", "coefficients": coeffs},
    )


def from_nondivergence(A, b, c, grid: GridSpec, atoms=None) -> CoefficientSet:
    """Rewrite ``sum a_jk d_j d_k + b.grad + c`` in divergence form (drift ``b - Div A``)."""
    A = np.asarray(A, dtype=complex)
    return CoefficientSet(grid, A, np.asarray(b, dtype=complex) - coefficient_div(A, grid),
                          np.asarray(c, dtype=complex), atoms or {})


def reduce_general_form(A, b1, b2, c1, grid: GridSpec) -> CoefficientSet:
    """``div(A grad u) + b1.grad u + div(b2 u) + c1 u`` -> ``(A, b1 + b2, c1 + div b2)``."""
    b2 = np.asarray(b2, dtype=complex)
    return CoefficientSet(grid, A, np.asarray(b1, dtype=complex) + b2,
                          np.asarray(c1, dtype=complex) + calculus.field_divergence(b2, grid))


# -------------------------------------------------------------- mollifier


def mollifier_weights(eps: float, h: float) -> np.ndarray:
    """Quartic bump ``(1 - t^2)^2`` sampled at multiples of ``h``, summing to one."""
    if eps < 2 * h * (1 - 1e-12):
        raise CoefficientError(f"mollifier radius {eps} is below two cells (h={h})")
    m = int(np.floor(eps / h + 1e-12))
    t = np.arange(-m, m + 1) * h / eps
    w = np.clip(1 - t ** 2, 0, None) ** 2
    return w / w.sum()


def mollify(f, eps: float, grid: GridSpec) -> np.ndarray:
    """Separable discrete convolution with the quartic bump of radius ``eps``.

    Periodic grids wrap around, so the mean is preserved exactly; zero
    extension loses the mass that leaks past the walls.
    """
    f = np.asarray(f)
    if np.iscomplexobj(f):
        return mollify(f.real, eps, grid) + 1j * mollify(f.imag, eps, grid)
    out = f.astype(float)
    mode = "wrap" if grid.periodic else "constant"
    for k, h in enumerate(grid.spacing):
        w = mollifier_weights(eps, h)
        out = ndimage.convolve1d(out, w, axis=k, mode=mode, cval=0.0)
    return out


def mollify_coefficients(coeffs: CoefficientSet, eps: float) -> CoefficientSet:
    g = coeffs.grid
    if coeffs.has_atoms:
        coeffs = atoms_to_density(coeffs)
    return CoefficientSet(g, mollify(coeffs.A, eps, g), mollify(coeffs.b, eps, g),
                          mollify(coeffs.c, eps, g))


def atoms_to_density(coeffs: CoefficientSet) -> CoefficientSet:
    """Spread each atom over its cell (weight / h at the containing node)."""
    g = coeffs.grid
    A, b, c = coeffs.A.copy(), coeffs.b.copy(), coeffs.c.copy()
    h = g.spacing[0]
    for a in coeffs.atoms.get("a", ()):
        A[a.node(g), 0, 0] += a.weight / h
    for a in coeffs.atoms.get("b", ()):
        b[a.node(g), 0] += a.weight / h
    for a in coeffs.atoms.get("c", ()):
        c[a.node(g)] += a.weight / h
    return CoefficientSet(g, A, b, c)


def linear_combination(items: Sequence[tuple[float, CoefficientSet]]) -> CoefficientSet:
    g = items[0][1].grid
    A = sum(t * cs.A for t, cs in items)
    b = sum(t * cs.b for t, cs in items)
    c = sum(t * cs.c for t, cs in items)
    return CoefficientSet(g, A, b, c)
