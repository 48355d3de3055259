"""The accretivity decision for ``-L``, ``L u = div(A grad u) + b . grad u + c u``.

Two routes are offered.  :func:`check_direct` looks at the Hermitian part of
the assembled sesquilinear matrix.  :func:`check_prop1` works with the real
triple ``(P, btilde, sigma)``: ``P >= 0`` nodewise, the Schrodinger form
``H`` nonnegative, and the commutator bound ``theta <= 1``.

With the shared discretisation in :mod:`accretiv.forms` the Hermitian part
of ``-L`` is exactly ``H - i T`` (``T`` the commutator matrix), so for
``u = f + i g`` with real ``f, g``

    Re <-L u, u> = f^T H f + g^T H g + 2 f^T T g,

and the two routes agree up to eigensolver tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from . import calculus, forms, linalg, schrodinger
from .coefficients import (CoefficientError, CoefficientSet, ReducedTriple,
                           coefficient_div, reduce, split_symmetric)
from .grid import GridSpec

NONNEG_RTOL = schrodinger.NONNEG_RTOL
THETA_TOL = 1e-8
VERDICTS = ("accretive", "not-accretive", "inconclusive")


class AccretivityError(ValueError):
    pass


# ------------------------------------------------------------- assembly


@dataclass
class SesquilinearMatrix:
    """``M`` with ``v^H M u = <-L u, v>``; ``L`` itself is ``-M``."""
    M: sp.csr_matrix
    grid: GridSpec
    coeffs: CoefficientSet

    @property
    def L(self) -> sp.csr_matrix:
        return -self.M

    @property
    def weight(self) -> float:
        return self.grid.cell_volume

    def hermitian_part(self) -> sp.csr_matrix:
        return linalg.hermitian_part(self.M).tocsr()

    def form(self, u, v) -> complex:
        u, v = np.ravel(u), np.ravel(v)
        return complex(np.conj(v) @ (self.M @ u))

    def stencil_form(self, u, v) -> complex:
        return stencil_form(self.coeffs, u, v)


def _absorbed(coeffs: CoefficientSet):
    """``(A^s, b - Div A^c)``: the skew part of ``A`` moved into the drift."""
    As, Ac = split_symmetric(coeffs.A)
    return As, coeffs.b - coefficient_div(Ac, coeffs.grid)


def assemble_L(coeffs: CoefficientSet) -> SesquilinearMatrix:
    g = coeffs.grid
    if g.periodic:
        raise AccretivityError("assemble_L needs a zero-extension grid")
    As, b = _absorbed(coeffs)
    M = forms.principal_matrix(As, g) - forms.drift_matrix(b, g) - forms.mass_matrix(coeffs.c, g)
    M = sp.csr_matrix(M, dtype=complex)
    for a in coeffs.atoms["a"]:
        M = M + forms.atom_principal(a.weight, a.at, g)
    for a in coeffs.atoms["b"]:
        M = M - forms.atom_drift(a.weight, a.at, g)
    for a in coeffs.atoms["c"]:
        M = M - forms.atom_mass(a.weight, a.at, g)
    return SesquilinearMatrix(M.tocsr(), g, coeffs)


def _central(u, axis, grid):
    return schrodinger._central(u, axis, grid)


def stencil_form(coeffs: CoefficientSet, u, v) -> complex:
    """``<-L u, v>`` from array stencils (independent of the sparse matrices)."""
    g = coeffs.grid
    u = np.asarray(u, dtype=complex).reshape(g.shape)
    v = np.asarray(v, dtype=complex).reshape(g.shape)
    w = g.cell_volume
    As, b = _absorbed(coeffs)
    gu, gv = calculus.gradient(u, g), calculus.gradient(v, g)
    val = 0j
    for k in range(g.ndim):
        val += np.sum(calculus.face_average(As[..., k, k], g, k) * gu[k] * np.conj(gv[k]))
        for j in range(g.ndim):
            if j != k:
                val += np.sum(As[..., j, k] * _central(u, k, g) * np.conj(_central(v, j, g)))
    drift = sum(b[..., k] * _central(u, k, g) + _central(b[..., k] * u, k, g) for k in range(g.ndim))
    drift = 0.5 * drift - 0.5 * calculus.field_divergence(b, g) * u
    val -= np.sum(drift * np.conj(v))
    val -= np.sum(coeffs.c * u * np.conj(v))
    val *= w
    if coeffs.has_atoms:
        for a in coeffs.atoms["a"]:
            i = a.node(g)
            val += a.weight * gu[0][i + 1] * np.conj(gv[0][i + 1])
        for a in coeffs.atoms["b"]:
            i = a.node(g)
            val -= a.weight * gu[0][i + 1] * np.conj(v[i])
        for a in coeffs.atoms["c"]:
            i = a.node(g)
            val -= a.weight * u[i] * np.conj(v[i])
    return complex(val)


def commutator_matrix(red: ReducedTriple) -> sp.csr_matrix:
    T = forms.commutator_matrix(red.btilde, red.grid)
    for a in red.btilde_atoms:
        T = T + forms.atom_commutator(float(np.real(a.weight)), a.at, red.grid)
    return T.tocsr()


def hermitian_from_triple(red: ReducedTriple) -> sp.csr_matrix:
    """``H - i T``: the Hermitian part of ``-L`` rebuilt from the real triple."""
    fm = schrodinger.assemble_triple(red)
    return (sp.csr_matrix(fm.H, dtype=complex) - 1j * commutator_matrix(red)).tocsr()


def triple_lambda_min(red: ReducedTriple) -> float:
    Hc = hermitian_from_triple(red)
    return linalg.smallest_eigenpair(Hc, mass=red.grid.cell_volume).value


# --------------------------------------------------------------- reports


@dataclass
class AccretivityReport:
    verdict: str
    method: str
    lambda_min: float | None = None
    tolerance: float | None = None
    p_psd: bool | None = None
    p_min_eig: float | None = None
    form_lambda_min: float | None = None
    theta: float | None = None
    epsilon: float | None = None
    K: float | None = None
    identity_error: float | None = None
    residual: float | None = None
    notes: list = field(default_factory=list)
    witnesses: dict = field(default_factory=dict)
    grid: dict | None = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise AccretivityError(f"unknown verdict {self.verdict!r}")

    def summary(self) -> dict[str, Any]:
        out = {k: getattr(self, k) for k in (
            "verdict", "method", "lambda_min", "tolerance", "p_psd", "p_min_eig",
            "form_lambda_min", "theta", "epsilon", "K", "identity_error", "residual")}
        out["notes"] = list(self.notes)
        out["grid"] = self.grid
        return out

    def to_json(self, witness_paths: dict | None = None, extra: dict | None = None) -> str:
        doc = self.summary()
        doc["witnesses"] = dict(witness_paths or {})
        if extra:
            doc.update(extra)
        return json.dumps(_finite(doc), indent=2, default=_jsonable)

    def to_text(self, witness_paths: dict | None = None) -> str:
        lines = []
        for k, v in self.summary().items():
            if v is None or k == "grid":
                continue
            if k == "notes":
                lines.extend(f"note: {n}" for n in v)
                continue
            lines.append(f"{k}: {_fmt(v)}")
        for k, p in (witness_paths or {}).items():
            lines.append(f"witness.{k}: {p}")
        return "\n".join(lines) + "\n"


def _finite(o):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, float) and not np.isfinite(o):
        return str(o)
    return o


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# ---------------------------------------------------------------- checks


def check_direct(L: SesquilinearMatrix, rtol: float | None = None) -> AccretivityReport:
    Hh = L.hermitian_part()
    w = L.weight
    tol = (NONNEG_RTOL if rtol is None else rtol) * linalg.matrix_norm(Hh) / w
    try:
        ep = linalg.smallest_eigenpair(Hh, mass=w)
    except linalg.EigenError as exc:
        return AccretivityReport("inconclusive", "direct", tolerance=tol, residual=exc.residual,
                                 notes=[f"eigensolver failed: {exc}"], grid=L.grid.to_dict())
    rep = AccretivityReport("accretive" if ep.value >= -tol else "not-accretive", "direct",
                            lambda_min=ep.value, tolerance=tol, residual=ep.residual,
                            grid=L.grid.to_dict())
    if ep.value < -tol:
        rep.witnesses["u"] = ep.vector.reshape(L.grid.shape)
    return rep


@dataclass
class PointwiseCheck:
    passed: bool
    min_eig: float
    node: tuple
    xi: np.ndarray


def check_pointwise_P(P, tol: float = 0.0) -> PointwiseCheck:
    """Smallest eigenvalue of ``P(x)`` over all nodes, with the worst node and direction."""
    P = np.asarray(P, dtype=float)
    if not np.allclose(P, np.swapaxes(P, -1, -2)):
        raise AccretivityError("P is not symmetric")
    ev, vec = np.linalg.eigh(P)
    low = ev[..., 0]
    idx = np.unravel_index(int(np.argmin(low)), low.shape)
    m = float(low[idx])
    return PointwiseCheck(m >= -tol, m, tuple(int(i) for i in idx), vec[idx][:, 0])


@dataclass
class CommutatorNorm:
    theta: float
    u: np.ndarray | None
    v: np.ndarray | None
    kernel_dim: int

    @property
    def passed(self) -> bool:
        return self.theta <= 1 + THETA_TOL


def commutator_norm(btilde, H, btilde_atoms=()) -> CommutatorNorm:
    """``theta = ||H^{-1/2} T H^{-1/2}||`` on the range of ``H``.

    ``btilde`` is a vector field on ``H.grid`` or an already assembled sparse
    antisymmetric matrix.
    """
    if sp.issparse(btilde):
        T = sp.csr_matrix(btilde)
    else:
        T = forms.commutator_matrix(btilde, H.grid)
        for a in btilde_atoms:
            T = T + forms.atom_commutator(float(np.real(a.weight)), a.at, H.grid)
    me = schrodinger.min_eig(H)
    if not me.nonnegative:
        raise AccretivityError(f"H is not positive semi-definite (lambda_min = {me.value:.3e})")
    wn = linalg.whitened_antisymmetric_norm(T, H.H)
    return CommutatorNorm(wn.value, wn.u, wn.v, wn.kernel_dim)


def identity_error(red: ReducedTriple, samples: int = 4, seed: int = 0) -> float | None:
    """Max relative gap between ``Re<-L u,u>`` and ``f^T H f + g^T H g + 2 f^T T g``."""
    coeffs = red.provenance.get("coefficients") if red.provenance else None
    if coeffs is None:
        return None
    L = assemble_L(coeffs)
    fm = schrodinger.assemble_triple(red)
    T = commutator_matrix(red)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        f = rng.standard_normal(fm.size)
        g = rng.standard_normal(fm.size)
        lhs = L.form(f + 1j * g, f + 1j * g).real
        rhs = fm.value(f) + fm.value(g) + 2 * f @ (T @ g)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst


def check_prop1(red: ReducedTriple, bounds: bool = False, rtol: float | None = None) -> AccretivityReport:
    g = red.grid
    pw = check_pointwise_P(red.P)
    fm = schrodinger.assemble_triple(red)
    rep = AccretivityReport("inconclusive", "prop1", p_psd=pw.passed, p_min_eig=pw.min_eig,
                            grid=g.to_dict())
    rep.identity_error = identity_error(red)
    try:
        me = schrodinger.min_eig(fm, rtol)
    except schrodinger.FormError as exc:
        rep.notes.append(str(exc))
        return rep
    rep.form_lambda_min, rep.tolerance = me.value, me.tolerance
    if not pw.passed:
        rep.witnesses["xi"] = pw.xi
        rep.notes.append(f"P has a negative eigenvalue {pw.min_eig:.3e} at node {pw.node}")
    if bounds:
        try:
            fb = schrodinger.form_bounds(red.P, red.sigma, g, p_atoms=red.p_atoms,
                                         sigma_atoms=red.sigma_atoms, reb_atoms=red.reb_atoms)
            rep.epsilon, rep.K = fb.epsilon, fb.K
        except (schrodinger.FormError, linalg.EigenError) as exc:
            rep.notes.append(f"form bounds unavailable: {exc}")
    if not me.nonnegative:
        rep.verdict = "not-accretive"
        rep.witnesses["u"] = np.real(me.witness).reshape(g.shape)
    else:
        cn = commutator_norm(commutator_matrix(red), fm)
        rep.theta = cn.theta
        if cn.passed:
            rep.verdict = "accretive"
        else:
            rep.verdict = "not-accretive"
            if cn.u is not None:
                s = np.sign(cn.u @ (commutator_matrix(red) @ cn.v)) or 1.0
                rep.witnesses["u"] = (cn.u - 1j * s * cn.v).reshape(g.shape)
    if rep.verdict == "accretive" and not pw.passed:
        rep.notes.append("discrete form accretive although P fails pointwise; grid too coarse to resolve it")
    return rep


def check(coeffs: CoefficientSet, bounds: bool = False,
          rtol: float | None = None) -> tuple[AccretivityReport, AccretivityReport]:
    """Run both routes; the caller decides how to combine them."""
    return (check_direct(assemble_L(coeffs), rtol),
            check_prop1(reduce(coeffs), bounds=bounds, rtol=rtol))


# ---------------------------------------------------------- gauge transform


def forward_gradient(lam, grid: GridSpec) -> np.ndarray:
    """First-order nodal gradient: forward differences, backward on the last node."""
    lam = np.asarray(lam, dtype=float)
    out = []
    for k, h in enumerate(grid.spacing):
        d = np.diff(lam, axis=k) / h
        last = [slice(None)] * lam.ndim
        last[k] = slice(-1, None)
        out.append(np.concatenate([d, d[tuple(last)]], axis=k))
    return np.stack(out, axis=-1)


@dataclass
class GaugeResult:
    triple: ReducedTriple
    form_lambda_min: float
    theta: float | None
    condition_a: bool
    condition_b: bool | None
    sole_condition: bool

    @property
    def passed(self) -> bool:
        return self.condition_a and (self.sole_condition or bool(self.condition_b))


def gauge_transform(red: ReducedTriple, lam=None, grad=None) -> ReducedTriple:
    """Triple of the operator seen through ``u = z exp(-i lam)``.

    ``(P, btilde - P grad lam, sigma + 2 btilde . grad lam - P grad lam . grad lam)``.
    The gradient is ``forward_gradient(lam)`` unless given explicitly.
    """
    g = red.grid
    if red.btilde_atoms:
        raise CoefficientError("gauge transform of drift atoms is not supported")
    if grad is None:
        grad = np.zeros(g.shape + (g.ndim,)) if lam is None else forward_gradient(lam, g)
    grad = np.asarray(grad, dtype=float)
    Pg = np.einsum("...jk,...k->...j", red.P, grad)
    bt = red.btilde - Pg
    sigma = red.sigma + 2 * np.sum(red.btilde * grad, axis=-1) - np.sum(Pg * grad, axis=-1)
    prov = {"source": "gauge_transform", "parent": red.provenance.get("source", "?")}
    return ReducedTriple(g, red.P, bt, sigma, red.p_atoms, (), red.sigma_atoms, red.reb_atoms,
                         red.ellipticity, prov)


def gauge_conditions(red: ReducedTriple, lam=None, grad=None, sole_rtol: float = 1e-12) -> GaugeResult:
    """Evaluate the two transformed conditions: nonnegative form and ``theta <= 1``."""
    tr = gauge_transform(red, lam, grad)
    fm = schrodinger.assemble_triple(tr)
    me = schrodinger.min_eig(fm)
    scale = max(float(np.abs(red.btilde).max(initial=0.0)), 1e-300)
    sole = float(np.abs(tr.btilde).max(initial=0.0)) <= sole_rtol * scale
    theta = None
    cond_b = None
    if me.nonnegative and not sole:
        theta = commutator_norm(tr.btilde, fm).theta
        cond_b = theta <= 1 + THETA_TOL
    return GaugeResult(tr, me.value, theta, me.nonnegative, cond_b, sole)
