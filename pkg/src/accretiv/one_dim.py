"""One-dimensional accretivity: effective potential, Riccati certificates.

On an interval ``-L`` is accretive exactly when ``p = Re a >= 0`` and the
form ``<p h', h'> - <q h, h>`` is nonnegative, where

    q = Re c - (Re b)'/2 + (Im b)^2 / (4 p)      (0/0 = 0).

Nonnegativity is in turn witnessed by a Riccati certificate ``f`` with
``q <= f' - f^2/p``.  Two constructions are provided: forward shooting of
``f' = q + f^2/p`` (sufficiency) and ``f = -p phi'/phi`` from the discrete
ground state ``phi`` (necessity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import accretivity, calculus, linalg, schrodinger
from .coefficients import Atom, CoefficientSet, reduce
from .grid import GridSpec

BLOWUP_SCALE = 1e6


class OneDimError(ValueError):
    pass


@dataclass
class Coeffs1D:
    grid: GridSpec
    p: np.ndarray
    reb: np.ndarray
    imb: np.ndarray
    rec: np.ndarray
    atoms: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.grid.ndim != 1:
            raise OneDimError("Coeffs1D needs a one-dimensional grid")
        for name in ("p", "reb", "imb", "rec"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.shape).copy()
            setattr(self, name, v)
        # validation of atom positions happens in CoefficientSet
        self.atoms = self.to_coefficients().atoms

    @classmethod
    def from_coefficients(cls, cs: CoefficientSet) -> "Coeffs1D":
        return cls(cs.grid, cs.A[:, 0, 0].real, cs.b[:, 0].real, cs.b[:, 0].imag, cs.c.real,
                   dict(cs.atoms))

    def to_coefficients(self) -> CoefficientSet:
        A = self.p.astype(complex)[:, None, None]
        b = (self.reb + 1j * self.imb)[:, None]
        return CoefficientSet(self.grid, A, b, self.rec.astype(complex), dict(self.atoms))

    @property
    def x(self) -> np.ndarray:
        return self.grid.axis_nodes(0)


@dataclass
class EffectivePotential:
    q: np.ndarray
    sigma_atoms: tuple
    reb_atoms: tuple
    p_atoms: tuple
    btilde_atoms: tuple
    flagged: np.ndarray  # nodes where (Im b)^2 > 0 but p = 0

    @property
    def ok(self) -> bool:
        return not self.flagged.size


def _ratio(num, den):
    """``num / den`` with the convention ``0/0 = 0`` (and ``x/0 = inf``)."""
    out = np.zeros_like(num, dtype=float)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    out[(~nz) & (num != 0)] = np.inf
    return out


def effective_potential(c1: Coeffs1D) -> EffectivePotential:
    """``q = Re c - (Re b)'/2 + (Im b)^2 / (4p)``, the potential of ``<p h', h'> - <q h, h>``.

    The imaginary drift enters with a plus sign: it can only make the form
    worse (eliminate it by the gauge ``lambda' = btilde / p``).
    """
    g = c1.grid
    dreb = calculus.derivative(c1.reb, 0, g)
    ratio = _ratio(c1.imb ** 2, 4 * c1.p)
    flagged = np.flatnonzero(~np.isfinite(ratio))
    q = c1.rec - 0.5 * dreb + np.where(np.isfinite(ratio), ratio, 0.0)
    at = c1.atoms
    return EffectivePotential(
        q=q,
        sigma_atoms=tuple(Atom(a.at, a.weight.real) for a in at["c"] if a.weight.real != 0),
        reb_atoms=tuple(Atom(a.at, a.weight.real) for a in at["b"] if a.weight.real != 0),
        p_atoms=tuple(Atom(a.at, a.weight.real) for a in at["a"] if a.weight.real != 0),
        btilde_atoms=tuple(Atom(a.at, 0.5 * a.weight.imag) for a in at["b"] if a.weight.imag != 0),
        flagged=flagged,
    )


def n_form(c1: Coeffs1D, ep: EffectivePotential | None = None) -> schrodinger.FormMatrix:
    """The form ``<p h', h'> - <q h, h>`` with the atoms of ``a``, ``Re b`` and ``c``."""
    ep = ep or effective_potential(c1)
    P = c1.p[:, None, None]
    return schrodinger.assemble(P, ep.q, c1.grid, ep.p_atoms, ep.sigma_atoms, ep.reb_atoms)


def check_accretive_1d(c1: Coeffs1D, rtol: float | None = None) -> accretivity.AccretivityReport:
    """Form test (with Riccati potential) cross-checked against the direct test."""
    g = c1.grid
    direct = accretivity.check_direct(accretivity.assemble_L(c1.to_coefficients()), rtol)
    rep = accretivity.AccretivityReport("inconclusive", "one-dim", lambda_min=direct.lambda_min,
                                        tolerance=direct.tolerance, grid=g.to_dict())
    rep.witnesses.update(direct.witnesses)
    pmin = int(np.argmin(c1.p))
    rep.p_min_eig, rep.p_psd = float(c1.p[pmin]), bool(c1.p[pmin] >= 0)
    if not rep.p_psd:
        rep.verdict = "not-accretive"
        rep.notes.append(f"p < 0 at node {pmin} (x = {c1.x[pmin]:.6g})")
        return rep
    ep = effective_potential(c1)
    if not ep.ok:
        rep.verdict = "not-accretive"
        rep.notes.append(f"(Im b)^2/p is not finite at nodes {ep.flagged[:8].tolist()}")
        return rep
    if ep.btilde_atoms:
        # a drift atom with imaginary weight cannot be folded into q; use the
        # commutator form of the triple instead.
        pr = accretivity.check_prop1(reduce(c1.to_coefficients()), rtol=rtol)
        form_verdict, rep.form_lambda_min, rep.theta = pr.verdict, pr.form_lambda_min, pr.theta
        rep.notes.append("form path: commutator test (imaginary drift atoms present)")
    else:
        me = schrodinger.min_eig(n_form(c1, ep), rtol)
        rep.form_lambda_min = me.value
        form_verdict = "accretive" if me.nonnegative else "not-accretive"
        if not me.nonnegative and "u" not in rep.witnesses:
            rep.witnesses["h"] = np.real(me.witness)
    if form_verdict == direct.verdict:
        rep.verdict = form_verdict
    else:
        rep.notes.append(f"form path says {form_verdict}, direct path says {direct.verdict}")
    return rep


# ------------------------------------------------------------------ Riccati


@dataclass
class RiccatiCertificate:
    x: np.ndarray  # abscissae of f
    f: np.ndarray
    margin_x: np.ndarray
    margin: np.ndarray  # f' - f^2/p - q
    provenance: str
    tolerance: float
    info: dict = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        return float(self.margin.min()) if self.margin.size else 0.0

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.tolerance and bool(np.all(np.isfinite(self.f)))


@dataclass
class ShootingResult:
    survived: bool
    f0: float
    certificate: RiccatiCertificate | None = None
    blowup_at: float | None = None
    steps: int = 0


def _as_function(v, grid: GridSpec | None) -> Callable:
    if callable(v):
        return v
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        c = float(v)
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if grid is None:
        raise OneDimError("a grid is needed to interpolate sampled coefficients")
    return CubicSpline(grid.axis_nodes(0), v, extrapolate=True)


def _rk4(rhs, x, f, h):
    k1 = rhs(x, f)
    k2 = rhs(x + h / 2, f + h * k1 / 2)
    k3 = rhs(x + h / 2, f + h * k2 / 2)
    k4 = rhs(x + h, f + h * k3)
    return f + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def riccati_shoot(q, p, f0: float, interval: tuple[float, float] | None = None,
                  grid: GridSpec | None = None, direction: str = "forward",
                  rtol: float = 1e-10, jumps=(), h_grid: float | None = None) -> ShootingResult:
    """Integrate ``f' = q + f^2/p`` across the interval starting from ``f0``.

    ``q`` and ``p`` are callables or arrays sampled on ``grid``.  ``jumps``
    lists ``(x0, weight)`` point masses of ``q`` (``f`` jumps by ``weight``).
    Blow-up is declared once ``|f| > 1e6 / h_grid``; the result then carries
    the conjugate point instead of a certificate.
    """
    if interval is None:
        if grid is None:
            raise OneDimError("need an interval or a grid")
        interval = (grid.lower[0], grid.upper[0])
    a, b = map(float, interval)
    if direction not in ("forward", "backward"):
        raise OneDimError("direction must be 'forward' or 'backward'")
    if h_grid is None:
        h_grid = grid.spacing[0] if grid is not None else (b - a) / 1000
    qf, pf = _as_function(q, grid), _as_function(p, grid)

    def rhs(x, f):
        pv = float(pf(x))
        if pv <= 0:
            if f != 0:
                return np.inf
            return float(qf(x))
        return float(qf(x)) + f * f / pv

    s = 1.0 if direction == "forward" else -1.0
    x, end = (a, b) if s > 0 else (b, a)
    limit = BLOWUP_SCALE / h_grid
    pending = sorted(((float(x0), float(w)) for x0, w in jumps), key=lambda t: s * t[0])
    H = (b - a) / 256
    hmin = (b - a) * 1e-14
    xs, fs, mids = [x], [float(f0)], []
    f = float(f0)
    steps = 0
    while s * (end - x) > hmin:
        stop = end if not pending else pending[0][0]
        H = min(H, abs(stop - x))
        full = _rk4(rhs, x, f, s * H)
        half = _rk4(rhs, x, f, s * H / 2)
        two = _rk4(rhs, x + s * H / 2, half, s * H / 2)
        err = abs(two - full) / 15
        scale = rtol * (1 + max(abs(f), abs(two)))
        if not np.isfinite(err) or err > scale:
            H /= 2
            if H < hmin:
                return ShootingResult(False, f0, blowup_at=x, steps=steps)
            continue
        x, f = x + s * H, two
        steps += 1
        xs.append(x)
        fs.append(f)
        mids.append(half)
        if abs(f) > limit:
            return ShootingResult(False, f0, blowup_at=x, steps=steps)
        if pending and abs(x - pending[0][0]) <= hmin:
            f += s * pending.pop(0)[1]
            xs.append(x)
            fs.append(f)
            mids.append(np.nan)
        if err < scale / 32:
            H *= 2
    xs, fs, mids = np.array(xs), np.array(fs), np.array(mids)
    cert = _shooting_certificate(xs, fs, mids, qf, pf, f0)
    return ShootingResult(True, f0, cert, steps=steps)


def _shooting_certificate(xs, fs, mids, qf, pf, f0) -> RiccatiCertificate:
    """Step-averaged defect of ``f' - f^2/p - q`` (Simpson on each accepted step)."""
    dx = np.diff(xs)
    ok = (dx != 0) & np.isfinite(mids)
    x0, x1, fm = xs[:-1][ok], xs[1:][ok], mids[ok]
    f0s, f1s = fs[:-1][ok], fs[1:][ok]
    xm = 0.5 * (x0 + x1)

    def g(x, f):
        pv = pf(x)
        return qf(x) + np.where(pv > 0, f * f / np.where(pv > 0, pv, 1.0), 0.0)

    avg = (g(x0, f0s) + 4 * g(xm, fm) + g(x1, f1s)) / 6
    margin = (f1s - f0s) / (x1 - x0) - avg
    scale = float(np.max(np.abs(avg))) if avg.size else 1.0
    lo, hi = np.minimum(x0, x1), np.maximum(x0, x1)
    return RiccatiCertificate(xs, fs, 0.5 * (lo + hi), margin, "shooting", 1e-6 * max(scale, 1.0),
                              {"f0": float(f0)})


def riccati_from_groundstate(c1: Coeffs1D) -> RiccatiCertificate:
    """``f = -p phi'/phi`` from the discrete ground state of the form.

    On the grid ``f`` lives on the interior faces; the margin is the discrete
    ``f' - f^2/p - q``, which equals ``lambda_min`` at every node.
    """
    ep = effective_potential(c1)
    if not ep.ok:
        raise OneDimError("(Im b)^2/p is not locally finite; no certificate")
    if ep.btilde_atoms:
        raise OneDimError("imaginary drift atoms are not covered by the Riccati form")
    fm = n_form(c1, ep)
    try:
        cert = schrodinger.construct_g_certificate(fm)
    except schrodinger.FormError as exc:
        raise OneDimError(str(exc)) from exc
    g = c1.grid
    graph = cert.graph
    face = np.minimum(graph.i, graph.j) + 1  # face index between the two nodes
    pface = calculus.face_average(c1.p, g, 0)[face]
    xf = g.lower[0] + face * g.spacing[0]
    f = pface * cert.g * np.sign(graph.direction[:, 0])
    m, M = float(c1.p.min()), float(c1.p.max())
    info = {"p_min": m, "p_max": M, "lambda_min": float(cert.margin.min()),
            "schwarz_applicable": cert.schwarz_applicable, "chain_margin": cert.chain_margin}
    if m <= 0:
        info["warning"] = "p is not bounded below by a positive constant"
    rc = RiccatiCertificate(xf, f, c1.x, cert.margin.ravel(), "ground-state", cert.tolerance, info)
    if not cert.passed:
        rc.info["warning"] = "discrete Schwarz chain failed on the witness"
    return rc


def shooting_candidates(c1: Coeffs1D) -> list[float]:
    """Starting values tried by :func:`riccati_search`."""
    out = [0.0, 1.0, -1.0, 10.0, -10.0]
    try:
        gs = riccati_from_groundstate(c1)
        out.append(float(gs.f[0]))
    except OneDimError:
        pass
    return out


def riccati_search(c1: Coeffs1D, candidates=None) -> ShootingResult:
    """Shoot from every candidate ``f0`` at the left end; return the first survivor."""
    ep = effective_potential(c1)
    if ep.p_atoms or ep.reb_atoms or ep.btilde_atoms:
        raise OneDimError("shooting handles atoms of c only")
    jumps = [(a.at, a.weight) for a in ep.sigma_atoms]
    last = None
    for f0 in candidates if candidates is not None else shooting_candidates(c1):
        res = riccati_shoot(ep.q, c1.p, f0, grid=c1.grid, jumps=jumps)
        if res.survived:
            return res
        if last is None or (res.blowup_at or 0) > (last.blowup_at or 0):
            last = res
    return last


# ------------------------------------------------------------------- Hardy


def hardy_coefficients(kappa: float, delta: float = 1e-3, points: int = 4000,
                       upper: float = 1.0) -> Coeffs1D:
    """``p = 1``, ``c = kappa / x^2`` on ``(delta, upper)``."""
    g = GridSpec.interval(delta, upper, points)
    x = g.axis_nodes(0)
    return Coeffs1D(g, 1.0, 0.0, 0.0, kappa / x ** 2)


def critical_coupling(c1: Coeffs1D, shape) -> float:
    """Smallest ``kappa >= 0`` at which the form of ``c1`` with ``q + kappa * shape`` stops being positive.

    ``shape`` must be a nonnegative field.  Computed from the pencil
    ``(shape mass matrix, form matrix)``.
    """
    shape = np.asarray(shape, dtype=float)
    if np.any(shape < 0):
        raise OneDimError("shape must be nonnegative")
    fm = n_form(c1)
    me = schrodinger.min_eig(fm)
    if me.value <= me.tolerance:
        return 0.0
    Q = schrodinger.forms.mass_matrix(shape, c1.grid)
    top = linalg.largest_pencil_eigenvalue(Q, fm.H)
    return float("inf") if top.value <= 0 else 1.0 / top.value


def hardy_threshold_closed_form(delta: float, upper: float = 1.0) -> float:
    """Continuum critical coupling of ``-h'' - kappa h / x^2`` with Dirichlet ends."""
    return 0.25 + (np.pi / np.log(upper / delta)) ** 2
