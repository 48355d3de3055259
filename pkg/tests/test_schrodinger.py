import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from accretiv import linalg, schrodinger as sc
from accretiv.coefficients import Atom
from accretiv.grid import GridSpec


def eye_field(g):
    return np.broadcast_to(np.eye(g.ndim), g.shape + (g.ndim, g.ndim)).copy()


def lam1(g):
    """Smallest Dirichlet eigenvalue of the cell-centred zero-extension Laplacian."""
    return sum(4 / h ** 2 * np.sin(np.pi / (2 * (N + 1))) ** 2 for N, h in zip(g.points, g.spacing))


def test_laplacian_lambda_min_closed_form():
    g = GridSpec.interval(0.0, 1.0, 50)
    me = sc.min_eig(sc.assemble(eye_field(g), np.zeros(g.shape), g))
    assert me.value == pytest.approx(lam1(g), rel=1e-10)
    assert me.nonnegative


def test_constant_sigma_changes_sign_at_lambda1():
    g = GridSpec.box([1.0, 1.0], 12)
    P = eye_field(g)
    l1 = lam1(g)
    for kappa, sign in ((0.99 * l1, 1), (1.01 * l1, -1)):
        me = sc.min_eig(sc.assemble(P, np.full(g.shape, kappa), g))
        assert np.sign(me.value) == sign
        assert me.value == pytest.approx(l1 - kappa, rel=1e-8)


def test_min_eig_small_matrices(rng):
    assert sc.min_eig(np.diag([1.0, 2.0, 3.0])).value == pytest.approx(1.0)
    M = rng.standard_normal((50, 50))
    M = M + M.T
    assert sc.min_eig(M).value == pytest.approx(np.linalg.eigvalsh(M)[0], rel=1e-10)
    with pytest.raises(sc.FormError):
        sc.min_eig(np.triu(M))


def test_rejects_nonsymmetric_P_and_periodic(square, rng):
    P = rng.standard_normal(square.shape + (2, 2))
    with pytest.raises(sc.FormError):
        sc.assemble(P, np.zeros(square.shape), square)
    per = square.with_boundary("periodic")
    with pytest.raises(sc.FormError):
        sc.assemble(eye_field(per), np.zeros(per.shape), per)


def test_atom_pair_form_value():
    # p = 2 delta, sigma = -2 delta: value 2 s^2 + 2 on h(x0) = 1 with slope s
    g = GridSpec.interval(0.0, 1.0, 10)
    x0, s = 0.45, 3.0
    fm = sc.assemble(np.zeros(g.shape + (1, 1)), np.zeros(g.shape), g,
                     p_atoms=(Atom(x0, 2.0),), sigma_atoms=(Atom(x0, -2.0),))
    i = g.nearest_node(x0)
    h = np.zeros(g.shape)
    h[i], h[i + 1] = 1.0, 1.0 + s * g.spacing[0]
    assert fm.value(h) == pytest.approx(2 * s ** 2 + 2)
    assert fm.stencil_value(h) == pytest.approx(2 * s ** 2 + 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_stencil_matches_matrix(n, seed):
    r = np.random.default_rng(seed)
    g = GridSpec.box([1.0] * n, 5)
    B = r.standard_normal(g.shape + (n, n))
    P = B @ np.swapaxes(B, -1, -2)
    sigma = r.standard_normal(g.shape)
    atoms = {}
    if n == 1:
        atoms = dict(p_atoms=(Atom(0.3, 1.5),), sigma_atoms=(Atom(0.7, -0.5),), reb_atoms=(Atom(0.1, 2.0),))
    fm = sc.assemble(P, sigma, g, **atoms)
    h = r.standard_normal(g.size)
    assert fm.value(h) == pytest.approx(fm.stencil_value(h), rel=1e-12, abs=1e-12)
    assert abs(fm.H - fm.H.T).max() == 0


def test_form_bounds_oracles():
    g = GridSpec.box([1.0, 1.0], 10)
    P = eye_field(g)
    fb = sc.form_bounds(P, np.zeros(g.shape), g)
    assert fb.epsilon == 1.0 and fb.K == 0.0
    fb = sc.form_bounds(P, np.full(g.shape, 0.5 * lam1(g)), g)
    assert fb.epsilon ** 2 == pytest.approx(0.5, rel=1e-8)
    assert fb.K == 0.0


def test_lower_bound_grows_with_box():
    Ks = []
    for L in (2.0, 4.0, 8.0):
        g = GridSpec.box([L, L], 16)
        r2 = g.radius() ** 2
        fb = sc.form_bounds(eye_field(g), -r2, g)
        assert fb.epsilon == 1.0
        Ks.append(fb.K)
    assert Ks[0] < Ks[1] < Ks[2]
    assert Ks[2] > 10 * Ks[0]


def test_singular_stiffness_reported():
    g = GridSpec.interval(0.0, 1.0, 8)
    with pytest.raises(sc.FormError):
        sc.form_bounds(np.zeros(g.shape + (1, 1)), np.zeros(g.shape), g)


def test_verify_trivial_cases(square):
    P = eye_field(square)
    zero = np.zeros(square.shape + (2,))
    assert sc.verify_g_certificate(P, -np.ones(square.shape), zero, square).passed
    assert sc.verify_g_certificate(P, np.zeros(square.shape), zero, square).passed
    big = np.full(square.shape, 2 * lam1(square))
    assert not sc.verify_g_certificate(P, big, zero, square).passed


def test_inverse_square_certificate_converges():
    # g = -grad(phi)/phi for phi = |x|^{-1/2}; margin -> 0 away from 0 and the walls
    errs = []
    for N in (16, 32):
        g = GridSpec.box([2.0] * 3, N)
        x = np.stack(g.coords(), axis=-1)
        r2 = (x ** 2).sum(-1)
        cert = sc.verify_g_certificate(eye_field(g), 0.25 / r2, 0.5 * x / r2[..., None], g)
        m = cert.margin.reshape(g.shape)
        sel = (np.sqrt(r2) > 0.4) & (np.abs(x).max(-1) < 0.8)
        errs.append(np.abs(m[sel]).max())
    assert errs[1] < 0.6 * errs[0]


def test_construct_certificates():
    g = GridSpec.box([1.0, 1.0], 10)
    P = eye_field(g)
    l1 = lam1(g)
    for sigma in (0.0, 0.5 * l1):
        fm = sc.assemble(P, np.full(g.shape, sigma), g)
        cert = sc.construct_g_certificate(fm)
        assert cert.passed
        assert cert.min_margin == pytest.approx(l1 - sigma, rel=1e-6)
    with pytest.raises(sc.FormError):
        sc.construct_g_certificate(sc.assemble(P, np.full(g.shape, 2 * l1), g))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
def test_passing_certificate_implies_nonnegative(n, seed, t):
    # choose sigma so that a random g has margin exactly t everywhere
    r = np.random.default_rng(seed)
    g = GridSpec.box([1.0] * n, 6)
    B = r.standard_normal(g.shape + (n, n))
    P = B @ np.swapaxes(B, -1, -2) + 0.5 * np.eye(n)
    gvec = r.standard_normal(g.shape + (n,))
    base = sc.verify_g_certificate(P, np.zeros(g.shape), gvec, g)
    sigma = base.margin.reshape(g.shape) - t
    cert = sc.verify_g_certificate(P, sigma, gvec, g)
    assert cert.min_margin == pytest.approx(t, abs=1e-8 * max(1, np.abs(sigma).max()))
    fm = sc.assemble(P, sigma, g)
    me = sc.min_eig(fm)
    assert me.value >= t - me.tolerance - 1e-8 * fm.norm()
