import json

import numpy as np
import pytest

from accretiv import accretivity as ac, catalog, coefficients as co, forms, schrodinger as sc
from accretiv.grid import GridSpec


def eye_field(g):
    return np.broadcast_to(np.eye(g.ndim), g.shape + (g.ndim, g.ndim)).copy()


def laplacian_set(g, **kw):
    return co.CoefficientSet.constant(g, **kw)


def test_laplacian_is_stiffness(square):
    L = ac.assemble_L(laplacian_set(square))
    K = forms.principal_matrix(eye_field(square), square)
    assert abs(-L.L - K).max() < 1e-12
    rep = ac.check_direct(L)
    assert rep.verdict == "accretive" and rep.lambda_min > 0


def test_constant_real_drift_is_skew(square):
    L = ac.assemble_L(laplacian_set(square, b=[0.7, -1.3]))
    K = forms.principal_matrix(eye_field(square), square)
    assert abs(L.hermitian_part() - K).max() < 1e-12


def test_constant_imaginary_drift_enters_as_commutator(square):
    # i beta . grad is Hermitian on complex vectors: it shows up as -iT
    cs = laplacian_set(square, b=[0.7j, -1.3j])
    red = co.reduce(cs)
    K = forms.principal_matrix(eye_field(square), square)
    T = ac.commutator_matrix(red)
    assert abs(ac.assemble_L(cs).hermitian_part() - (K - 1j * T)).max() < 1e-12
    assert abs(T).max() > 0


def test_stencil_form_matches_matrix(rng):
    g = GridSpec.box([1.0, 1.0], 6)
    cs = catalog.random_coefficients(rng, g)
    L = ac.assemble_L(cs)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    assert L.form(u.ravel(), v.ravel()) == pytest.approx(L.stencil_form(u, v), rel=1e-12)


def test_skew_part_absorbed(rng):
    g = GridSpec.box([1.0, 1.0], 7)
    cs = catalog.random_coefficients(rng, g)
    As, Ac = co.split_symmetric(cs.A)
    alt = co.CoefficientSet(g, As, cs.b - co.coefficient_div(Ac, g), cs.c)
    d = ac.assemble_L(cs).hermitian_part() - ac.assemble_L(alt).hermitian_part()
    assert abs(d).max() < 1e-12


def test_log_rotation_at_zero_is_accretive():
    g = GridSpec.box([2.0, 2.0], 16)
    direct, prop1 = ac.check(catalog.log_rotation(0.0, g))
    assert direct.verdict == prop1.verdict == "accretive"
    assert prop1.theta == 0.0


def test_large_potential_witness_is_ground_state():
    g = GridSpec.box([1.0, 1.0], 10)
    l1 = sc.min_eig(sc.assemble(eye_field(g), np.zeros(g.shape), g)).value
    rep = ac.check_direct(ac.assemble_L(laplacian_set(g, c=2 * l1)))
    assert rep.verdict == "not-accretive"
    assert rep.lambda_min == pytest.approx(-l1, rel=1e-8)
    x1, x2 = g.coords()
    phi = np.cos(np.pi * x1) * np.cos(np.pi * x2)
    w = rep.witnesses["u"]
    overlap = abs(np.vdot(w, phi)) / (np.linalg.norm(w) * np.linalg.norm(phi))
    assert overlap > 0.99


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_atom_example_accretive(p):
    g = GridSpec.interval(0.0, 1.0, 40)
    cs = co.CoefficientSet.constant(g, A=[[p]], atoms={"a": [(0.5, 2.0)], "b": [(0.5, 1j)],
                                                       "c": [(0.5, -2.0)]})
    direct, prop1 = ac.check(cs)
    assert direct.verdict == "accretive"
    assert prop1.verdict == "accretive"


def test_pointwise_P_failure_witness():
    g = GridSpec.box([2.0, 2.0], 8)
    x1, _ = g.coords()
    P = np.zeros(g.shape + (2, 2))
    P[..., 0, 0] = 1.0
    P[..., 1, 1] = x1
    pw = ac.check_pointwise_P(P)
    assert not pw.passed
    assert x1[pw.node] < 0
    np.testing.assert_allclose(np.abs(pw.xi), [0.0, 1.0], atol=1e-12)
    assert ac.check_pointwise_P(eye_field(g)).min_eig == 1.0


def test_commutator_trivial_and_homogeneous(rng):
    g = GridSpec.box([1.0, 1.0], 6)
    fm = sc.assemble(eye_field(g), np.zeros(g.shape), g)
    assert ac.commutator_norm(np.zeros(g.shape + (2,)), fm).theta == 0.0
    b = rng.standard_normal(g.shape + (2,))
    t1 = ac.commutator_norm(b, fm).theta
    assert ac.commutator_norm(2.5 * b, fm).theta == pytest.approx(2.5 * t1, rel=1e-10)
    T = forms.commutator_matrix(b, g)
    assert abs(T + T.T).max() == 0


def test_commutator_rejects_indefinite_H():
    g = GridSpec.interval(0.0, 1.0, 8)
    fm = sc.assemble(eye_field(g), np.full(g.shape, 1e4), g)
    with pytest.raises(ac.AccretivityError):
        ac.commutator_norm(np.ones(g.shape + (1,)), fm)


def test_commutator_monte_carlo_lower_bound(rng):
    g = GridSpec.interval(0.0, 1.0, 4)
    fm = sc.assemble(eye_field(g), np.zeros(g.shape), g)
    b = rng.standard_normal(g.shape + (1,))
    theta = ac.commutator_norm(b, fm).theta
    T = forms.commutator_matrix(b, g).toarray()
    H = fm.H.toarray()
    # sample uniformly in the H-metric
    Linv = np.linalg.inv(np.linalg.cholesky(H)).T
    U = rng.standard_normal((100_000, 4)) @ Linv.T
    V = rng.standard_normal((100_000, 4)) @ Linv.T
    num = np.abs(np.einsum("ij,jk,ik->i", U, T, V))
    den = np.sqrt(np.einsum("ij,jk,ik->i", U, H, U) * np.einsum("ij,jk,ik->i", V, H, V))
    mc = (num / den).max()
    assert mc <= theta * (1 + 1e-9)
    assert mc >= 0.98 * theta


def test_random_agreement_and_identity(rng):
    for _ in range(25):
        g = GridSpec.box([1.0, 1.0], int(rng.integers(6, 9)))
        cs = catalog.random_coefficients(rng, g)
        direct, prop1 = ac.check(cs)
        assert direct.verdict == prop1.verdict
        assert prop1.identity_error < 1e-12
        if direct.verdict == "not-accretive":
            u = direct.witnesses["u"].ravel()
            assert ac.assemble_L(cs).form(u, u).real < 0


def test_hermitian_from_triple_matches_direct(rng):
    g = GridSpec.box([1.0, 1.0], 6)
    cs = catalog.random_coefficients(rng, g)
    H1 = ac.assemble_L(cs).hermitian_part()
    H2 = ac.hermitian_from_triple(co.reduce(cs))
    assert abs(H1 - H2).max() < 1e-12 * abs(H1).max()


def test_gauge_identity_and_1d_elimination(rng):
    g = GridSpec.interval(0.0, 1.0, 32)
    x = g.axis_nodes(0)
    p = 1.0 + 0.5 * np.sin(3 * x)
    bt = np.cos(2 * x)
    red = co.reduce(co.CoefficientSet(g, (p + 0j)[:, None, None], 2j * bt[:, None], np.zeros(g.shape)))
    same = ac.gauge_transform(red, np.zeros(g.shape))
    np.testing.assert_array_equal(same.btilde, red.btilde)
    np.testing.assert_array_equal(same.sigma, red.sigma)
    tr = ac.gauge_transform(red, grad=(bt / p)[:, None])
    np.testing.assert_allclose(tr.btilde, 0.0, atol=1e-14)
    np.testing.assert_allclose(tr.sigma, red.sigma + bt ** 2 / p, atol=1e-14)
    res = ac.gauge_conditions(red, grad=(bt / p)[:, None])
    assert res.sole_condition and res.passed


def test_gauge_preserves_lambda_min_in_the_limit():
    errs = []
    for N in (64, 128):
        g = GridSpec.interval(0.0, 1.0, N)
        x = g.axis_nodes(0)
        cs = co.CoefficientSet(g, (1.2 + 0.3j * np.cos(x))[:, None, None],
                               (1.0 + 2j * np.sin(2 * x))[:, None], 0.5 + 0j * x)
        red = co.reduce(cs)
        lam = np.sin(3 * x)
        errs.append(abs(ac.triple_lambda_min(red) - ac.triple_lambda_min(ac.gauge_transform(red, lam))))
    assert errs[1] < 0.5 * errs[0]


def test_report_json_is_strict():
    rep = ac.AccretivityReport("not-accretive", "prop1", theta=float("inf"))
    doc = json.loads(rep.to_json(witness_paths={"u": "u.afld"}))
    assert doc["theta"] == "inf" and doc["witnesses"]["u"] == "u.afld"
    with pytest.raises(ac.AccretivityError):
        ac.AccretivityReport("maybe", "direct")
