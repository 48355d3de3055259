import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accretiv import catalog, coefficients as co
from accretiv.grid import GridSpec


def cplx(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_split_reassembles(rng):
    g = GridSpec.box([1.0] * 3, 8)
    A = cplx(rng, g.shape + (3, 3))
    As, Ac = co.split_symmetric(A)
    np.testing.assert_allclose(As + Ac, A, rtol=0, atol=1e-15)
    np.testing.assert_allclose(As, np.swapaxes(As, -1, -2))
    np.testing.assert_allclose(Ac, -np.swapaxes(Ac, -1, -2))
    As2, Ac2 = co.split_symmetric(As)
    np.testing.assert_array_equal(As2, As)
    assert not np.any(Ac2)


def test_split_log_rotation():
    g = GridSpec.box([2.0, 2.0], 16)
    As, Ac = co.split_symmetric(catalog.log_rotation(0.7, g).A)
    np.testing.assert_allclose(As, np.broadcast_to(np.eye(2), As.shape))
    L = 0.7 * catalog.log_window(g)
    np.testing.assert_allclose(Ac[..., 0, 1], 1j * L)
    np.testing.assert_allclose(Ac[..., 1, 0], -1j * L)


def test_identity_reduces_to_trivial_triple(square):
    red = co.reduce(co.CoefficientSet.constant(square))
    np.testing.assert_array_equal(red.P, np.broadcast_to(np.eye(2), red.P.shape))
    assert not np.any(red.btilde) and not np.any(red.sigma)
    assert red.ellipticity == (1.0, 1.0)


def test_log_rotation_triple():
    g = GridSpec.box([2.0, 2.0], 32)
    lam = 0.8
    red = co.reduce(catalog.log_rotation(lam, g))
    np.testing.assert_allclose(red.P, np.broadcast_to(np.eye(2), red.P.shape))
    assert np.abs(red.sigma).max() < 1e-6
    x1, x2 = g.coords()
    r2 = x1 ** 2 + x2 ** 2
    exact = 0.5 * lam * np.stack([-x2, x1], axis=-1) / r2[..., None]
    away = np.sqrt(r2) > 0.5
    err = np.abs(red.btilde - exact)[away].max() / np.abs(exact[away]).max()
    assert err < 0.02


def test_real_linear_drift_shifts_sigma():
    g = GridSpec.box([1.0, 1.0], 8)
    x1, _ = g.coords()
    b = np.zeros(g.shape + (2,))
    b[..., 0] = 2 * x1
    red = co.reduce(co.CoefficientSet(g, np.broadcast_to(np.eye(2), g.shape + (2, 2)), b, 3.0 * np.ones(g.shape)))
    np.testing.assert_allclose(red.sigma, 2.0, atol=1e-12)


def test_from_nondivergence_shift():
    g = GridSpec.box([1.0, 1.0], 8)
    x1, _ = g.coords()
    A = np.zeros(g.shape + (2, 2))
    A[..., 0, 0] = x1
    cs = co.from_nondivergence(A, np.zeros(g.shape + (2,)), np.zeros(g.shape), g)
    np.testing.assert_allclose(cs.b[..., 0], -1.0, atol=1e-12)
    np.testing.assert_allclose(cs.b[..., 1], 0.0, atol=1e-12)
    ident = co.from_nondivergence(np.broadcast_to(np.eye(2), g.shape + (2, 2)),
                                  np.ones(g.shape + (2,)), np.zeros(g.shape), g)
    np.testing.assert_allclose(ident.b, 1.0, atol=1e-13)


def test_general_form_gradient_drift():
    g = GridSpec.box([2 * np.pi] * 2, 16, boundary="periodic", centered=False)
    x1, x2 = g.coords()
    phi = np.sin(x1) * np.cos(2 * x2)
    b2 = np.stack([np.cos(x1) * np.cos(2 * x2), -2 * np.sin(x1) * np.sin(2 * x2)], axis=-1)
    I = np.broadcast_to(np.eye(2), g.shape + (2, 2))
    cs = co.reduce_general_form(I, np.zeros_like(b2), b2, np.zeros(g.shape), g)
    np.testing.assert_allclose(cs.c, -5 * phi, atol=1e-11)
    np.testing.assert_allclose(cs.b, b2)
    const = co.reduce_general_form(I, 0 * b2, np.ones_like(b2), np.ones(g.shape), g)
    np.testing.assert_allclose(const.c, 1.0, atol=1e-12)


def test_atoms_rejected_in_2d(square):
    with pytest.raises(co.CoefficientError):
        co.CoefficientSet.constant(square, atoms={"c": [(0.1, 1.0)]})


def test_atom_must_be_inside():
    g = GridSpec.interval(0.0, 1.0, 10)
    with pytest.raises(co.CoefficientError):
        co.CoefficientSet.constant(g, atoms={"a": [(1.0, 1.0)]})


def test_atoms_propagate():
    g = GridSpec.interval(0.0, 1.0, 10)
    cs = co.CoefficientSet.constant(g, atoms={"a": [(0.5, 2.0)], "b": [(0.5, 1j)], "c": [(0.5, -2.0)]})
    red = co.reduce(cs)
    assert red.p_atoms[0].weight == 2.0
    assert red.btilde_atoms[0].weight == 0.5
    assert red.sigma_atoms[0].weight == -2.0
    assert red.reb_atoms == ()


def test_mollifier_rejects_small_radius():
    with pytest.raises(co.CoefficientError):
        co.mollifier_weights(0.1, 0.06)


def test_mollify_constant_and_mean(rng):
    g = GridSpec.box([1.0, 1.0], 16, boundary="periodic")
    np.testing.assert_allclose(co.mollify(np.full(g.shape, 3.0), 0.2, g), 3.0)
    f = rng.standard_normal(g.shape)
    assert co.mollify(f, 0.2, g).mean() == pytest.approx(f.mean(), abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jensen_nodewise(seed):
    r = np.random.default_rng(seed)
    g = GridSpec.box([1.0, 1.0], 16, boundary="periodic")
    p = r.uniform(0, 2, g.shape) * (r.uniform(size=g.shape) > 0.3)
    b = r.standard_normal(g.shape)
    delta, eps = 1e-3, 0.15
    lhs = co.mollify(b, eps, g) ** 2
    rhs = (co.mollify(p, eps, g) + delta) * co.mollify(b ** 2 / (p + delta), eps, g)
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-14)


def test_mollify_commutes_with_reduce(rng):
    g = GridSpec.box([1.0, 1.0], 16, boundary="periodic")
    cs = catalog.random_coefficients(rng, g)
    a = co.reduce(co.mollify_coefficients(cs, 0.15))
    b = co.reduce(cs)
    np.testing.assert_allclose(a.P, co.mollify(b.P, 0.15, g), atol=1e-12)
    np.testing.assert_allclose(a.btilde, co.mollify(b.btilde, 0.15, g), atol=1e-10)
    np.testing.assert_allclose(a.sigma, co.mollify(b.sigma, 0.15, g), atol=1e-10)
