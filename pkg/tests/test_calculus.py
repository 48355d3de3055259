import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accretiv import calculus
from accretiv.grid import GridSpec


def test_divergence_is_minus_gradient_adjoint(rng):
    g = GridSpec.box([1.0, 2.0], [6, 7])
    u = rng.standard_normal(g.shape)
    F = [rng.standard_normal(g.face_shape(k)) for k in range(2)]
    lhs = sum(np.sum(a * b) for a, b in zip(calculus.gradient(u, g), F))
    rhs = -np.sum(u * calculus.divergence(F, g))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_laplacian_of_dirichlet_mode():
    # sin(pi k x) sampled at cell centres on (0, 1) is an exact eigenvector
    g = GridSpec.interval(0.0, 1.0, 32)
    x = g.axis_nodes(0)
    u = np.sin(np.pi * x)
    h = g.spacing[0]
    lam = -(2 - 2 * np.cos(np.pi * h)) / h ** 2
    # zero extension puts the ghost value at x = -h/2, not at the mirror
    interior = slice(1, -1)
    np.testing.assert_allclose(calculus.laplacian(u, g)[interior], lam * u[interior], rtol=1e-12)


def test_derivative_exact_on_quartics():
    g = GridSpec.box([2.0, 2.0], [9, 11])
    x, y = g.coords()
    f = x ** 4 - 3 * x ** 2 * y + y ** 3
    np.testing.assert_allclose(calculus.derivative(f, 0, g), 4 * x ** 3 - 6 * x * y, atol=1e-11)
    np.testing.assert_allclose(calculus.derivative(f, 1, g), -3 * x ** 2 + 3 * y ** 2, atol=1e-11)


def test_periodic_derivative_spectral():
    g = GridSpec.box([2 * np.pi], [32], boundary="periodic", centered=False)
    x = g.axis_nodes(0)
    np.testing.assert_allclose(calculus.derivative(np.sin(3 * x), 0, g), 3 * np.cos(3 * x), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_poisson_inverts_laplacian(n, seed):
    r = np.random.default_rng(seed)
    g = GridSpec.box([1.0] * n, 8, boundary="periodic")
    rho = r.standard_normal(g.shape)
    u = calculus.poisson_periodic(rho, g)
    np.testing.assert_allclose(calculus.laplacian(u, g), rho - rho.mean(), atol=1e-10)
    assert abs(u.mean()) < 1e-12


def test_div_of_matrix_div_vanishes_for_skew(rng):
    g = GridSpec.box([1.0] * 3, 6, boundary="periodic")
    F = rng.standard_normal(g.shape + (3, 3))
    F = F - np.swapaxes(F, -1, -2)
    assert np.abs(calculus.periodic_divergence(calculus.matrix_div(F, g), g)).max() < 1e-10


def test_gradient_matrix_matches_array_version(rng):
    g = GridSpec.box([1.0, 1.0], [5, 6])
    u = rng.standard_normal(g.shape)
    for k in range(2):
        G = calculus.gradient_matrix(g, k)
        np.testing.assert_allclose(G @ u.ravel(), calculus.gradient(u, g)[k].ravel(), atol=1e-12)


def test_central_matrix_antisymmetric():
    g = GridSpec.box([1.0, 1.0], [5, 6])
    C = calculus.central_matrix(g, 1)
    assert abs(C + C.T).max() < 1e-14
