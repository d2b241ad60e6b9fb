import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from nlsexit.grid import GridError, make_grid


def test_uniform_line_grid():
    g = make_grid(1, 20, 1024)
    assert np.allclose(np.diff(g.x), 40 / 1024, rtol=0, atol=1e-13)
    assert np.all(g.weights == 40 / 1024)


def test_weights_sum_to_domain_length():
    g = make_grid(1, 10, 1024)
    assert abs(g.weights.sum() - 20) <= 1e-12 * 20


def test_radial_weights_sum_to_ball_volume():
    g = make_grid(3, 15, 512)
    vol = 4 * np.pi / 3 * 15**3
    assert abs(g.weights.sum() - vol) <= 1e-12 * vol


def test_gaussian_quadrature():
    g = make_grid(1, 10, 1024)
    exact = np.sqrt(np.pi) * erf(10)
    assert abs(g.integrate(np.exp(-g.x**2)) - exact) <= 1e-10 * exact


@pytest.mark.parametrize("dim,L,N", [(1, 20, 1000), (1, 20, 128), (2, 20, 1024), (1, 0, 1024), (3, -1, 512)])
def test_rejects_bad_grids(dim, L, N):
    with pytest.raises(GridError):
        make_grid(dim, L, N)


def test_check_shape():
    g = make_grid(1, 10, 256)
    with pytest.raises(GridError):
        g.check(np.zeros(255))


def test_derivative_of_gaussian():
    g = make_grid(1, 10, 1024)
    f = np.exp(-g.x**2)
    assert np.max(np.abs(g.derivative(f) + 2 * g.x * f)) < 1e-12


def test_radial_laplacian_second_order():
    errs = []
    for N in (256, 512):
        g = make_grid(3, 12, N)
        r = g.x
        f = np.exp(-(r**2))
        exact = (4 * r**2 - 6) * f
        errs.append(np.max(np.abs(g.laplacian(f)[: N // 2] - exact[: N // 2])))
    assert 3.5 < errs[0] / errs[1] < 4.5


@pytest.mark.parametrize("dim,N", [(1, 512), (3, 512)])
def test_helmholtz_solve_inverts(dim, N):
    g = make_grid(dim, 10, N)
    f = np.exp(-g.x**2) * (1 + 0.3j)
    u = g.helmholtz_solve(f)
    assert g.norm(-g.laplacian(u) + u - f) < 1e-10 * g.norm(f)


@pytest.mark.parametrize("dim", [1, 3])
def test_free_propagator_unitary_and_group(dim):
    g = make_grid(dim, 10, 512)
    u = np.exp(-g.x**2) * (1 + 1j * g.x)
    a, b = g.free_propagator(0.3), g.free_propagator(0.2)
    c = g.free_propagator(0.5)
    assert abs(g.norm(a(u)) - g.norm(u)) < 1e-12
    assert g.norm(a(b(u)) - c(u)) < 1e-11


def test_shift_translates():
    g = make_grid(1, 20, 1024)
    f = np.exp(-g.x**2)
    assert np.max(np.abs(g.shift(f, 0.5) - np.exp(-((g.x + 0.5) ** 2)))) < 1e-12


def test_hdot_norm_zero_is_l2():
    g = make_grid(1, 10, 512)
    f = np.exp(-g.x**2)
    assert abs(g.hdot_norm(f, 0) - g.norm(f)) < 1e-12
    assert abs(g.hdot_norm(f, 1) ** 2 - g.kinetic(f)) < 1e-12


fields = st.lists(st.floats(-1, 1), min_size=8, max_size=8)


@settings(max_examples=30, deadline=None)
@given(fields, fields, st.sampled_from([1, 3]))
def test_laplacian_self_adjoint(cu, cv, dim):
    g = make_grid(dim, 10, 256)
    basis = [np.exp(-((g.x - 0.3 * j) ** 2)) * (1 if dim == 3 else np.cos(j * g.x)) for j in range(8)]
    u = sum(c * b for c, b in zip(cu, basis))
    v = sum(c * b for c, b in zip(cv, basis))
    lhs, rhs = g.inner(g.laplacian(u), v), g.inner(u, g.laplacian(v))
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))
    assert g.kinetic(u) >= -1e-14
