import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsexit.grid import make_grid
from nlsexit.ground_state import solve_ground_state
from nlsexit.linearized import (
    LinearFlow,
    QuadFormContext,
    apply_L,
    coercivity_probe,
    lambda1_power_iteration,
    project_Bperp,
    quad_form_F,
    random_smooth_field,
    solve_spectrum,
)
from nlsexit.observables import observables

LAMBDA1_P7 = 2.9050883778425023  # dense solve at N=2048, L=20 (frozen)


def test_lambda1_frozen(sb):
    assert abs(sb.lambda1 - LAMBDA1_P7) < 1e-10


def test_certificates(sb, gs, grid):
    r = sb.residuals
    assert r["eig_plus"] <= 1e-8 and r["eig_minus"] <= 1e-8
    assert r["kernel_iQ"] <= 1e-8
    assert r["kernel_dQ1"] <= 1e-6
    c = sb.certificates
    assert abs(c["F_epem"] + 1) < 1e-12
    assert abs(c["F_epep"]) <= 1e-10 and abs(c["F_emem"]) <= 1e-10
    assert abs(c["Re_e_Q"]) <= 1e-8


def test_eigenvector_sign_and_symmetry(sb, grid):
    v = sb.e_plus.real
    mirror = np.roll(v[::-1], 1)
    assert np.max(np.abs(v - mirror)) < 1e-10 * np.max(np.abs(v))


def test_F_matches_duals(sb, ctx, grid):
    f = random_smooth_field(grid, np.random.default_rng(3))
    assert sb.F_with(f, +1) == pytest.approx(quad_form_F(f, sb.e_plus, ctx), abs=1e-12)
    assert sb.F_with(f, -1) == pytest.approx(quad_form_F(f, sb.e_minus, ctx), abs=1e-12)


def test_flipped_keeps_normalization(sb):
    fl = sb.flipped()
    assert np.array_equal(fl.e_plus, -sb.e_plus)
    assert fl.normalization == sb.normalization


def test_power_iteration_agrees(ctx, sb):
    lam, hist = lambda1_power_iteration(ctx)
    assert abs(lam - sb.lambda1) <= 1e-6 * sb.lambda1


def test_linear_flow_grows_e_minus(ctx, sb, grid):
    flow = LinearFlow(ctx, 1e-3)
    h = sb.e_minus.copy()
    for _ in range(1000):
        h = flow.advance(h)
    assert grid.norm(h - np.exp(sb.lambda1) * sb.e_minus) < 1e-6 * grid.norm(h)


# cubic 3D: odd extension of r*f on a periodic Fourier grid, dense L-L+ (frozen)
LAMBDA1_3D_CUBIC = 5.49941


def test_radial_spectrum():
    lams = []
    for N in (512, 1024):
        g = make_grid(3, 15, N)
        sb3 = solve_spectrum(QuadFormContext(solve_ground_state(g, 3)))
        assert len(sb3.kernel) == 1
        lams.append(sb3.lambda1)
    assert abs(lams[1] - LAMBDA1_3D_CUBIC) < 0.02
    assert abs(lams[1] - LAMBDA1_3D_CUBIC) < abs(lams[0] - LAMBDA1_3D_CUBIC)


def test_coercivity_deterministic(sb):
    a = coercivity_probe(sb, trials=100, seed=7)
    b = coercivity_probe(sb, trials=100, seed=7)
    assert a.c_min > 0
    assert a.samples == b.samples
    with pytest.raises(ValueError):
        coercivity_probe(sb, trials=50)


def test_projection_lands_in_Bperp(sb, grid, ctx):
    f = random_smooth_field(grid, np.random.default_rng(0))
    g, coeffs = project_Bperp(f, sb)
    assert abs(quad_form_F(g, sb.e_plus, ctx)) < 1e-10
    assert abs(quad_form_F(g, sb.e_minus, ctx)) < 1e-10
    for k in sb.kernel:
        assert abs(grid.inner(g, k)) < 1e-10 * grid.norm(f) * grid.norm(k)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_F_symmetric(ctx, s1, s2):
    g = ctx.grid
    f = random_smooth_field(g, np.random.default_rng(s1))
    h = random_smooth_field(g, np.random.default_rng(s2))
    a, b = quad_form_F(f, h, ctx), quad_form_F(h, f, ctx)
    assert abs(a - b) <= 1e-9 * (abs(a) + 1)


def test_L_is_real_linear(ctx, grid):
    f = random_smooth_field(grid, np.random.default_rng(1))
    h = random_smooth_field(grid, np.random.default_rng(2))
    lhs = apply_L(2.0 * f - 0.5 * h, ctx)
    rhs = 2.0 * apply_L(f, ctx) - 0.5 * apply_L(h, ctx)
    assert grid.norm(lhs - rhs) < 1e-10 * grid.norm(lhs)


def test_energy_expansion_is_cubic(gs, ctx, grid):
    """E + M/2 expanded at Q: quadratic part is F(h, h), the rest is cubic."""
    p = gs.p
    f = random_smooth_field(grid, np.random.default_rng(5))
    f /= grid.h1_norm(f)
    base = gs.observables.energy + 0.5 * gs.observables.mass
    ratios = []
    for s in (1e-1, 1e-2, 1e-3):
        h = s * f
        o = observables(grid, gs.Q + h, p)
        gap = o.energy + 0.5 * o.mass - base - quad_form_F(h, h, ctx)
        ratios.append(abs(gap) / s**3)
    assert max(ratios) < 10 * ratios[0] + 1e-6
