import time

import numpy as np
import pytest

from nlsexit.grid import make_grid
from nlsexit.ground_state import (
    CertificateError,
    ConvergenceError,
    bundle_from_profile,
    certify_ground_state,
    closed_form_Q_1d,
    elliptic_residual,
    solve_ground_state,
)
from nlsexit.observables import FieldError


def test_matches_closed_form(grid, gs):
    assert np.max(np.abs(gs.Q - closed_form_Q_1d(grid, 7))) <= 1e-8
    assert gs.elliptic_residual <= 1e-8 * grid.norm(gs.Q)


def test_runtime_small(grid):
    t0 = time.perf_counter()
    solve_ground_state(grid, 7)
    assert time.perf_counter() - t0 < 5


@pytest.mark.parametrize("p", [6, 7, 9])
def test_virial(grid, p):
    gs = solve_ground_state(grid, p)
    assert gs.virial_gap <= 1e-8
    assert np.max(np.abs(gs.Q - closed_form_Q_1d(grid, p))) <= 1e-8


def test_closed_form_rejects_critical(grid):
    with pytest.raises(FieldError, match="not intercritical"):
        closed_form_Q_1d(grid, 5)


def test_radial_ground_state():
    g = make_grid(3, 15, 1024)
    gs = solve_ground_state(g, 3)
    assert gs.Q[0] > gs.Q[-1] > 0
    # finite volumes are second order: virial gap scales like dx^2
    g2 = make_grid(3, 15, 2048)
    gs2 = solve_ground_state(g2, 3)
    assert 3 < gs.virial_gap / gs2.virial_gap < 5
    # reference Q(0) for the cubic 3D ground state
    assert abs(gs2.Q[0] - 4.3373) < 2e-3


def test_odd_seed_is_degenerate(grid):
    with pytest.raises(ConvergenceError):
        solve_ground_state(grid, 7, seed=grid.x * np.exp(-grid.x**2))


def test_tolerance_floor(grid):
    with pytest.raises(ValueError):
        solve_ground_state(grid, 7, tol=1e-15)


def test_rejects_mass_critical(grid):
    with pytest.raises(FieldError):
        solve_ground_state(grid, 5)


def test_bundle_from_profile(grid, gs):
    again = bundle_from_profile(grid, gs.Q.astype(complex), 7)
    assert again.elliptic_residual == gs.elliptic_residual
    with pytest.raises(FieldError):
        bundle_from_profile(grid, gs.Q + 1e-3j, 7)
    with pytest.raises(CertificateError):
        bundle_from_profile(grid, gs.Q * 1.01, 7)


def test_certificate_catches_non_even(grid, gs):
    bad = bundle_from_profile(grid, gs.Q, 7, certify=False)
    object.__setattr__(bad, "Q", np.roll(gs.Q, 1))
    with pytest.raises(CertificateError):
        certify_ground_state(bad)


def test_elliptic_residual_rejects_complex(grid, gs):
    with pytest.raises(FieldError):
        elliptic_residual(grid, gs.Q * (1 + 1j), 7)
