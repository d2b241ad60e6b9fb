"""Ground state of ``-Laplacian Q + Q - Q^p = 0`` by Petviashvili iteration."""

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .observables import FieldError, Observables, check_intercritical, observables

__all__ = [
    "CertificateError",
    "ConvergenceError",
    "GroundStateBundle",
    "closed_form_Q_1d",
    "elliptic_residual",
    "virial_gap",
    "solve_ground_state",
    "bundle_from_profile",
    "certify_ground_state",
]


class CertificateError(RuntimeError):
    """A computed object failed one of its numerical certificates."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GroundStateBundle:
    grid: Grid
    p: float
    Q: np.ndarray  # real samples
    observables: Observables
    elliptic_residual: float
    virial_gap: float
    dQ: list  # partial derivatives (empty for radial grids)
    iterations: int = 0

    @property
    def dim(self):
        return self.grid.dim


def closed_form_Q_1d(grid: Grid, p: float) -> np.ndarray:
    """``((p+1)/2)^(1/(p-1)) sech^(2/(p-1))((p-1)x/2)`` sampled on a 1D grid."""
    if grid.dim != 1:
        raise FieldError("closed form ground state exists only for dim=1")
    if p <= 5:
        raise FieldError("not intercritical in d=1")
    amp = ((p + 1) / 2) ** (1 / (p - 1))
    return amp / np.cosh((p - 1) * grid.x / 2) ** (2 / (p - 1))


def elliptic_residual(grid: Grid, Q, p: float) -> float:
    """``||-Laplacian Q + Q - Q^p||_{L^2}``."""
    if np.iscomplexobj(Q):
        if np.any(np.imag(Q) != 0):
            raise FieldError("elliptic_residual expects a real field")
        Q = np.real(Q)
    grid.check(Q)
    res = -np.real(grid.laplacian(Q)) + Q - np.abs(Q) ** (p - 1) * Q
    return grid.norm(res)


def virial_gap(grid: Grid, Q, p: float) -> float:
    """Relative gap in ``||grad Q||^2 = d(p-1)/(2(p+1)) ||Q||_{p+1}^{p+1}``."""
    kin = grid.kinetic(Q)
    pot = float(grid.integrate(np.abs(Q) ** (p + 1)))
    target = grid.dim * (p - 1) / (2 * (p + 1)) * pot
    return abs(kin - target) / abs(target)


def _default_seed(grid: Grid):
    return np.exp(-grid.x**2)


def solve_ground_state(
    grid: Grid,
    p: float,
    tol: float = 1e-13,
    seed=None,
    max_iters: int = 10000,
    certify: bool = True,
) -> GroundStateBundle:
    """Petviashvili iteration ``Q <- m^gamma (1 - Laplacian)^{-1} Q^p`` with ``gamma = p/(p-1)``.

    ``m = <(1-Laplacian)Q, Q> / <Q^p, Q>`` is the stabilizing factor.  The
    iteration stops once successive iterates differ by at most ``tol`` in
    the sup norm.
    """
    check_intercritical(grid.dim, p)
    if tol < 1e-14:
        raise ValueError(f"tol={tol} is below attainable round-off (>= 1e-14)")
    gamma = p / (p - 1)
    Q = np.asarray(_default_seed(grid) if seed is None else seed, dtype=float).copy()
    grid.check(Q)
    step = np.inf
    for it in range(1, max_iters + 1):
        Np = np.abs(Q) ** (p - 1) * Q
        m = grid.h1_sq(Q) / grid.inner(Np, Q)
        Qn = m**gamma * grid.helmholtz_solve(Np)
        if not np.all(np.isfinite(Qn)):
            raise ConvergenceError(f"iteration produced non-finite values at step {it}")
        step = np.max(np.abs(Qn - Q))
        Q = Qn
        if grid.norm(Q) < 1e-6:
            raise ConvergenceError("trivial fixed point: iterate collapsed to zero")
        if (it == 50 or step <= tol) and np.min(Q) < -1e-8 * np.max(np.abs(Q)):
            raise ConvergenceError("seed does not lead to a positive profile (degenerate seed)")
        if step <= tol:
            break
    else:
        raise ConvergenceError(f"not converged in {max_iters} iterations; last step {step:.3e}")

    return bundle_from_profile(grid, Q, p, certify=certify, iterations=it)


def bundle_from_profile(grid: Grid, Q, p: float, certify: bool = True, iterations: int = 0) -> GroundStateBundle:
    """Wrap stored samples of ``Q`` (e.g. read back from a snapshot) into a certified bundle."""
    check_intercritical(grid.dim, p)
    Q = np.asarray(Q)
    if np.iscomplexobj(Q):
        if np.any(Q.imag != 0):
            raise FieldError("ground-state profile must be real")
        Q = Q.real
    Q = np.array(Q, dtype=float)
    grid.check(Q)
    gs = GroundStateBundle(
        grid=grid,
        p=p,
        Q=Q,
        observables=observables(grid, Q, p),
        elliptic_residual=elliptic_residual(grid, Q, p),
        virial_gap=virial_gap(grid, Q, p),
        dQ=[grid.derivative(Q)] if grid.dim == 1 else [],
        iterations=iterations,
    )
    if certify:
        certify_ground_state(gs)
    return gs


def _radial_profile(grid: Grid, Q):
    """Samples ordered by increasing distance from the origin."""
    if grid.dim == 1:
        return np.concatenate([Q[grid.N // 2:], Q[:1]])
    return Q


def certify_ground_state(gs: GroundStateBundle, virial_tol: float | None = None):
    grid, Q = gs.grid, gs.Q
    if np.min(Q) <= 0:
        raise CertificateError("ground state is not positive")
    prof = _radial_profile(grid, Q)
    if np.max(np.diff(prof)) > 1e-12:
        raise CertificateError("ground state is not monotone in |x|")
    if grid.dim == 1:
        mirror = np.roll(Q[::-1], 1)
        if np.max(np.abs(Q - mirror)) > 1e-12:
            raise CertificateError("ground state is not even")
    qn = grid.norm(Q)
    if gs.elliptic_residual > 1e-8 * qn:
        raise CertificateError(f"elliptic residual {gs.elliptic_residual:.3e} exceeds 1e-8 ||Q||")
    if virial_tol is None:
        # finite volumes are only second-order accurate in r
        virial_tol = 1e-8 if grid.dim == 1 else 10 * grid.dx**2
    if gs.virial_gap > virial_tol:
        raise CertificateError(f"virial gap {gs.virial_gap:.3e} exceeds {virial_tol:.1e}")
