"""Conserved quantities, norms and threshold diagnostics of NLS fields."""

from dataclasses import dataclass

import numpy as np

from .grid import Grid

__all__ = [
    "Observables",
    "ThresholdDiagnostics",
    "FieldError",
    "critical_index",
    "check_intercritical",
    "scattering_exponent",
    "observables",
    "threshold_diagnostics",
]


class FieldError(ValueError):
    pass


def critical_index(dim: int, p: float) -> float:
    return dim / 2 - 2 / (p - 1)


def check_intercritical(dim: int, p: float):
    """Raise unless ``0 < s_c < 1``, i.e. ``1 + 4/d < p < 1 + 4/(d-2)``."""
    s_c = critical_index(dim, p)
    if not 0 < s_c < 1:
        raise FieldError(
            f"(d, p) = ({dim}, {p}) is not intercritical: s_c = {s_c:.6g} is outside (0, 1)"
        )
    return s_c


def scattering_exponent(dim: int, p: float) -> float:
    """Exponent ``(p-1)(d+2)/2`` of the scattering-norm density."""
    return (p - 1) * (dim + 2) / 2


@dataclass(frozen=True)
class Observables:
    mass: float
    energy: float
    momentum: tuple
    kinetic: float
    potential: float
    h1: float
    scattering_density: float


def observables(grid: Grid, u, p: float) -> Observables:
    """Mass ``||u||^2``, energy ``K/2 - ||u||_{p+1}^{p+1}/(p+1)``, momentum and norms."""
    check_intercritical(grid.dim, p)
    grid.check(u)
    if not np.all(np.isfinite(u)):
        raise FieldError("non-finite field")
    a = np.abs(u)
    mass = float(grid.integrate(a**2))
    kinetic = grid.kinetic(u)
    potential = float(grid.integrate(a ** (p + 1)))
    if grid.dim == 1:
        momentum = (float(np.imag(grid.integrate(np.conj(u) * grid.derivative(u)))),)
    else:
        # radial fields carry no momentum
        momentum = (0.0, 0.0, 0.0)
    return Observables(
        mass=mass,
        energy=0.5 * kinetic - potential / (p + 1),
        momentum=momentum,
        kinetic=kinetic,
        potential=potential,
        h1=kinetic + mass,
        scattering_density=float(grid.integrate(a ** scattering_exponent(grid.dim, p))),
    )


@dataclass(frozen=True)
class ThresholdDiagnostics:
    me_product: float | None  # None when E(u) <= 0
    kinetic_product: float
    me_threshold: float
    kinetic_threshold: float
    below_me: bool
    below_kinetic: bool
    s_c: float
    note: str = ""


def threshold_diagnostics(grid: Grid, u, Q, p: float) -> ThresholdDiagnostics:
    """Compare ``M^(1-s_c) E^s_c`` and ``||u||^(1-s_c) ||grad u||^s_c`` with the ground state's."""
    s_c = check_intercritical(grid.dim, p)
    ou = observables(grid, u, p)
    oq = observables(grid, Q, p)
    me_thr = oq.mass ** (1 - s_c) * oq.energy**s_c
    kin_thr = np.sqrt(oq.mass) ** (1 - s_c) * np.sqrt(oq.kinetic) ** s_c
    kin = np.sqrt(ou.mass) ** (1 - s_c) * np.sqrt(ou.kinetic) ** s_c
    if ou.energy <= 0:
        return ThresholdDiagnostics(
            me_product=None,
            kinetic_product=float(kin),
            me_threshold=float(me_thr),
            kinetic_threshold=float(kin_thr),
            below_me=True,
            below_kinetic=bool(kin < kin_thr),
            s_c=s_c,
            note="E(u) <= 0: mass-energy product not defined, strictly below the positive threshold",
        )
    me = ou.mass ** (1 - s_c) * ou.energy**s_c
    return ThresholdDiagnostics(
        me_product=float(me),
        kinetic_product=float(kin),
        me_threshold=float(me_thr),
        kinetic_threshold=float(kin_thr),
        below_me=bool(me < me_thr),
        below_kinetic=bool(kin < kin_thr),
        s_c=s_c,
    )
