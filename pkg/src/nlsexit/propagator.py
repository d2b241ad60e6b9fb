"""Time integration of ``i u_t + Laplacian u = -|u|^{p-1} u``.

Strang splitting: half nonlinear phase rotation, exact free flow (Fourier
multiplier in 1D, Crank-Nicolson in the radial case), half nonlinear
rotation.  Steps may be negative, which integrates backward in time.
"""

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid
from .observables import observables

__all__ = [
    "RunAborted",
    "ExitNotReached",
    "StrangSplitting",
    "SimState",
    "StopCondition",
    "Trajectory",
    "initial_state",
    "step",
    "evolve",
    "conservation_report",
]

MASS_DRIFT_ABORT = 1e-7


class RunAborted(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ExitNotReached(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StrangSplitting:
    def __init__(self, grid: Grid, p: float, dt: float, nonlinear: bool = True):
        self.grid = grid
        self.p = p
        self.dt = float(dt)
        self.nonlinear = nonlinear
        self._free = self._free_flow(self.dt)

    def _free_flow(self, dt):
        grid = self.grid
        if grid.dim == 1:
            return grid.free_propagator(dt)
        ab = grid._banded(1.0, 0.5j * dt)
        w = grid.weights

        def cn(u):
            rhs = w * u - 0.5j * dt * grid._stiffness_apply(u)
            return solve_banded((1, 1), ab, rhs)

        return cn

    def _kick(self, u, tau):
        return u * np.exp(1j * tau * np.abs(u) ** (self.p - 1))

    def advance(self, u, dt=None):
        if dt is None:
            dt, free = self.dt, self._free
        else:
            free = self._free_flow(dt)
        if not self.nonlinear:
            return free(u)
        u = self._kick(u, 0.5 * dt)
        u = free(u)
        return self._kick(u, 0.5 * dt)


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    u: np.ndarray
    dt: float
    step_count: int = 0
    mass0: float = 0.0
    energy0: float = 0.0
    momentum0: tuple = ()
    kinetic0: float = 0.0
    mass: float = 0.0
    energy: float = 0.0
    momentum: tuple = ()
    density: float = 0.0
    accumulated_scattering: float = 0.0
    max_mass_drift: float = 0.0
    max_energy_drift: float = 0.0

    @property
    def mass_drift(self):
        return _rel(self.mass, self.mass0)

    @property
    def energy_drift(self):
        return _rel(self.energy, self.energy0)


def _rel(a, b):
    if b == 0:
        return abs(a - b)
    return abs(a - b) / abs(b)


def initial_state(grid: Grid, u0, p: float, dt: float, t0: float = 0.0) -> SimState:
    if not 0 < abs(dt) <= 0.1:
        raise ValueError(f"dt={dt} outside the sane range 0 < |dt| <= 0.1")
    u0 = np.asarray(u0, dtype=complex).copy()
    grid.check(u0)
    o = observables(grid, u0, p)
    return SimState(
        t=t0,
        u=u0,
        dt=dt,
        mass0=o.mass,
        energy0=o.energy,
        momentum0=o.momentum,
        kinetic0=o.kinetic,
        mass=o.mass,
        energy=o.energy,
        momentum=o.momentum,
        density=o.scattering_density,
    )


def _advance_state(state: SimState, grid: Grid, p: float, stepper, tau: float, monitor: bool = True) -> SimState:
    u = stepper.advance(state.u, tau if tau != stepper.dt else None)
    if not np.all(np.isfinite(u)):
        raise RunAborted(f"non-finite field at t={state.t + tau:.6g}", state)
    o = observables(grid, u, p)
    new = replace(
        state,
        t=state.t + tau,
        u=u,
        step_count=state.step_count + 1,
        mass=o.mass,
        energy=o.energy,
        momentum=o.momentum,
        density=o.scattering_density,
        accumulated_scattering=state.accumulated_scattering + 0.5 * abs(tau) * (state.density + o.scattering_density),
    )
    new = replace(
        new,
        max_mass_drift=max(state.max_mass_drift, new.mass_drift),
        max_energy_drift=max(state.max_energy_drift, new.energy_drift),
    )
    if monitor and new.mass_drift > MASS_DRIFT_ABORT:
        raise RunAborted(f"mass drift {new.mass_drift:.3e} exceeds {MASS_DRIFT_ABORT:g} at t={new.t:.6g}", new)
    return new


def step(state: SimState, p: float, grid: Grid, stepper=None) -> SimState:
    """One Strang step of size ``state.dt`` with monitors and scattering accumulator updated."""
    stepper = stepper or StrangSplitting(grid, p, state.dt)
    return _advance_state(state, grid, p, stepper, state.dt)


@dataclass
class StopCondition:
    """Stop at ``|t| >= |t_end|``, or when ``event(t, u) >= 0`` (error past ``t_max``)."""

    t_end: float | None = None
    event: Callable | None = None
    t_max: float | None = None
    event_tol: float = 1e-6


@dataclass
class Trajectory:
    rows: list = field(default_factory=list)  # (t, mass, energy, density, accumulated)
    momenta: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (t, u)
    final: SimState | None = None
    event_time: float | None = None
    reason: str = ""

    def record(self, state: SimState, snapshot: bool):
        self.rows.append((state.t, state.mass, state.energy, state.density, state.accumulated_scattering))
        self.momenta.append(state.momentum)
        if snapshot:
            self.snapshots.append((state.t, state.u.copy()))

    @property
    def series(self) -> np.ndarray:
        return np.array(self.rows)


def evolve(
    state: SimState,
    p: float,
    grid: Grid,
    stop: StopCondition,
    stepper=None,
    stride: int = 0,
    on_step: Callable | None = None,
    monitor: bool = True,
) -> Trajectory:
    """Advance until ``stop`` fires.

    Event crossings are located by bisection on the size of the last step
    until the bracketing interval is below ``stop.event_tol``.  ``stride``
    controls snapshot storage (0 keeps only the endpoints).  ``on_step`` is
    called with every accepted state.  ``monitor=False`` disables the
    mass-drift abort, for steppers that do not conserve mass.
    """
    stepper = stepper or StrangSplitting(grid, p, state.dt)
    dt = state.dt
    traj = Trajectory()
    traj.record(state, snapshot=True)
    if stop.event is not None:
        g = stop.event(state.t, state.u)
        if on_step:
            on_step(state)
        if g >= 0:
            traj.final, traj.event_time, traj.reason = state, state.t, "event"
            return traj
    elif on_step:
        on_step(state)

    t0 = state.t
    while True:
        elapsed = abs(state.t - t0)
        if stop.t_end is not None and elapsed >= abs(stop.t_end - t0) - 1e-6 * abs(dt):
            traj.final, traj.reason = state, "t_end"
            break
        if stop.t_max is not None and elapsed >= stop.t_max - 1e-6 * abs(dt):
            traj.final, traj.reason = state, "t_max"
            if stop.event is not None:
                raise ExitNotReached(f"exit not reached by t={state.t:.6g}", traj)
            break
        tau = dt
        if stop.t_end is not None:
            remaining = abs(stop.t_end - t0) - elapsed
            if remaining < abs(dt):
                tau = np.copysign(remaining, dt)
        new = _advance_state(state, grid, p, stepper, tau, monitor)
        if stop.event is not None and stop.event(new.t, new.u) >= 0:
            new = _bisect_event(state, grid, p, stepper, tau, stop, monitor)
            traj.record(new, snapshot=True)
            if on_step:
                on_step(new)
            traj.final, traj.event_time, traj.reason = new, new.t, "event"
            break
        state = new
        snap = stride > 0 and state.step_count % stride == 0
        traj.record(state, snapshot=snap)
        if on_step:
            on_step(state)
    if traj.reason == "t_end" and (not traj.snapshots or traj.snapshots[-1][0] != traj.final.t):
        traj.snapshots.append((traj.final.t, traj.final.u.copy()))
    return traj


def _bisect_event(prev: SimState, grid, p, stepper, tau, stop: StopCondition, monitor=True) -> SimState:
    lo, hi = 0.0, abs(tau)
    sign = np.sign(tau)
    while hi - lo > stop.event_tol:
        mid = 0.5 * (lo + hi)
        trial = stepper.advance(prev.u, sign * mid)
        if stop.event(prev.t + sign * mid, trial) >= 0:
            hi = mid
        else:
            lo = mid
    final = _advance_state(prev, grid, p, stepper, sign * hi, monitor)
    # leave the event callable's cache on the accepted state
    stop.event(final.t, final.u)
    return final


def conservation_report(traj: Trajectory) -> dict:
    """Maximal relative drifts over the stored series.

    Momentum drift is measured against ``sqrt(M K)``, which bounds ``|P|``
    and stays meaningful when ``P(0) = 0``.
    """
    s = traj.series
    if s.size == 0:
        raise ValueError("empty trajectory")
    mass, energy = s[:, 1], s[:, 2]
    P = np.array(traj.momenta, dtype=float)
    out = {
        "max_mass_drift": float(np.max(np.abs(mass - mass[0])) / mass[0]) if mass[0] else float(np.max(np.abs(mass))),
        "max_energy_drift": float(np.max(np.abs(energy - energy[0])) / abs(energy[0])) if energy[0] else float(np.max(np.abs(energy))),
    }
    final = traj.final
    scale = np.sqrt(final.mass0 * final.kinetic0) if final is not None else 0.0
    out["max_momentum_drift"] = float(np.max(np.abs(P - P[0])) / scale) if scale > 0 else 0.0
    return out
