"""Threshold family, exit-time runs and the |log eps| regressions."""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .grid import make_grid
from .ground_state import CertificateError, solve_ground_state
from .linearized import QuadFormContext, SpectralBundle, solve_spectrum
from .modulation import ModulationError, ModulationTracker, decompose, fit_symmetry, growth_rate
from .observables import ThresholdDiagnostics, observables, scattering_exponent, threshold_diagnostics
from .propagator import ExitNotReached, StopCondition, StrangSplitting, evolve, initial_state

__all__ = [
    "ExperimentConfig",
    "ThresholdDatum",
    "ExitRecord",
    "SweepReport",
    "LogSlope",
    "ExperimentError",
    "oriented_spectrum",
    "construct_threshold_data",
    "run_exit_experiment",
    "sweep",
    "fit_log_slope",
    "setup",
    "DEFAULT_LADDER",
]

DEFAULT_LADDER = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)


class ExperimentError(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 1
    p: float = 7.0
    L: float = 20.0
    N: int = 2048
    dt: float = 5e-4
    eta: float = 0.05
    T_max: float = 40.0
    event_tol: float = 1e-6
    pin_translation: bool = True
    backward: bool = True
    workers: int | None = None


@dataclass(frozen=True, eq=False)
class ThresholdDatum:
    a: float
    b: float
    u0: np.ndarray = field(repr=False)
    eps: float = 0.0
    diagnostics: ThresholdDiagnostics | None = None


@dataclass(frozen=True, eq=False)
class ExitRecord:
    a: float
    eps: float
    eta: float
    T_plus: float
    S_accum: float
    rate: float
    rate_stderr: float
    alpha_dot_at_exit: float
    alpha_minus_at_exit: float
    alpha_minus0: float
    alpha_plus0: float
    h_h1_0: float
    K_fit: float
    T_minus: float | None = None
    S_backward: float | None = None
    series: np.ndarray | None = field(default=None, repr=False)
    series_header: tuple = ()

    @property
    def initial_size_ratio(self):
        """``(||h(0)||_H1 + eps) / |alpha-(0)|``."""
        return (self.h_h1_0 + self.eps) / abs(self.alpha_minus0)


@dataclass(frozen=True)
class LogSlope:
    slope: float
    intercept: float
    ci95: tuple
    n: int


@dataclass(frozen=True, eq=False)
class SweepReport:
    records: list
    slope_T: LogSlope | None
    slope_S: LogSlope | None
    slope_S_two_sided: LogSlope | None
    lambda1_ref: float
    density_ref: float
    eta: float
    failures: dict = field(default_factory=dict)

    @property
    def partial(self):
        return bool(self.failures)

    def to_dict(self):
        def slope(s):
            return None if s is None else {"slope": s.slope, "intercept": s.intercept, "ci95": list(s.ci95), "n": s.n}

        inv = 1 / self.lambda1_ref
        return {
            "eta": self.eta,
            "lambda1": self.lambda1_ref,
            "inverse_lambda1": inv,
            "density_ref": self.density_ref,
            "two_over_lambda1": 2 * inv,
            "two_over_lambda1_times_density": 2 * inv * self.density_ref,
            "slope_T": slope(self.slope_T),
            "slope_S": slope(self.slope_S),
            "slope_S_two_sided": slope(self.slope_S_two_sided),
            "partial": self.partial,
            "failures": {str(k): v for k, v in self.failures.items()},
            "records": [
                {
                    "a": r.a,
                    "eps": r.eps,
                    "T_plus": r.T_plus,
                    "T_minus": r.T_minus,
                    "S_accum": r.S_accum,
                    "S_backward": r.S_backward,
                    "rate": r.rate,
                    "rate_stderr": r.rate_stderr,
                    "alpha_dot_exit": r.alpha_dot_at_exit,
                    "K_fit": r.K_fit,
                    "initial_size_ratio": r.initial_size_ratio,
                }
                for r in self.records
            ],
        }


def oriented_spectrum(sb: SpectralBundle) -> SpectralBundle:
    """Flip ``(e+, e-)`` so that ``int grad Q . grad Re e+ > 0``."""
    grid, Q = sb.grid, sb.gs.Q
    v = sb.e_plus.real
    if grid.dim == 1:
        pairing = grid.inner(grid.derivative(Q), grid.derivative(v))
    else:
        pairing = float(np.dot(Q, grid._stiffness_apply(v)))
    return sb.flipped() if pairing < 0 else sb


def construct_threshold_data(a: float, sb: SpectralBundle) -> ThresholdDatum:
    """``u0 = (1 - b) Q - 2a Re e+`` with ``M(u0) = M(Q)``.

    ``b`` solves the discrete mass equation including the (tiny) cross term
    ``(Q, Re e+)`` so the mass matches to round-off.
    """
    sb = oriented_spectrum(sb)
    grid, gs = sb.grid, sb.gs
    Q, p = gs.Q, gs.p
    v = sb.e_plus.real
    M = grid.inner(Q, Q)
    V = grid.inner(v, v)
    c = grid.inner(Q, v)
    if a == 0:
        return ThresholdDatum(a=0.0, b=0.0, u0=Q.astype(complex), eps=0.0, diagnostics=threshold_diagnostics(grid, Q, Q, p))
    if a < 0:
        raise ValueError("a must be positive")
    a_max = 0.5 * np.sqrt(M / V)
    disc = 16 * a * a * c * c - 4 * M * (4 * a * a * V - M)
    if disc < 0 or 4 * a * a * V >= M:
        raise ValueError(f"a={a} too large; admissible a < {a_max:.4g}")
    s = (4 * a * c + np.sqrt(disc)) / (2 * M)
    u0 = (s * Q - 2 * a * v).astype(complex)
    oQ, o0 = gs.observables, observables(grid, u0, p)
    if abs(o0.mass - oQ.mass) > 1e-11 * oQ.mass:
        raise CertificateError(f"mass mismatch {abs(o0.mass - oQ.mass) / oQ.mass:.2e}")
    if not o0.kinetic < oQ.kinetic:
        raise ValueError(f"a={a} too large: kinetic inequality fails; admissible a < {a_max:.4g}")
    eps2 = oQ.energy + oQ.mass - o0.energy - o0.mass
    if not eps2 > 0:
        raise CertificateError(f"eps^2 = {eps2:.3e} is not positive")
    return ThresholdDatum(a=a, b=1 - s, u0=u0, eps=float(np.sqrt(eps2)), diagnostics=threshold_diagnostics(grid, u0, Q, p))


def _alpha_dot(u, t, sb, stepper, fit, pin, watch="minus"):
    """Central difference of alpha- (or alpha+) with one step either side."""
    dt = stepper.dt
    vals = []
    for tau in (dt, -dt):
        w = stepper.advance(u, tau)
        f = fit_symmetry(w, t + tau, sb, warm=fit, pin_translation=pin)
        ms = decompose(w, t + tau, sb, f)
        vals.append(ms.alpha_minus if watch == "minus" else ms.alpha_plus)
    return (vals[0] - vals[1]) / (2 * dt)


def _run_one_direction(datum, sb, cfg, eta, direction):
    grid, p = sb.grid, sb.gs.p
    dt = cfg.dt * direction
    watch = "minus" if direction > 0 else "plus"
    tracker = ModulationTracker(sb, eta=eta, watch=watch, pin_translation=cfg.pin_translation)
    stepper = StrangSplitting(grid, p, dt)
    state = initial_state(grid, datum.u0, p, dt)
    stop = StopCondition(event=tracker, t_max=cfg.T_max, event_tol=cfg.event_tol)
    try:
        traj = evolve(state, p, grid, stop, stepper=stepper, on_step=tracker.accept)
    except ModulationError as exc:
        raise ExperimentError(f"a={datum.a}: {exc}", partial=tracker.table()) from exc
    except ExitNotReached as exc:
        raise ExperimentError(f"a={datum.a}: exit not reached by |t| = {cfg.T_max}", partial=tracker.table()) from exc
    return traj, tracker, stepper


def run_exit_experiment(a: float, eta: float, cfg: ExperimentConfig, sb: SpectralBundle) -> ExitRecord:
    """Evolve the threshold datum until ``|alpha-| >= eta`` (and backward until ``|alpha+| >= eta``)."""
    if not 0 < eta <= 0.1:
        raise ValueError(f"eta={eta} outside (0, 0.1]")
    sb = oriented_spectrum(sb)
    datum = construct_threshold_data(a, sb)
    traj, tracker, stepper = _run_one_direction(datum, sb, cfg, eta, +1)
    tab = tracker.table()
    header = tuple(tracker.header())
    t, am = tab[:, 0], tab[:, 2]
    first = tracker.states[0]
    T_plus = traj.event_time

    lo, hi = 2 * abs(first.alpha_minus), eta / 10
    rate = stderr = float("nan")
    if lo < hi:
        inside = np.flatnonzero((np.abs(am) >= lo) & (np.abs(am) <= hi))
        if inside.size >= 20:
            g = growth_rate(t, am, window=(t[inside[0]], t[inside[-1]]))
            rate, stderr = g.rate, g.stderr

    final = traj.final
    adot = _alpha_dot(final.u, final.t, sb, stepper, tracker.fit, cfg.pin_translation)

    t0 = 1 / sb.lambda1
    sel = t >= min(t0, T_plus)
    h_h1 = tab[:, header.index("h_h1")]
    K = float(np.max(h_h1[sel] / np.abs(am[sel])))

    T_minus = S_back = None
    if cfg.backward:
        btraj, _, _ = _run_one_direction(datum, sb, cfg, eta, -1)
        T_minus, S_back = btraj.event_time, btraj.final.accumulated_scattering

    return ExitRecord(
        a=a,
        eps=datum.eps,
        eta=eta,
        T_plus=T_plus,
        S_accum=final.accumulated_scattering,
        rate=rate,
        rate_stderr=stderr,
        alpha_dot_at_exit=adot,
        alpha_minus_at_exit=float(am[-1]),
        alpha_minus0=first.alpha_minus,
        alpha_plus0=first.alpha_plus,
        h_h1_0=first.h_h1,
        K_fit=K,
        T_minus=T_minus,
        S_backward=S_back,
        series=tab,
        series_header=header,
    )


def fit_log_slope(points) -> LogSlope:
    """OLS of ``y`` on ``|log eps|`` with a 95% confidence interval for the slope."""
    pts = list(points)
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points, got {len(pts)}")
    eps = np.array([e for e, _ in pts], dtype=float)
    y = np.array([v for _, v in pts], dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    if np.unique(eps).size != eps.size:
        raise ValueError("degenerate abscissae: repeated eps")
    x = np.abs(np.log(eps))
    res = stats.linregress(x, y)
    half = stats.t.ppf(0.975, x.size - 2) * res.stderr
    return LogSlope(slope=float(res.slope), intercept=float(res.intercept), ci95=(res.slope - half, res.slope + half), n=int(x.size))


def setup(cfg: ExperimentConfig) -> SpectralBundle:
    grid = make_grid(cfg.dim, cfg.L, cfg.N)
    gs = solve_ground_state(grid, cfg.p)
    return oriented_spectrum(solve_spectrum(QuadFormContext(gs)))


def _job(args):
    a, eta, cfg, sb = args
    try:
        return run_exit_experiment(a, eta, cfg, sb)
    except (ExperimentError, ModulationError, ValueError, RuntimeError) as exc:
        return exc


def sweep(ladder, eta: float, cfg: ExperimentConfig, sb: SpectralBundle | None = None) -> SweepReport:
    """Run the ladder (bounded process pool) and regress ``T+`` and ``S`` on ``|log eps|``."""
    ladder = [float(a) for a in ladder]
    if len(ladder) < 4:
        raise ValueError("ladder needs at least 4 entries")
    if any(x <= y for x, y in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly decreasing")
    if ladder[0] / ladder[-1] < 100:
        raise ValueError("ladder must span at least two decades")
    sb = oriented_spectrum(sb if sb is not None else setup(cfg))
    cfg = replace(cfg, eta=eta)
    workers = cfg.workers or os.cpu_count() or 1
    jobs = [(a, eta, cfg, sb) for a in ladder]
    if workers == 1:
        results = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_job, jobs))
    records, failures = [], {}
    for a, r in zip(ladder, results):
        if isinstance(r, Exception):
            failures[a] = str(r)
        else:
            records.append(r)
    records.sort(key=lambda r: -r.eps)
    slope_T = slope_S = slope_S2 = None
    if len(records) >= 4:
        slope_T = fit_log_slope([(r.eps, r.T_plus) for r in records])
        slope_S = fit_log_slope([(r.eps, r.S_accum) for r in records])
        if all(r.S_backward is not None for r in records):
            slope_S2 = fit_log_slope([(r.eps, r.S_accum + r.S_backward) for r in records])
    q = scattering_exponent(sb.grid.dim, sb.gs.p)
    density = float(sb.grid.integrate(sb.gs.Q**q))
    return SweepReport(
        records=records,
        slope_T=slope_T,
        slope_S=slope_S,
        slope_S_two_sided=slope_S2,
        lambda1_ref=sb.lambda1,
        density_ref=density,
        eta=eta,
        failures=failures,
    )
