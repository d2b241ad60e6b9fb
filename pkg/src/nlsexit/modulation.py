"""Modulation coordinates of a solution near the soliton.

A solution is written ``u = e^{it} e^{-i theta} (Q + h)(x - xshift)`` and
``h`` is split as

    h = alpha+ e+ + alpha- e- + gamma_0 iQ + sum_j gamma_j d_jQ + g,

with ``g`` in B-perp.  The symmetry parameters are chosen so that
``gamma_0 = gamma_j = 0``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .linearized import QuadFormContext, SpectralBundle, project_Bperp, quad_form_F

__all__ = [
    "ModulationError",
    "SymmetryFit",
    "ModulationState",
    "ModulationTracker",
    "fit_symmetry",
    "decompose",
    "nonlinear_remainder_R",
    "growth_rate",
    "GrowthFit",
]

NEWTON_MAX_ITERS = 50
FIT_TOL = 1e-11
BASIN = 0.3


class ModulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SymmetryFit:
    theta: float
    xshift: tuple
    residuals: tuple
    iterations: int


@dataclass(frozen=True, eq=False)
class ModulationState:
    t: float
    alpha_plus: float
    alpha_minus: float
    gamma: tuple
    g_h1: float
    h_h1: float
    theta: float
    xshift: tuple
    F_h: float
    h: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)


class _Functionals:
    """Dual vectors ``z`` with ``J(w) = <w - Q, z>`` for the orthogonality conditions."""

    def __init__(self, sb: SpectralBundle):
        grid = sb.grid
        e = sb.e_plus
        iQ = sb.kernel[0]
        nQ2 = grid.inner(iQ, iQ)
        # gamma_0(h) = <h - alpha+ e+ - alpha- e-, iQ>/|Q|^2 with alpha+- = -<h, dual_-+>
        z0 = iQ + grid.inner(e, iQ) * sb.dual_minus + grid.inner(np.conj(e), iQ) * sb.dual_plus
        self.z = [z0 / nQ2] + [d / grid.inner(d, d) for d in sb.kernel[1:]]


def _frame(sb: SpectralBundle, u, t, theta, xshift):
    w = np.exp(1j * (theta - t)) * u
    if xshift and any(xshift):
        w = sb.grid.shift(w, xshift[0])
    return w


def fit_symmetry(u, t: float, sb: SpectralBundle, warm: SymmetryFit | None = None, pin_translation: bool = False) -> SymmetryFit:
    """Newton iteration for the phase (and translation) zeroing the kernel coordinates.

    ``theta`` multiplies: the fitted frame is ``e^{i theta} e^{-it} u(x + xshift)``.
    Translations exist only on 1D grids and are dropped when ``pin_translation``.
    """
    grid = sb.grid
    u = np.asarray(u, dtype=complex)
    grid.check(u)
    fit_x = grid.dim == 1 and not pin_translation
    funcs = _Functionals(sb).z
    if not fit_x:
        funcs = funcs[:1]
    Q = sb.gs.Q

    if warm is not None:
        theta, xs = warm.theta, (warm.xshift[0] if warm.xshift else 0.0)
    else:
        j = int(np.argmax(np.abs(u)))
        theta = float(np.mod(t - np.angle(u[j]) + np.pi, 2 * np.pi) - np.pi)
        xs = float(grid.x[j]) if fit_x else 0.0
    if not fit_x:
        xs = 0.0

    for it in range(1, NEWTON_MAX_ITERS + 1):
        w = _frame(sb, u, t, theta, (xs,) if fit_x else ())
        r = w - Q
        J = np.array([grid.inner(r, z) for z in funcs])
        cols = [1j * w]
        if fit_x:
            cols.append(grid.derivative(w))
        jac = np.array([[grid.inner(c, z) for c in cols] for z in funcs])
        try:
            delta = np.linalg.solve(jac, -J)
        except np.linalg.LinAlgError:
            raise ModulationError("modulation fit diverged: singular Jacobian") from None
        theta += float(delta[0])
        if fit_x:
            xs += float(delta[1])
        if not np.all(np.isfinite(delta)):
            break
        if np.max(np.abs(delta)) < 1e-14 or np.max(np.abs(J)) < 1e-3 * FIT_TOL:
            break
    w = _frame(sb, u, t, theta, (xs,) if fit_x else ())
    J = tuple(grid.inner(w - Q, z) for z in funcs)
    if not np.all(np.isfinite(J)) or max(abs(j) for j in J) > FIT_TOL:
        raise ModulationError(f"modulation fit diverged: residuals {J} after {it} iterations")
    if grid.h1_norm(w - Q) > BASIN * grid.h1_norm(Q):
        raise ModulationError("modulation fit diverged: field left the soliton neighborhood")
    theta = float(np.mod(theta + np.pi, 2 * np.pi) - np.pi)
    return SymmetryFit(theta=theta, xshift=(xs,) if grid.dim == 1 else (), residuals=J, iterations=it)


def decompose(u, t: float, sb: SpectralBundle, fit: SymmetryFit | None = None) -> ModulationState:
    """Coordinates of ``h = e^{i theta} e^{-it} u(x + xshift) - Q``.

    ``fit=None`` uses the identity symmetry (``theta = 0``, no shift).
    """
    grid = sb.grid
    u = np.asarray(u, dtype=complex)
    grid.check(u)
    theta = fit.theta if fit is not None else 0.0
    xshift = fit.xshift if fit is not None else ((0.0,) if grid.dim == 1 else ())
    h = _frame(sb, u, t, theta, xshift) - sb.gs.Q
    g, coeffs = project_Bperp(h, sb)
    ap, am, *gammas = coeffs
    return ModulationState(
        t=t,
        alpha_plus=ap,
        alpha_minus=am,
        gamma=tuple(gammas),
        g_h1=grid.h1_norm(g),
        h_h1=grid.h1_norm(h),
        theta=theta,
        xshift=tuple(xshift),
        F_h=quad_form_F(h, h, sb.ctx),
        h=h,
        g=g,
    )


def reconstruct(ms: ModulationState, sb: SpectralBundle):
    e = sb.e_plus
    out = ms.alpha_plus * e + ms.alpha_minus * np.conj(e) + ms.g
    for c, k in zip(ms.gamma, sb.kernel):
        out = out + c * k
    return out


def nonlinear_remainder_R(h, ctx: QuadFormContext):
    """``R(h) = -i [|Q+h|^{p-1}(Q+h) - Q^p - p Q^{p-1} h1 - i Q^{p-1} h2]``.

    With this definition ``dh/dt + L h + R(h) = 0`` holds exactly for
    ``u = e^{it}(Q + h)``.
    """
    h = np.asarray(h, dtype=complex)
    ctx.grid.check(h)
    Q, p = ctx.gs.Q, ctx.p
    v = Q + h
    full = np.abs(v) ** (p - 1) * v
    lin = ctx.V_plus * h.real + 1j * ctx.V_minus * h.imag
    return -1j * (full - Q**p - lin)


@dataclass(frozen=True)
class GrowthFit:
    rate: float
    stderr: float
    intercept: float
    n: int


def growth_rate(t, alpha, window=None) -> GrowthFit:
    """Least-squares slope of ``log|alpha|`` against ``t`` on the time window."""
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, alpha = t[sel], alpha[sel]
    if t.size < 20:
        raise ValueError(f"growth window holds {t.size} samples, need at least 20")
    if np.any(alpha == 0):
        raise ValueError("alpha vanishes inside the window")
    if np.any(np.sign(alpha) != np.sign(alpha[0])):
        raise ValueError("alpha changes sign inside the window (monotonicity violated)")
    res = stats.linregress(t, np.log(np.abs(alpha)))
    return GrowthFit(rate=float(res.slope), stderr=float(res.stderr), intercept=float(res.intercept), n=int(t.size))


class ModulationTracker:
    """Fits and decomposes each accepted state of a run; usable as an exit event.

    ``watch="minus"`` tracks ``|alpha-| - eta`` (forward exit),
    ``watch="plus"`` tracks ``|alpha+| - eta`` (backward exit).
    """

    def __init__(self, sb: SpectralBundle, eta: float | None = None, watch: str = "minus", pin_translation: bool = True):
        self.sb = sb
        self.eta = eta
        self.watch = watch
        self.pin_translation = pin_translation
        self.fit: SymmetryFit | None = None
        self.pending: tuple | None = None
        self.states: list[ModulationState] = []

    def measure(self, t, u) -> ModulationState:
        fit = fit_symmetry(u, t, self.sb, warm=self.fit, pin_translation=self.pin_translation)
        ms = decompose(u, t, self.sb, fit)
        self.pending = (t, fit, ms)
        return ms

    def alpha(self, ms: ModulationState) -> float:
        return ms.alpha_minus if self.watch == "minus" else ms.alpha_plus

    def __call__(self, t, u) -> float:
        ms = self.measure(t, u)
        return abs(self.alpha(ms)) - self.eta

    def accept(self, state):
        if self.pending is None or self.pending[0] != state.t:
            self.measure(state.t, state.u)
        _, fit, ms = self.pending
        self.fit = fit
        # drop the field arrays, keep coordinates
        self.states.append(
            ModulationState(
                t=ms.t,
                alpha_plus=ms.alpha_plus,
                alpha_minus=ms.alpha_minus,
                gamma=ms.gamma,
                g_h1=ms.g_h1,
                h_h1=ms.h_h1,
                theta=ms.theta,
                xshift=ms.xshift,
                F_h=ms.F_h,
                h=None,
                g=None,
            )
        )

    def table(self) -> np.ndarray:
        """One row per accepted state, columns as in :meth:`header`.

        Radial grids carry no translation modes; their ``gamma_j`` columns are
        zero by symmetry and written as such.
        """
        d = self.sb.grid.dim
        rows = []
        for s in self.states:
            gam = list(s.gamma) + [0.0] * (d + 1 - len(s.gamma))
            rows.append([s.t, s.alpha_plus, s.alpha_minus, *gam, s.g_h1, s.h_h1, s.theta, *(s.xshift or (0.0,))])
        return np.array(rows).reshape(len(rows), d + 8)

    def header(self) -> list:
        d = self.sb.grid.dim
        return ["t", "alpha_plus", "alpha_minus"] + [f"gamma{j}" for j in range(d + 1)] + ["g_h1", "h_h1", "theta", "xshift"]
