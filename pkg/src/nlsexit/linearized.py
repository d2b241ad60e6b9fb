"""Linearization of NLS around the soliton ``e^{it} Q``.

Writing ``h = h1 + i h2`` and ``L+ = -Laplacian + 1 - p Q^{p-1}``,
``L- = -Laplacian + 1 - Q^{p-1}``, the linearized operator acts as

    L h = -L- h2 + i L+ h1,

so that perturbations obey ``dh/dt = -L h`` to first order.  Its only real
eigenvalues are ``+-lambda1`` with eigenvectors ``e+ = conj(e-)``.  The
quadratic form ``F(f, g) = 1/2 Im int (L f) conj(g)`` equals
``1/2 [(L+ f1, g1) + (L- f2, g2)]``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import Grid
from .ground_state import CertificateError, GroundStateBundle

__all__ = [
    "QuadFormContext",
    "SpectralBundle",
    "SpectrumError",
    "CoercivityError",
    "LinearFlow",
    "apply_L",
    "quad_form_F",
    "solve_spectrum",
    "lambda1_power_iteration",
    "project_Bperp",
    "coercivity_probe",
    "random_smooth_field",
]


class SpectrumError(RuntimeError):
    pass


class CoercivityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class QuadFormContext:
    gs: GroundStateBundle
    V_plus: np.ndarray = field(init=False)
    V_minus: np.ndarray = field(init=False)

    def __post_init__(self):
        Qp = self.gs.Q ** (self.gs.p - 1)
        object.__setattr__(self, "V_minus", Qp)
        object.__setattr__(self, "V_plus", self.gs.p * Qp)

    @property
    def grid(self) -> Grid:
        return self.gs.grid

    @property
    def p(self) -> float:
        return self.gs.p

    def L_plus(self, f):
        return -self.grid.laplacian(f) + f - self.V_plus * f

    def L_minus(self, f):
        return -self.grid.laplacian(f) + f - self.V_minus * f


def _as_complex(h):
    return np.asarray(h, dtype=complex)


def apply_L(h, ctx: QuadFormContext):
    """``L h = (Laplacian - 1 + Q^{p-1}) h2 + i (-Laplacian + 1 - p Q^{p-1}) h1``."""
    h = _as_complex(h)
    ctx.grid.check(h)
    # i(1 - Laplacian) h + V- h2 - i V+ h1, one transform pair
    out = 1j * (h - ctx.grid.laplacian(h))
    return out + ctx.V_minus * h.imag - 1j * ctx.V_plus * h.real


def quad_form_F(f, g, ctx: QuadFormContext) -> float:
    """``F(f, g) = 1/2 Im int (L f) conj(g)``."""
    g = _as_complex(g)
    ctx.grid.check(g)
    Lf = apply_L(f, ctx)
    return 0.5 * float(np.imag(ctx.grid.integrate(Lf * np.conj(g))))


@dataclass(frozen=True, eq=False)
class SpectralBundle:
    lambda1: float
    e_plus: np.ndarray
    ctx: QuadFormContext
    kernel: list
    residuals: dict
    normalization: float
    # F(f, e+-) == grid.inner(f, dual_plus/minus)
    dual_plus: np.ndarray = field(repr=False)
    dual_minus: np.ndarray = field(repr=False)
    unnormalized_F: float = 0.0
    certificates: dict = field(default_factory=dict)

    @property
    def e_minus(self):
        return np.conj(self.e_plus)

    @property
    def gs(self) -> GroundStateBundle:
        return self.ctx.gs

    @property
    def grid(self) -> Grid:
        return self.ctx.grid

    def F_with(self, f, sign: int) -> float:
        """``F(f, e+)`` for ``sign=+1``, ``F(f, e-)`` for ``sign=-1``."""
        return self.grid.inner(f, self.dual_plus if sign > 0 else self.dual_minus)

    def flipped(self) -> "SpectralBundle":
        """Same bundle with ``(e+, e-)`` replaced by ``(-e+, -e-)``."""
        return SpectralBundle(
            lambda1=self.lambda1,
            e_plus=-self.e_plus,
            ctx=self.ctx,
            kernel=self.kernel,
            residuals=self.residuals,
            normalization=self.normalization,
            dual_plus=-self.dual_plus,
            dual_minus=-self.dual_minus,
            unnormalized_F=self.unnormalized_F,
            certificates=self.certificates,
        )


# ----------------------------------------------------------------------
# symmetry-reduced dense representation


class _Reduced:
    """Orthonormal (in the weighted L^2 sense) basis of even (dim=1) or radial (dim=3) fields."""

    def __init__(self, grid: Grid):
        self.grid = grid
        N = grid.N
        if grid.dim == 1:
            m = N // 2
            # nodes x = 0, dx, ..., L - dx, then x = -L
            self.nodes = np.concatenate([np.arange(m, N), [0]])
            self.mirror = np.concatenate([np.arange(m, 0, -1), [0]])
            self.single = self.nodes == self.mirror
            self.scale = np.where(self.single, 1.0, np.sqrt(2.0)) * np.sqrt(grid.dx)
            # the spectral Laplacian is circulant: (Lap f)_i = sum_j c[i - j] f_j
            c = np.real(np.fft.ifft(-(grid.k**2)))
            n, mi = self.nodes, self.mirror
            pair = (~self.single).astype(float)

            def block(I, J):
                return c[(I[:, None] - J[None, :]) % N]

            S = block(n, n) + block(n, mi) * pair[None, :] + block(mi, n) * pair[:, None]
            S += block(mi, mi) * np.outer(pair, pair)
            A = -grid.dx * S / np.outer(self.scale, self.scale)
        else:
            self.nodes = np.arange(N)
            self.scale = np.sqrt(grid.weights)
            diag, off = grid.stiffness_diagonals()
            sw = self.scale
            A = np.diag(diag / grid.weights) + np.diag(off / (sw[:-1] * sw[1:]), 1) + np.diag(off / (sw[:-1] * sw[1:]), -1)
        self.neg_laplacian = 0.5 * (A + A.T)

    def restrict(self, f):
        return f[self.nodes] * self.scale

    def lift(self, c):
        f = np.zeros(self.grid.N, dtype=np.result_type(c, float))
        vals = c / self.scale
        f[self.nodes] = vals
        if self.grid.dim == 1:
            f[self.mirror] = vals
        return f


def _dense_spectrum(ctx: QuadFormContext, refine_steps: int = 2):
    red = _Reduced(ctx.grid)
    n = red.neg_laplacian.shape[0]
    Vp = red.restrict(ctx.V_plus) / red.scale
    Vm = red.restrict(ctx.V_minus) / red.scale
    Lp = red.neg_laplacian + np.eye(n) - np.diag(Vp)
    Lm = red.neg_laplacian + np.eye(n) - np.diag(Vm)

    # L- >= 0, so L- L+ v = mu v is similar to the symmetric S L+ S with S = sqrt(L-)
    wm, Um = np.linalg.eigh(Lm)
    S = (Um * np.sqrt(np.clip(wm, 0.0, None))) @ Um.T
    mu, W = np.linalg.eigh(S @ Lp @ S)
    scale = max(1.0, abs(mu[0]))
    n_neg = int(np.sum(mu < -1e-6 * scale))
    if n_neg != 1:
        raise SpectrumError(f"spectral structure violated: {n_neg} negative eigenvalues of L- L+")
    lam = float(np.sqrt(-mu[0]))
    v = S @ W[:, 0]
    w = Lp @ v / lam

    # shifted inverse iteration on the block form of L restores full accuracy
    Z = np.zeros_like(Lp)
    M = np.block([[Z, -Lm], [Lp, Z]])
    x = np.concatenate([v, w])
    x /= np.linalg.norm(x)
    lu = sla.lu_factor(M - lam * np.eye(2 * n))
    for _ in range(refine_steps):
        x = sla.lu_solve(lu, x)
        x /= np.linalg.norm(x)
    lam = float(x @ M @ x)
    v, w = red.lift(x[:n]), red.lift(x[n:])
    return lam, v, w


def solve_spectrum(ctx: QuadFormContext, certify: bool = True) -> SpectralBundle:
    """Compute ``lambda1`` and ``e+-`` and normalize so ``F(e+, e-) = -1``.

    ``-lambda1^2`` is the unique negative eigenvalue of ``L- L+`` on even
    (dim=1) or radial (dim=3) functions; with its eigenfunction ``v``,
    ``e+ = v + i L+ v / lambda1``.  The sign is fixed by ``v(0) > 0``.
    """
    grid = ctx.grid
    lam, v, w = _dense_spectrum(ctx)
    origin = grid.N // 2 if grid.dim == 1 else 0
    if v[origin] < 0:
        v, w = -v, -w
    e = v + 1j * w
    F_raw = quad_form_F(e, np.conj(e), ctx)
    if not F_raw < 0:
        raise SpectrumError(f"F(e+, e-) = {F_raw:.3e} is not negative")
    e = e / np.sqrt(-F_raw)
    Le_plus = apply_L(e, ctx)
    Le_minus = apply_L(np.conj(e), ctx)

    Q = ctx.gs.Q
    kernel = [1j * Q.astype(complex)] + [d.astype(complex) for d in ctx.gs.dQ]
    sb = SpectralBundle(
        lambda1=lam,
        e_plus=e,
        ctx=ctx,
        kernel=kernel,
        residuals={},
        normalization=quad_form_F(e, np.conj(e), ctx),
        dual_plus=-0.5j * Le_plus,
        dual_minus=-0.5j * Le_minus,
        unnormalized_F=F_raw,
    )
    object.__setattr__(sb, "residuals", _residuals(sb))
    object.__setattr__(sb, "certificates", _certificates(sb))
    if certify:
        certify_spectrum(sb)
    return sb


def _residuals(sb: SpectralBundle) -> dict:
    grid, ctx = sb.grid, sb.ctx
    e = sb.e_plus
    ne = grid.norm(e)
    out = {
        "eig_plus": grid.norm(apply_L(e, ctx) - sb.lambda1 * e) / ne,
        "eig_minus": grid.norm(apply_L(np.conj(e), ctx) + sb.lambda1 * np.conj(e)) / ne,
        "kernel_iQ": grid.norm(apply_L(sb.kernel[0], ctx)) / grid.norm(sb.kernel[0]),
    }
    for j, d in enumerate(sb.kernel[1:], start=1):
        out[f"kernel_dQ{j}"] = grid.norm(apply_L(d, ctx)) / grid.norm(d)
    return out


def _certificates(sb: SpectralBundle) -> dict:
    grid, ctx, Q = sb.grid, sb.ctx, sb.gs.Q
    e = sb.e_plus
    c = {
        "F_epem": sb.normalization,
        "F_epep": quad_form_F(e, e, ctx),
        "F_emem": quad_form_F(np.conj(e), np.conj(e), ctx),
        "Re_e_Q": grid.inner(e.real, Q) / (grid.norm(e.real) * grid.norm(Q)),
    }
    for name, k in zip(["iQ"] + [f"dQ{j}" for j in range(1, len(sb.kernel))], sb.kernel):
        c[f"F_ep_{name}"] = quad_form_F(e, k, ctx)
        c[f"F_em_{name}"] = quad_form_F(np.conj(e), k, ctx)
    return c


def certify_spectrum(sb: SpectralBundle):
    r, c = sb.residuals, sb.certificates
    problems = []
    if r["eig_plus"] > 1e-8 or r["eig_minus"] > 1e-8:
        problems.append(f"eigen residuals {r['eig_plus']:.2e}, {r['eig_minus']:.2e} exceed 1e-8")
    if r["kernel_iQ"] > 1e-8:
        problems.append(f"||L(iQ)|| / ||Q|| = {r['kernel_iQ']:.2e} exceeds 1e-8")
    for key, val in r.items():
        if key.startswith("kernel_dQ") and val > 1e-6:
            problems.append(f"{key} residual {val:.2e} exceeds 1e-6")
    if abs(c["F_epem"] + 1) > 1e-12:
        problems.append(f"F(e+, e-) = {c['F_epem']!r} != -1")
    if abs(c["F_epep"]) > 1e-10 or abs(c["F_emem"]) > 1e-10:
        problems.append(f"F(e+-, e+-) = {c['F_epep']:.2e}, {c['F_emem']:.2e} not zero")
    if abs(c["Re_e_Q"]) > 1e-8:
        problems.append(f"(Re e+, Q) relative = {c['Re_e_Q']:.2e} exceeds 1e-8")
    if problems:
        raise CertificateError("; ".join(problems))


# ----------------------------------------------------------------------
# linear flow and the power-iteration oracle


class LinearFlow:
    """Integrating-factor RK4 for ``dh/dt = -L h`` (or ``+L h`` when ``backward``).

    ``L h = i(1 - Laplacian) h + P h`` with ``P h = V- h2 - i V+ h1``; the
    first part is integrated exactly.
    """

    def __init__(self, ctx: QuadFormContext, dt: float, backward: bool = False):
        self.ctx = ctx
        self.dt = float(dt)
        self.sign = -1.0 if backward else 1.0
        self._half = self._phi(0.5 * self.dt)
        self._full = self._phi(self.dt)

    def _phi(self, tau):
        # exp(-sign * i (1 - Laplacian) tau) = e^{-i sign tau} exp(i sign tau Laplacian)
        free = self.ctx.grid.free_propagator(self.sign * tau)
        phase = np.exp(-1j * self.sign * tau)
        return lambda h: phase * free(h)

    def _rhs(self, h):
        ctx = self.ctx
        return -self.sign * (ctx.V_minus * h.imag - 1j * ctx.V_plus * h.real)

    def advance(self, h, dt=None):
        if dt is None:
            dt, half, full = self.dt, self._half, self._full
        else:
            half, full = self._phi(0.5 * dt), self._phi(dt)
        k1 = self._rhs(h)
        k2 = self._rhs(half(h + 0.5 * dt * k1))
        k3 = self._rhs(half(h) + 0.5 * dt * k2)
        k4 = self._rhs(full(h) + dt * half(k3))
        return full(h) + dt / 6 * (full(k1) + 2 * half(k2 + k3) + k4)


def lambda1_power_iteration(
    ctx: QuadFormContext,
    dt: float = 1e-3,
    interval: float = 0.5,
    tol: float = 1e-12,
    t_max: float = 200.0,
    seed_field=None,
):
    """Estimate ``lambda1`` by running ``dh/dt = +L h`` (the linear flow backward in time).

    Every ``interval`` time units the iterate is renormalized and the
    growth rate ``log(||h(t+interval)|| / ||h(t)||) / interval`` recorded.
    Returns ``(lambda1, history)``.
    """
    grid = ctx.grid
    flow = LinearFlow(ctx, dt, backward=True)
    h = np.exp(-grid.x**2).astype(complex) if seed_field is None else np.asarray(seed_field, dtype=complex)
    h /= grid.norm(h)
    n_sub = int(round(interval / dt))
    tau = n_sub * dt
    history = []
    t = 0.0
    while t < t_max:
        for _ in range(n_sub):
            h = flow.advance(h)
        t += tau
        nrm = grid.norm(h)
        history.append(np.log(nrm) / tau)
        h /= nrm
        if len(history) >= 10 and abs(history[-1] - history[-2]) <= tol * abs(history[-1]):
            break
    return history[-1], history


# ----------------------------------------------------------------------
# B-perp machinery


def project_Bperp(f, sb: SpectralBundle):
    """Remove the ``e+``, ``e-``, ``iQ`` and ``d_j Q`` components of ``f``.

    Returns ``(g, coeffs)`` with ``coeffs = (alpha+, alpha-, gamma_0, ..., gamma_d)``.
    """
    grid = sb.grid
    f = _as_complex(f)
    grid.check(f)
    e = sb.e_plus
    ap = -sb.F_with(f, -1)
    am = -sb.F_with(f, +1)
    iQ = sb.kernel[0]
    rest = f - ap * e - am * np.conj(e)
    gammas = [grid.inner(rest, iQ) / grid.inner(iQ, iQ)]
    g = rest - gammas[0] * iQ
    for d in sb.kernel[1:]:
        gj = grid.inner(f, d) / grid.inner(d, d)
        gammas.append(gj)
        g = g - gj * d
    return g, (ap, am, *gammas)


def random_smooth_field(grid: Grid, rng: np.random.Generator):
    """Band-limited complex noise on the lowest ``N/8`` modes, unit-variance coefficients."""
    n_modes = grid.N // 8
    if grid.dim == 1:
        half = n_modes // 2
        coeffs = np.zeros(grid.N, dtype=complex)
        idx = np.r_[0:half, grid.N - half:grid.N]
        coeffs[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
        return np.fft.ifft(coeffs) * np.sqrt(grid.N)
    # radial: lowest Dirichlet sine modes of the ball, j0(n pi r / L)
    r = grid.x
    n = np.arange(1, n_modes + 1)
    basis = np.sinc(np.outer(r, n) / grid.L)
    c = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    return basis @ c


@dataclass(frozen=True)
class CoercivityResult:
    c_min: float
    samples: list


def coercivity_probe(sb: SpectralBundle, trials: int = 200, seed: int = 0) -> CoercivityResult:
    """Minimum of ``F(g, g) / ||g||_{H^1}^2`` over random fields projected onto B-perp."""
    if trials < 100:
        raise ValueError("coercivity probe needs at least 100 trials")
    grid, ctx = sb.grid, sb.ctx
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(trials):
        g, _ = project_Bperp(random_smooth_field(grid, rng), sb)
        ratio = quad_form_F(g, g, ctx) / grid.h1_sq(g)
        if ratio <= 0:
            raise CoercivityError(f"coercivity violated: F(g, g)/||g||^2_H1 = {ratio:.3e}")
        samples.append(ratio)
    return CoercivityResult(c_min=float(min(samples)), samples=samples)
