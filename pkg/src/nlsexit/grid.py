"""Discretization of R^d used throughout the package.

Two geometries are supported:

* ``dim=1``: periodic box ``[-L, L)`` with Fourier collocation.
* ``dim=3``: radial functions on the ball ``r < L`` with a homogeneous
  Dirichlet condition at ``r = L``, discretized by second-order finite
  volumes on a uniform cell-centred grid.

Fields are plain complex numpy arrays of length ``grid.N``.  All operators
are self-adjoint with respect to the quadrature weights, so discrete
integration by parts holds exactly.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

__all__ = ["Grid", "make_grid", "GridError"]


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable grid.  Build through :func:`make_grid`."""

    dim: int
    L: float
    N: int
    x: np.ndarray
    weights: np.ndarray
    # dim=1: angular wavenumbers; dim=3: None
    k: np.ndarray | None = None
    # dim=3: face areas over spacing (symmetric stiffness couplings)
    _couplings: np.ndarray | None = field(default=None, repr=False)

    @property
    def dx(self) -> float:
        return 2 * self.L / self.N if self.dim == 1 else self.L / self.N

    @property
    def volume(self) -> float:
        return 2 * self.L if self.dim == 1 else 4 * np.pi * self.L**3 / 3

    # ------------------------------------------------------------------
    # quadrature
    def integrate(self, f):
        return np.sum(self.weights * f)

    def inner(self, f, g) -> float:
        """Real L^2 inner product ``Re int f conj(g)``."""
        return float(np.sum(self.weights * (f.real * g.real + f.imag * g.imag)))

    def norm(self, f) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def check(self, *fields):
        for f in fields:
            if np.shape(f) != (self.N,):
                raise GridError(f"field of shape {np.shape(f)} does not live on a grid with N={self.N}")

    # ------------------------------------------------------------------
    # differential operators
    def laplacian(self, u):
        if self.dim == 1:
            return np.fft.ifft(-(self.k**2) * np.fft.fft(u))
        return self._stiffness_apply(u) / (-self.weights)

    def derivative(self, u):
        """``d/dx`` (dim=1 only)."""
        if self.dim != 1:
            raise GridError("derivative is only defined for dim=1 grids")
        du = np.fft.ifft(1j * self.k * np.fft.fft(u))
        return du.real if np.isrealobj(u) else du

    def kinetic(self, u) -> float:
        """``||grad u||_{L^2}^2``."""
        if self.dim == 1:
            uh = np.fft.fft(u)
            return float(np.sum(self.k**2 * np.abs(uh) ** 2) * self.dx / self.N)
        return float(np.real(np.vdot(u, self._stiffness_apply(u))))

    def h1_sq(self, u) -> float:
        return self.kinetic(u) + self.inner(u, u)

    def h1_norm(self, u) -> float:
        return float(np.sqrt(self.h1_sq(u)))

    def hdot_norm(self, u, s: float) -> float:
        """Homogeneous Sobolev norm ``||u||_{H^s-dot}`` via the |xi|^(2s) weight (dim=1)."""
        if self.dim != 1:
            raise GridError("hdot_norm is only implemented for dim=1")
        uh = np.fft.fft(u)
        return float(np.sqrt(np.sum(np.abs(self.k) ** (2 * s) * np.abs(uh) ** 2) * self.dx / self.N))

    def helmholtz_solve(self, f):
        """Exact inverse of the discrete ``-Laplacian + 1``."""
        if self.dim == 1:
            out = np.fft.ifft(np.fft.fft(f) / (1.0 + self.k**2))
            return out.real if np.isrealobj(f) else out
        return solve_banded((1, 1), self._banded(1.0, 1.0), self.weights * f)

    def shift(self, u, x0: float):
        """Return ``u(x + x0)`` by a transform-space phase (dim=1)."""
        if self.dim != 1:
            raise GridError("translations are only defined for dim=1")
        out = np.fft.ifft(np.exp(1j * self.k * x0) * np.fft.fft(u))
        return out.real if np.isrealobj(u) else out

    def free_propagator(self, tau: float):
        """Exact discrete ``exp(i tau Laplacian)`` as a callable on fields."""
        if self.dim == 1:
            mult = np.exp(-1j * tau * self.k**2)
            return lambda u: np.fft.ifft(mult * np.fft.fft(u))
        evals, evecs, sw = self._symmetric_eig
        mat = (evecs * np.exp(-1j * tau * evals)) @ evecs.T
        return lambda u: (mat @ (sw * u)) / sw

    @cached_property
    def _symmetric_eig(self):
        # W^{-1/2} K W^{-1/2} is symmetric tridiagonal
        from scipy.linalg import eigh_tridiagonal

        diag, off = self.stiffness_diagonals()
        sw = np.sqrt(self.weights)
        evals, evecs = eigh_tridiagonal(diag / self.weights, off / (sw[:-1] * sw[1:]))
        return evals, evecs, sw

    # ------------------------------------------------------------------
    # radial finite-volume internals
    def _stiffness_apply(self, u):
        """``K u`` where ``K`` is the symmetric stiffness matrix (``-W Laplacian``)."""
        c = self._couplings
        out = np.zeros_like(u)
        d = u[1:] - u[:-1]
        out[:-1] -= c[:-1] * d
        out[1:] += c[:-1] * d
        out[-1] += c[-1] * u[-1]  # Dirichlet face at r = L
        return out

    def stiffness_diagonals(self):
        c = self._couplings
        diag = np.zeros(self.N)
        diag[:-1] += c[:-1]
        diag[1:] += c[:-1]
        diag[-1] += c[-1]
        return diag, -c[:-1]

    def _banded(self, a: float, b: complex):
        """Banded storage of ``a*W + b*K`` for :func:`scipy.linalg.solve_banded`."""
        diag, off = self.stiffness_diagonals()
        ab = np.zeros((3, self.N), dtype=np.result_type(a, b, float))
        ab[0, 1:] = b * off
        ab[1] = a * self.weights + b * diag
        ab[2, :-1] = b * off
        return ab


def make_grid(dim: int, L: float, N: int) -> Grid:
    """Build a grid.

    Args:
        dim: 1 (periodic line) or 3 (radial ball).
        L: domain half-width / ball radius.
        N: number of nodes; a power of two for ``dim=1``; at least 256.
    """
    if dim not in (1, 3):
        raise GridError(f"dim must be 1 or 3 (radial), got {dim}")
    if not L > 0:
        raise GridError(f"L must be positive, got {L}")
    N = int(N)
    if N < 256:
        raise GridError(f"N={N} is under-resolved; need N >= 256")
    if dim == 1:
        if N & (N - 1):
            raise GridError(f"N={N} is not a power of two")
        dx = 2 * L / N
        x = -L + dx * np.arange(N)
        k = 2 * np.pi * np.fft.fftfreq(N, d=dx)
        return Grid(dim=1, L=float(L), N=N, x=x, weights=np.full(N, dx), k=k)

    h = L / N
    edges = h * np.arange(N + 1)
    r = 0.5 * (edges[1:] + edges[:-1])
    weights = 4 * np.pi / 3 * (edges[1:] ** 3 - edges[:-1] ** 3)
    couplings = 4 * np.pi * edges[1:] ** 2 / h
    # boundary face sits half a cell away from the last node
    couplings[-1] *= 2
    return Grid(dim=3, L=float(L), N=N, x=r, weights=weights, _couplings=couplings)
