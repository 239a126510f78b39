"""Grid discretization of F_tau(t) and the Chernoff iteration [F_tau(t/n)]^n.

F_tau(t) acts on grid functions by trapezoid quadrature of its one-step
kernel.  Variable coefficients use a dense kernel matrix; when A, b, c are
constant the kernel is translation invariant and an FFT convolution is used.
Outside the grid, functions are extended by zero.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import signal, special

from .kernels import LevyIncrementLaw, _gauss_from_coeffs, levy_density
from .symbols import HamiltonSymbol, div_vector, trace_hess_matrix

__all__ = [
    "GridSpec",
    "GridFunction",
    "GridWarning",
    "NumericalGuardError",
    "KernelOperator",
    "step_operator",
    "apply_F",
    "chernoff_iterate",
    "l1_growth",
    "l1_rate_bound",
    "quantization_step_gap",
    "truncation_radius",
]


class GridWarning(UserWarning):
    """The grid is too small or too coarse for the requested operation."""


class NumericalGuardError(ArithmeticError):
    """The iteration left its a-priori L1 growth bound."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid with ``points`` nodes per axis on [lo, hi]^dim."""

    lo: float
    hi: float
    points: int
    dim: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if self.points < 16:
            raise ValueError("need at least 16 points per axis")
        if not self.hi > self.lo:
            raise ValueError("grid bounds must satisfy lo < hi")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.points - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points ** self.dim

    @property
    def cell(self) -> float:
        return self.h ** self.dim

    def nodes(self) -> np.ndarray:
        """Grid points, shape (size, dim), C order."""
        ax = self.axis
        if self.dim == 1:
            return ax[:, None]
        g = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([g[0].ravel(), g[1].ravel()], axis=-1)

    def weights(self) -> np.ndarray:
        """Trapezoid weights (without the cell volume), flattened."""
        w = np.ones(self.points)
        w[0] = w[-1] = 0.5
        if self.dim == 1:
            return w
        return np.outer(w, w).ravel()

    def sample(self, f, *, check: bool = True, tol: float = 1e-8) -> "GridFunction":
        """Sample ``f`` (callable on (N, dim) points) and check its mass fits the grid."""
        vals = np.asarray(f(self.nodes()))
        gf = GridFunction(self, vals.reshape(self.size))
        if check:
            outside = _mass_outside(self, f)
            total = gf.l1_norm()
            if total > 0 and outside > tol * total:
                raise ValueError(
                    f"grid [{self.lo}, {self.hi}] misses {outside / total:.2e} of the datum's L1 mass"
                )
        return gf


def _mass_outside(grid: GridSpec, f) -> float:
    """L1 mass of ``f`` on a 3x wider grid, outside the original box."""
    width = grid.hi - grid.lo
    big = GridSpec(grid.lo - width, grid.hi + width, 3 * grid.points - 2, grid.dim)
    pts = big.nodes()
    vals = np.abs(np.asarray(f(pts))).reshape(big.size)
    inside = np.all((pts >= grid.lo - 1e-12) & (pts <= grid.hi + 1e-12), axis=-1)
    return float(vals[~inside].sum() * big.cell)


@dataclass(frozen=True, eq=False)
class GridFunction:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.spec.size,):
            v = v.reshape(self.spec.size)
        object.__setattr__(self, "values", v)

    def l1_norm(self) -> float:
        return float(self.spec.cell * np.sum(np.abs(self.values)))

    def integral(self) -> complex | float:
        return self.spec.cell * np.sum(self.spec.weights() * self.values)

    def at(self, x) -> float:
        """Value at a point by cubic interpolation (1-d) or nearest node (2-d)."""
        if self.spec.dim == 1:
            from scipy.interpolate import CubicSpline

            x = float(np.asarray(x).reshape(-1)[0])
            ax = self.spec.axis
            k = int(round((x - ax[0]) / self.spec.h))
            if 0 <= k < ax.size and abs(ax[k] - x) < 1e-12 * max(1.0, abs(x)):
                return self.values[k]
            return CubicSpline(ax, self.values)(x)[()]
        x = np.asarray(x, dtype=float).reshape(-1)
        idx = np.clip(np.rint((x - self.spec.lo) / self.spec.h).astype(int), 0, self.spec.points - 1)
        return self.values[np.ravel_multi_index(tuple(idx), self.spec.shape)]

    def _wrap(self, v) -> "GridFunction":
        return GridFunction(self.spec, v)

    def _other(self, o):
        if isinstance(o, GridFunction):
            if o.spec != self.spec:
                raise ValueError("grid functions live on different grids")
            return o.values
        return o

    def __add__(self, o):
        return self._wrap(self.values + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.values - self._other(o))

    def __rsub__(self, o):
        return self._wrap(self._other(o) - self.values)

    def __mul__(self, o):
        return self._wrap(self.values * self._other(o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._wrap(self.values / self._other(o))

    def __neg__(self):
        return self._wrap(-self.values)


def truncation_radius(H: HamiltonSymbol, t: float, grid: GridSpec,
                      law: LevyIncrementLaw | None = None) -> float:
    """t sup|b| + 10 sqrt(2 A0 t) + farthest jump location."""
    b = H.quad.b(grid.nodes())
    r = t * float(np.max(np.linalg.norm(b, axis=-1))) + 10.0 * math.sqrt(2.0 * H.quad.A0 * t)
    if law is not None and law.rate > 0:
        locs, _ = levy_density(law)
        r += float(np.max(np.linalg.norm(locs, axis=-1)))
    return r


def l1_rate_bound(H: HamiltonSymbol, tau: float, grid: GridSpec) -> float:
    """max(0, -min_q [c - tau Div b - tau^2 tr Hess A]) over the grid nodes.

    The bracket is the adjoint of the generator applied to 1, so it governs
    d/dt of the total mass; the compensated jump part integrates to zero.
    For tau = 0 it reduces to max(0, -min c).
    """
    x = grid.nodes()
    Q = H.quad
    adj = Q.c(x)
    if tau:
        adj = adj - tau * div_vector(Q.b, x) - tau * tau * trace_hess_matrix(Q.A, x)
    return max(0.0, -float(np.min(adj)))


def _worker_count(threads: int | None) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ValueError("threads must be positive")
    return threads


class KernelOperator:
    """Discretized F_tau(t) on a fixed grid, reusable across iterations."""

    def __init__(self, H: HamiltonSymbol, tau: float, t: float, grid: GridSpec, *,
                 threads: int | None = None, fast: bool | None = None):
        if t <= 0:
            raise ValueError("t must be positive")
        if not 0.0 <= tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if H.dim != grid.dim:
            raise ValueError("symbol and grid dimensions differ")
        self.H, self.tau, self.t, self.grid = H, float(tau), float(t), grid
        self.law = LevyIncrementLaw(H.levy, t) if H.has_jumps else None
        self.locs, self.masses = (levy_density(self.law) if self.law is not None
                                  else (np.zeros((1, grid.dim)), np.ones(1)))
        self.radius = truncation_radius(H, t, grid, self.law)
        self.threads = _worker_count(threads)
        self.fast = H.quad.is_constant if fast is None else bool(fast)
        if self.fast and not H.quad.is_constant:
            raise ValueError("the FFT path needs constant coefficients")
        self._w = grid.weights() * grid.cell
        self._matrix = None
        self._stencil = None

    # -- kernel assembly ------------------------------------------------------

    def _kernel_rows(self, rows: slice, nodes: np.ndarray) -> np.ndarray:
        q = nodes[rows, None, :]
        q1 = nodes[None, :, :]
        z = q - q1
        m = self.tau * q + (1.0 - self.tau) * q1
        Q = self.H.quad
        A, b, c = Q.A(m), Q.b(m), Q.c(m)
        out = np.zeros(z.shape[:-1])
        for loc, mass in zip(self.locs, self.masses):
            out += mass * _gauss_from_coeffs(A, b, c, self.t, z + loc)
        out[np.linalg.norm(z, axis=-1) > self.radius] = 0.0
        return out

    @property
    def matrix(self) -> np.ndarray:
        """Dense kernel matrix K[i, j] = K(q_i, q_j) including quadrature weights."""
        if self._matrix is None:
            nodes = self.grid.nodes()
            n = nodes.shape[0]
            chunk = max(1, min(n, 2_000_000 // max(n, 1)))
            slices = [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]
            if self.threads > 1 and len(slices) > 1:
                with ThreadPoolExecutor(self.threads) as ex:
                    parts = list(ex.map(lambda s: self._kernel_rows(s, nodes), slices))
            else:
                parts = [self._kernel_rows(s, nodes) for s in slices]
            self._matrix = np.concatenate(parts, axis=0) * self._w[None, :]
        return self._matrix

    def _stencil_values(self) -> np.ndarray:
        if self._stencil is None:
            g = self.grid
            off = np.arange(-(g.points - 1), g.points) * g.h
            if g.dim == 1:
                z = off[:, None]
            else:
                gz = np.meshgrid(off, off, indexing="ij")
                z = np.stack(gz, axis=-1)
            zero = np.zeros(g.dim)
            Q = self.H.quad
            A, b, c = Q.A(zero), Q.b(zero), Q.c(zero)
            k = np.zeros(z.shape[:-1])
            for loc, mass in zip(self.locs, self.masses):
                k += mass * _gauss_from_coeffs(A, b, c, self.t, z + loc)
            k[np.linalg.norm(z, axis=-1) > self.radius] = 0.0
            self._stencil = k
        return self._stencil

    # -- application ----------------------------------------------------------

    def apply_values(self, v: np.ndarray) -> np.ndarray:
        if self.fast:
            g = self.grid
            wv = (self._w * v).reshape(g.shape)
            full = signal.fftconvolve(wv, self._stencil_values(), mode="full")
            core = tuple(slice(g.points - 1, 2 * g.points - 1) for _ in range(g.dim))
            return full[core].reshape(g.size)
        return self.matrix @ v

    def __call__(self, phi: GridFunction) -> GridFunction:
        if phi.spec != self.grid:
            raise ValueError("grid function lives on a different grid")
        return GridFunction(self.grid, self.apply_values(phi.values))

    def escaped_mass(self, phi: GridFunction) -> float:
        """Estimated fraction of the image's kernel mass landing outside the grid."""
        g = self.grid
        nodes = g.nodes()
        weight = np.abs(phi.values) * self._w
        total = weight.sum()
        if total == 0:
            return 0.0
        Q = self.H.quad
        sd = math.sqrt(2.0 * Q.A0 * self.t)
        mean_shift = self.t * Q.b(nodes)
        esc = np.zeros(nodes.shape[0])
        for loc, mass in zip(self.locs, self.masses):
            # image point q = q1 + t b + noise - loc
            centre = nodes + mean_shift - loc
            inside = np.ones(nodes.shape[0])
            for k in range(g.dim):
                lo = (g.lo - centre[:, k]) / (math.sqrt(2.0) * sd)
                hi = (g.hi - centre[:, k]) / (math.sqrt(2.0) * sd)
                inside *= 0.5 * (special.erf(hi) - special.erf(lo))
            esc += mass * (1.0 - inside)
        return float((weight * esc).sum() / total)


def step_operator(H: HamiltonSymbol, tau: float, t: float, grid: GridSpec, **kw) -> KernelOperator:
    return KernelOperator(H, tau, t, grid, **kw)


def _warn_grid(op: KernelOperator, phi: GridFunction) -> None:
    width = math.sqrt(2.0 * op.H.quad.a0 * op.t)
    if 0.0 < width < op.grid.h:
        warnings.warn(
            f"kernel width {width:.3g} is below the grid spacing {op.grid.h:.3g}; "
            "refine the grid or take fewer steps",
            GridWarning,
            stacklevel=3,
        )
    lost = op.escaped_mass(phi)
    if lost > 1e-6:
        warnings.warn(
            f"kernel truncation by the grid discards about {lost:.2e} of the mass at t={op.t:g}",
            GridWarning,
            stacklevel=3,
        )


def apply_F(H: HamiltonSymbol, tau: float, t: float, phi: GridFunction, *,
            threads: int | None = None, fast: bool | None = None) -> GridFunction:
    """(F_tau(t) phi)(q_i) = h^d sum_j w_j phi(q_j) K(q_i, q_j)."""
    op = KernelOperator(H, tau, t, phi.spec, threads=threads, fast=fast)
    _warn_grid(op, phi)
    return op(phi)


def chernoff_iterate(H: HamiltonSymbol, tau: float, t: float, n: int, phi: GridFunction, *,
                     threads: int | None = None, fast: bool | None = None) -> GridFunction:
    """[F_tau(t/n)]^n phi, aborting if the L1 norm leaves exp(2 k t) ||phi||_1.

    k = l1_rate_bound(H, tau, grid) + 1.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    op = KernelOperator(H, tau, t / n, phi.spec, threads=threads, fast=fast)
    _warn_grid(op, phi)
    k = l1_rate_bound(H, tau, phi.spec) + 1.0
    limit = math.exp(2.0 * k * t) * phi.l1_norm()
    v = phi.values
    for step in range(n):
        v = op.apply_values(v)
        norm = phi.spec.cell * float(np.sum(np.abs(v)))
        if not np.isfinite(norm) or norm > limit:
            raise NumericalGuardError(
                f"L1 norm {norm:.3e} exceeds bound {limit:.3e} after {step + 1} of {n} steps"
            )
    return GridFunction(phi.spec, v)


def l1_growth(H: HamiltonSymbol, tau: float, t: float, phi: GridFunction, **kw) -> float:
    """Empirical exponent log(||F_tau(t) phi||_1 / ||phi||_1) / t."""
    n0 = phi.l1_norm()
    if n0 == 0:
        raise ValueError("phi must not vanish")
    return math.log(apply_F(H, tau, t, phi, **kw).l1_norm() / n0) / t


def quantization_step_gap(H: HamiltonSymbol, tau1: float, tau2: float, t: float,
                          phi: GridFunction, **kw) -> float:
    """||F_tau1(t) phi - F_tau2(t) phi||_1."""
    if tau1 == tau2:
        return 0.0
    return (apply_F(H, tau1, t, phi, **kw) - apply_F(H, tau2, t, phi, **kw)).l1_norm()
