"""Sequential phase-space construction and the Hamiltonian Feynman formula.

Paths q(.) are piecewise constant on the n subintervals of [0, t], with the
tau-continuity rule q(s) = tau q(s+0) + (1 - tau) q(s-0) at interior
breakpoints and the anchor q(t) = x; momenta p(.) are left continuous.  The
map J_n^tau reads off (q(t_k - 0), p(t_k)) for k = 1..n.

The n-th Hamiltonian pre-limit expression

    (2 pi)^{-dn} int exp(i sum_k p_k.(q_{k+1} - q_k)) exp(-(t/n) sum_k H(tau q_{k+1} + (1-tau) q_k, p_k))
                 phi(q_1) dq_1 dp_1 ... dq_n dp_n,        q_{n+1} := x,

is evaluated with each p_k integral done first by a trapezoid rule; those
inner integrals are the step kernels ``hff_step_kernel``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import LevyIncrementLaw, levy_density
from .semigroup import GridFunction, GridSpec, GridWarning, truncation_radius
from .symbols import HamiltonSymbol, as_points, eval_symbol

__all__ = [
    "PhasePath",
    "OscillatoryQuadSpec",
    "CostGuardError",
    "embed",
    "project",
    "action",
    "path_integral",
    "refine",
    "hff_step_kernel",
    "hff_evaluate",
    "hff_cost",
    "MAX_HFF_STEPS",
    "HFF_COST_LIMIT",
]

MAX_HFF_STEPS = 3
HFF_COST_LIMIT = 4e8


class CostGuardError(ValueError):
    """Requested phase-space quadrature is too expensive."""


@dataclass(frozen=True, eq=False)
class PhasePath:
    t: float
    tau: float
    q_values: np.ndarray
    p_values: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q_values, dtype=float)
        p = np.asarray(self.p_values, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        if p.ndim == 1:
            p = p[:, None]
        if q.shape != p.shape:
            raise ValueError("q and p need the same number of pieces")
        x = np.broadcast_to(np.asarray(self.x, dtype=float), (q.shape[1],)).copy()
        object.__setattr__(self, "q_values", q)
        object.__setattr__(self, "p_values", p)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.q_values.shape[0]

    @property
    def breakpoints(self) -> np.ndarray:
        return np.arange(self.n + 1) * (self.t / self.n)

    def _piece(self, s: float) -> tuple[int, bool]:
        u = s * self.n / self.t
        k = int(math.floor(u + 1e-12))
        return k, abs(u - round(u)) < 1e-12

    def q(self, s: float) -> np.ndarray:
        """Position at time s with the tau-rule at interior breakpoints."""
        if not 0.0 <= s <= self.t:
            raise ValueError("s outside [0, t]")
        if s >= self.t - 1e-12 * self.t:
            return self.x.copy()
        if s <= 1e-12 * self.t:
            return self.q_values[0].copy()
        k, on_break = self._piece(s)
        if on_break:
            k = int(round(s * self.n / self.t))
            return self.tau * self.q_values[k] + (1.0 - self.tau) * self.q_values[k - 1]
        return self.q_values[k].copy()

    def q_left(self, s: float) -> np.ndarray:
        """q(s - 0)."""
        k = int(math.ceil(s * self.n / self.t - 1e-12))
        return self.q_values[max(k, 1) - 1].copy()

    def p(self, s: float) -> np.ndarray:
        """Left-continuous momentum, p(0) = p(0+)."""
        if s <= 1e-12 * self.t:
            return self.p_values[0].copy()
        k = int(math.ceil(s * self.n / self.t - 1e-12))
        return self.p_values[min(k, self.n) - 1].copy()


def embed(tup, t: float, tau: float, x) -> PhasePath:
    """Inverse of J_n^tau: (q_1, p_1, ..., q_n, p_n) -> path in E_n^tau."""
    arr = np.asarray(tup, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] % 2:
        raise ValueError("tuple length must be even")
    return PhasePath(t, tau, arr[0::2], arr[1::2], x)


def project(path: PhasePath) -> np.ndarray:
    """J_n^tau(path) = (q(t_k - 0), p(t_k))_{k=1..n}, interleaved, shape (2n, d)."""
    tk = path.breakpoints[1:]
    out = []
    for s in tk:
        out.append(path.q_left(s))
        out.append(path.p(s))
    return np.array(out)


def action(H: HamiltonSymbol, path: PhasePath) -> complex:
    """(t/n) sum_k H(tau q_{k+1} + (1 - tau) q_k, p_k), q_{n+1} := x."""
    q = path.q_values
    qn = np.vstack([q[1:], path.x[None, :]])
    tags = path.tau * qn + (1.0 - path.tau) * q
    return complex(np.sum(eval_symbol(H, tags, path.p_values)) * path.t / path.n)


def path_integral(H: HamiltonSymbol, path: PhasePath) -> complex:
    """int_0^t H(q(s), p(s)) ds along the piecewise-constant path."""
    return complex(np.sum(eval_symbol(H, path.q_values, path.p_values)) * path.t / path.n)


def refine(path: PhasePath, factor: int = 2) -> PhasePath:
    """The same step path described on ``factor`` times more subintervals."""
    return PhasePath(path.t, path.tau, np.repeat(path.q_values, factor, axis=0),
                     np.repeat(path.p_values, factor, axis=0), path.x)


@dataclass(frozen=True)
class OscillatoryQuadSpec:
    """Trapezoid rule in p on [-p_max, p_max]^d.

    Unset ``p_max`` / ``points`` are chosen from the symbol: p_max so that the
    Gaussian damping exp(-(t a0 + eps) p^2) falls below ``tail``, the spacing so
    that neither aliasing nor the oscillation exp(i p.z) is underresolved.
    ``eps_schedule`` switches on Richardson extrapolation to eps -> 0.
    """

    p_max: float | None = None
    points: int | None = None
    eps: float = 0.0
    eps_schedule: tuple[float, ...] = field(default_factory=tuple)
    tail: float = 1e-16

    def __post_init__(self):
        if self.eps < 0 or any(e <= 0 for e in self.eps_schedule):
            raise ValueError("regularization must be nonnegative")

    def resolve(self, H: HamiltonSymbol, t: float, zmax: float, reach: float, eps: float
                ) -> tuple[float, int]:
        damp = t * H.quad.a0 + eps
        if self.p_max is not None:
            P = float(self.p_max)
        else:
            if damp <= 0:
                raise ValueError("no Gaussian damping in p: set eps > 0 or p_max")
            P = math.sqrt(math.log(1.0 / self.tail) / damp)
        if self.points is not None:
            return P, int(self.points)
        # aliasing images sit at 2 pi / h_p; keep them beyond the kernel's reach
        spread = 10.0 * math.sqrt(2.0 * (t * H.quad.A0 + eps)) + reach
        hp = min(2.0 * math.pi / (zmax + spread), math.pi / (4.0 * max(zmax, 1e-300)))
        n = int(math.ceil(2.0 * P / hp)) + 1
        return P, n + (1 - n % 2)


def _p_grid(P: float, n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    ax = np.linspace(-P, P, n)
    w = np.full(n, ax[1] - ax[0])
    w[0] = w[-1] = 0.5 * w[0]
    if d == 1:
        return ax[:, None], w
    g0, g1 = np.meshgrid(ax, ax, indexing="ij")
    return np.stack([g0.ravel(), g1.ravel()], axis=-1), np.outer(w, w).ravel()


def _step_kernel_eps(H, tau, t, q, q1, quad: OscillatoryQuadSpec, eps: float, chunk: int):
    d = H.dim
    z = q - q1
    m = tau * q + (1.0 - tau) * q1
    zmax = float(np.max(np.linalg.norm(z, axis=-1))) if z.size else 0.0
    reach = 0.0
    if H.has_jumps:
        locs, _ = levy_density(LevyIncrementLaw(H.levy, t))
        reach = float(np.max(np.linalg.norm(locs, axis=-1)))
    P, npts = quad.resolve(H, t, zmax, reach, eps)
    pts, w = _p_grid(P, npts, d)
    hp = 2.0 * P / (npts - 1)
    if zmax * hp > math.pi / 4.0:
        warnings.warn(f"p-grid spacing {hp:.3g} underresolves exp(i p z) for |z| up to {zmax:.3g}",
                      GridWarning, stacklevel=3)
    zf = z.reshape(-1, d)
    mf = m.reshape(-1, d)
    out = np.empty(zf.shape[0], dtype=complex)
    reg = np.exp(-eps * np.sum(pts * pts, axis=-1)) * w if eps else w
    Q = H.quad
    rp = None
    if H.has_jumps:
        from .symbols import levy_exponent

        rp = levy_exponent(H.levy, pts)
    quadp = np.einsum("ki,kj->kij", pts, pts)
    for s in range(0, zf.shape[0], chunk):
        mm = mf[s:s + chunk]
        A, b, c = Q.A(mm), Q.b(mm), Q.c(mm)
        hq = (np.einsum("nij,kij->nk", A, quadp) + 1j * (b @ pts.T) + c[:, None])
        if rp is not None:
            hq = hq + rp[None, :]
        integrand = np.exp(1j * (zf[s:s + chunk] @ pts.T) - t * hq)
        out[s:s + chunk] = integrand @ reg
    return (out / (2.0 * np.pi) ** d).reshape(z.shape[:-1])


def hff_step_kernel(H: HamiltonSymbol, tau: float, t: float, q, q1,
                    spec: OscillatoryQuadSpec | None = None, *, chunk: int = 512) -> np.ndarray:
    """(2 pi)^{-d} int exp(i p.(q - q1)) exp(-t H(tau q + (1-tau) q1, p)) exp(-eps |p|^2) dp.

    With ``spec.eps_schedule`` the values at the listed eps are extrapolated
    to eps = 0 by Richardson (polynomial in eps).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    spec = OscillatoryQuadSpec() if spec is None else spec
    d = H.dim
    q = as_points(q, d)
    q1 = as_points(q1, d)
    q, q1 = np.broadcast_arrays(q, q1)
    if not spec.eps_schedule:
        return _step_kernel_eps(H, tau, t, q, q1, spec, spec.eps, chunk)
    eps = np.array(spec.eps_schedule, dtype=float)
    vals = np.array([_step_kernel_eps(H, tau, t, q, q1, spec, e, chunk) for e in eps])
    # Lagrange extrapolation of the polynomial through (eps_i, vals_i) to eps = 0
    weights = np.array([np.prod([-eps[j] / (eps[i] - eps[j]) for j in range(eps.size) if j != i])
                        for i in range(eps.size)])
    return np.tensordot(weights, vals, axes=1)


def hff_cost(grid: GridSpec, n: int, p_points: int) -> float:
    """Complex exponentials needed by ``hff_evaluate`` with the nested quadrature."""
    inner = grid.size * grid.size if n > 1 else grid.size
    return float(inner * p_points ** grid.dim)


def hff_evaluate(H: HamiltonSymbol, tau: float, t: float, n: int, phi, x, grid: GridSpec,
                 spec: OscillatoryQuadSpec | None = None, *,
                 cost_limit: float = HFF_COST_LIMIT) -> complex:
    """n-th Hamiltonian pre-limit expression at the anchor x (d = 1, n <= 3).

    ``phi`` is a callable on (N, 1) points or a GridFunction on ``grid``.  The
    q-integrals use the grid's trapezoid rule; kernel pairs farther apart than
    the Lagrangian truncation radius are dropped, as in ``apply_F``.
    """
    if H.dim != 1 or grid.dim != 1:
        raise ValueError("hff_evaluate is implemented for d = 1")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if n > MAX_HFF_STEPS:
        raise CostGuardError(f"n = {n} exceeds the phase-space limit {MAX_HFF_STEPS}")
    spec = OscillatoryQuadSpec() if spec is None else spec
    dt = t / n
    law = LevyIncrementLaw(H.levy, dt) if H.has_jumps else None
    eps_max = max((spec.eps,) + tuple(spec.eps_schedule))
    radius = truncation_radius(H, dt, grid, law) + 10.0 * math.sqrt(2.0 * eps_max)
    nodes = grid.nodes()
    reach = 0.0
    if law is not None:
        locs, _ = levy_density(law)
        reach = float(np.max(np.abs(locs)))
    _, p_pts = spec.resolve(H, dt, min(radius, grid.hi - grid.lo), reach, spec.eps)
    cost = hff_cost(grid, n, p_pts) * max(1, len(spec.eps_schedule))
    if cost > cost_limit:
        raise CostGuardError(f"phase-space quadrature needs ~{cost:.2e} evaluations "
                             f"(limit {cost_limit:.2e})")
    w = grid.weights() * grid.cell
    if isinstance(phi, GridFunction):
        f = phi.values.astype(complex)
    else:
        f = np.asarray(phi(nodes), dtype=complex).reshape(grid.size)
    xs = np.asarray(x, dtype=float).reshape(1, 1)
    if n > 1:
        qi = nodes[:, None, :]
        qj = nodes[None, :, :]
        mask = np.abs(qi - qj)[..., 0] <= radius
        K = np.zeros((grid.size, grid.size), dtype=complex)
        ii, jj = np.nonzero(mask)
        K[ii, jj] = hff_step_kernel(H, tau, dt, nodes[ii], nodes[jj], spec)
        for _ in range(n - 1):
            f = K @ (w * f)
    kx = np.zeros(grid.size, dtype=complex)
    near = np.abs(nodes[:, 0] - xs[0, 0]) <= radius
    kx[near] = hff_step_kernel(H, tau, dt, np.broadcast_to(xs, (int(near.sum()), 1)),
                               nodes[near], spec)
    return complex(np.sum(kx * w * f))
