"""Closed-form one-step transition kernels.

The one-step kernel of F_tau(t) is the inverse Fourier transform of
exp(-t H(m, .)) at the ordering point m = tau q + (1 - tau) q1.  Its
quadratic part is the Gaussian ``gaussian_kernel``; its jump part is the law
of the compound-Poisson increment J = (sum of Poisson(lam t) atoms) - t gamma,
whose characteristic function E exp(i p.J) equals exp(-t r(p)).  Fourier
inversion then gives

    K(q, q1) = E[ g^m_t(q - q1 + J) ].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .symbols import EllipticityError, HamiltonSymbol, LevySpec, as_points

__all__ = [
    "LevyIncrementLaw",
    "default_series_depth",
    "poisson_tail",
    "gaussian_kernel",
    "levy_density",
    "levy_increment_sample",
    "one_step_kernel",
    "jump_reach",
    "COND_LIMIT",
]

COND_LIMIT = 1e12


def default_series_depth(lam_t: float) -> int:
    """Poisson terms needed for a tail below 1e-10."""
    if lam_t <= 0.0:
        return 0
    return int(math.ceil(lam_t + 8.0 * math.sqrt(lam_t) + 8.0))


def poisson_tail(lam_t: float, depth: int) -> float:
    """P(Poisson(lam_t) > depth)."""
    if lam_t <= 0.0:
        return 0.0
    return float(stats.poisson.sf(depth, lam_t))


@dataclass(frozen=True, eq=False)
class LevyIncrementLaw:
    """Law mu_t of the increment over time t of the Levy process with exponent r."""

    spec: LevySpec | None
    t: float
    series_depth: int | None = None
    shift: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("time step must be positive")
        lam_t = self.rate * self.t
        if self.series_depth is None:
            object.__setattr__(self, "series_depth", default_series_depth(lam_t))
        elif self.series_depth < 0:
            raise ValueError("series_depth must be nonnegative")
        if self.spec is None or self.spec.empty:
            d = 1 if self.spec is None else self.spec.dim
            shift = np.zeros(d)
        else:
            shift = -self.t * self.spec.gamma
        shift.setflags(write=False)
        object.__setattr__(self, "shift", shift)

    @property
    def rate(self) -> float:
        return 0.0 if self.spec is None else self.spec.rate

    @property
    def dim(self) -> int:
        return self.shift.shape[0]

    @property
    def tail(self) -> float:
        return poisson_tail(self.rate * self.t, self.series_depth)


def gaussian_kernel(H: HamiltonSymbol, x, t: float, z) -> np.ndarray:
    """g^x_t(z): inverse Fourier transform of exp(-t h(x, .)) at z.

    (4 pi t)^{-d/2} det A(x)^{-1/2} exp(-t c(x)) exp(-(z - t b(x)).A(x)^{-1}(z - t b(x)) / 4t)
    """
    if t <= 0:
        raise ValueError("t must be positive")
    d = H.dim
    x = as_points(x, d)
    z = as_points(z, d)
    Q = H.quad
    A = Q.A(x)
    b = Q.b(x)
    c = Q.c(x)
    return _gauss_from_coeffs(A, b, c, t, z)


def _gauss_from_coeffs(A, b, c, t, z) -> np.ndarray:
    d = A.shape[-1]
    if d == 1:
        a = A[..., 0, 0]
        if np.any(a <= 0.0):
            raise EllipticityError("A(x) is not positive definite")
        u = z[..., 0] - t * b[..., 0]
        return np.exp(-t * c - u * u / (4.0 * t * a)) / np.sqrt(4.0 * np.pi * t * a)
    ev = np.linalg.eigvalsh(A)
    if np.any(ev[..., 0] <= 0.0) or np.any(ev[..., -1] / ev[..., 0] > COND_LIMIT):
        raise EllipticityError("A(x) is numerically non-invertible")
    det = np.prod(ev, axis=-1)
    Ainv = np.linalg.inv(A)
    u = z - t * b
    quad = np.einsum("...i,...ij,...j->...", u, Ainv, u)
    return np.exp(-t * c - quad / (4.0 * t)) / ((4.0 * np.pi * t) ** (d / 2.0) * np.sqrt(det))


def levy_density(law: LevyIncrementLaw) -> tuple[np.ndarray, np.ndarray]:
    """Atomic decomposition of mu_t truncated after ``series_depth`` jumps.

    Returns ``(locations, masses)`` with locations of shape (m, d); the mass
    deficit 1 - sum(masses) equals the Poisson tail beyond the depth.
    """
    d = law.dim
    if law.rate == 0.0:
        return law.shift[None, :].copy(), np.ones(1)
    spec = law.spec
    lam_t = law.rate * law.t
    locs = [np.zeros((1, d))]
    probs = [np.ones(1)]
    cur_l, cur_p = locs[0], probs[0]
    for _ in range(law.series_depth):
        nl = (cur_l[:, None, :] + spec.atoms[None, :, :]).reshape(-1, d)
        np_ = (cur_p[:, None] * spec.probs[None, :]).reshape(-1)
        cur_l, cur_p = _merge_atoms(nl, np_)
        locs.append(cur_l)
        probs.append(cur_p)
    pk = stats.poisson.pmf(np.arange(law.series_depth + 1), lam_t)
    all_l = np.concatenate(locs)
    all_p = np.concatenate([pk[k] * probs[k] for k in range(len(probs))])
    all_l, all_p = _merge_atoms(all_l, all_p)
    return all_l + law.shift, all_p


def _merge_atoms(locs: np.ndarray, masses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    key = np.round(locs, 12)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    out = np.zeros(uniq.shape[0])
    np.add.at(out, inv.reshape(-1), masses)
    return uniq, out


def levy_increment_sample(law: LevyIncrementLaw, rng: np.random.Generator,
                          size: int | None = None) -> np.ndarray:
    """Exact draws from mu_t: Poisson count, categorical atoms, shift -t gamma."""
    n = 1 if size is None else int(size)
    d = law.dim
    out = np.broadcast_to(law.shift, (n, d)).copy()
    if law.rate > 0.0:
        counts = rng.poisson(law.rate * law.t, size=n)
        total = int(counts.sum())
        if total:
            idx = rng.choice(law.spec.probs.size, size=total, p=law.spec.probs)
            owner = np.repeat(np.arange(n), counts)
            np.add.at(out, owner, law.spec.atoms[idx])
    return out[0] if size is None else out


def jump_reach(law: LevyIncrementLaw) -> float:
    """Largest |location| among the retained atoms of mu_t."""
    locs, _ = levy_density(law)
    return float(np.max(np.linalg.norm(locs, axis=-1)))


def one_step_kernel(H: HamiltonSymbol, tau: float, t: float, q, q1,
                    law: LevyIncrementLaw | None = None) -> np.ndarray:
    """Kernel of F_tau(t): [g^m_t * mu_t](q - q1), m = tau q + (1 - tau) q1.

    ``law`` may be passed to reuse a precomputed increment law for step t.
    """
    d = H.dim
    q = as_points(q, d)
    q1 = as_points(q1, d)
    m = tau * q + (1.0 - tau) * q1
    z = q - q1
    Q = H.quad
    A, b, c = Q.A(m), Q.b(m), Q.c(m)
    if not H.has_jumps:
        return _gauss_from_coeffs(A, b, c, t, z)
    if law is None:
        law = LevyIncrementLaw(H.levy, t)
    locs, masses = levy_density(law)
    out = np.zeros(np.broadcast_shapes(z.shape[:-1], c.shape))
    for loc, mass in zip(locs, masses):
        out = out + mass * _gauss_from_coeffs(A, b, c, t, z + loc)
    return out
