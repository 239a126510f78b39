"""Closed-form solutions for constant coefficients and Gaussian data.

For constant A, b, c the step kernel is Gaussian with mean t b and covariance
2 t A, so a Gaussian datum stays Gaussian:

    phi(q) = a exp(-(q - m).S^{-1}(q - m) / 2)
    T_t phi(q) = a e^{-tc} sqrt(det S / det(S + 2tA)) exp(-(q - m - tb).(S + 2tA)^{-1}(q - m - tb) / 2)

Jumps turn this into a finite Poisson mixture of shifted Gaussians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import LevyIncrementLaw, levy_density
from .symbols import CoefficientField, HamiltonSymbol, LevySpec, QuadraticSymbol, as_points

__all__ = [
    "ConstantCoeffProblem",
    "GaussianMixture",
    "exact_gaussian_solution",
    "exact_jump_solution",
]


@dataclass(frozen=True, eq=False)
class ConstantCoeffProblem:
    A: np.ndarray
    b: np.ndarray
    c: float
    levy: LevySpec | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = A.shape[0]
        b = np.broadcast_to(np.asarray(self.b, dtype=float), (d,)).copy()
        if A.shape != (d, d) or np.max(np.abs(A - A.T)) > 1e-12:
            raise ValueError("A must be a symmetric square matrix")
        if np.linalg.eigvalsh(A)[0] <= 0:
            raise ValueError("A must be positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def symbol(self) -> HamiltonSymbol:
        d = self.dim
        ev = np.linalg.eigvalsh(self.A)
        quad = QuadraticSymbol(
            CoefficientField.constant_field(self.A, d, "matrix"),
            CoefficientField.constant_field(self.b, d, "vector"),
            CoefficientField.constant_field(self.c, d, "scalar"),
            a0=float(ev[0]),
            A0=float(ev[-1]),
        )
        return HamiltonSymbol(quad, self.levy)


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """sum_k a_k exp(-(q - m_k).S_k^{-1}(q - m_k) / 2)."""

    amps: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @classmethod
    def single(cls, mean=0.0, s: float = 1.0, amp: float = 1.0, dim: int = 1) -> "GaussianMixture":
        m = np.broadcast_to(np.asarray(mean, dtype=float), (dim,))
        return cls(np.array([float(amp)]), m[None, :].copy(), (s * s * np.eye(dim))[None])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def __call__(self, q) -> np.ndarray:
        q = as_points(q, self.dim)
        out = 0.0
        for a, m, S in zip(self.amps, self.means, self.covs):
            u = q - m
            out = out + a * np.exp(-0.5 * np.einsum("...i,ij,...j->...", u, np.linalg.inv(S), u))
        return out

    def evolve(self, prob: ConstantCoeffProblem, t: float, series_depth: int | None = None
               ) -> tuple["GaussianMixture", float]:
        """Exact image under the constant-coefficient semigroup; returns (mixture, tail bound)."""
        if t == 0:
            return self, 0.0
        if prob.levy is not None and not prob.levy.empty:
            law = LevyIncrementLaw(prob.levy, t, series_depth)
            locs, masses = levy_density(law)
            tail = law.tail
        else:
            locs, masses, tail = np.zeros((1, self.dim)), np.ones(1), 0.0
        amps, means, covs = [], [], []
        D = 2.0 * t * prob.A
        damp = np.exp(-t * prob.c)
        for a, m, S in zip(self.amps, self.means, self.covs):
            S2 = S + D
            f = a * damp * np.sqrt(np.linalg.det(S) / np.linalg.det(S2))
            for loc, mass in zip(locs, masses):
                amps.append(f * mass)
                means.append(m + t * prob.b - loc)
                covs.append(S2)
        return GaussianMixture(np.array(amps), np.array(means), np.array(covs)), tail


def exact_gaussian_solution(prob: ConstantCoeffProblem, t: float, q0, mean=0.0, s: float = 1.0
                            ) -> np.ndarray:
    """T_t phi(q0) for phi(q) = exp(-|q - mean|^2 / 2 s^2) without jumps."""
    if prob.levy is not None and not prob.levy.empty:
        raise ValueError("use exact_jump_solution when jumps are present")
    mix, _ = GaussianMixture.single(mean, s, dim=prob.dim).evolve(prob, t)
    return mix(q0)


def exact_jump_solution(prob: ConstantCoeffProblem, t: float, q0, mean=0.0, s: float = 1.0,
                        series_depth: int | None = None) -> tuple[np.ndarray, float]:
    """Poisson-series solution with jumps; returns (value, series tail bound).

    The tail bound is P(more than ``series_depth`` jumps), which bounds the
    truncation error relative to sup |phi|.
    """
    mix, tail = GaussianMixture.single(mean, s, dim=prob.dim).evolve(prob, t, series_depth)
    return mix(q0), tail
