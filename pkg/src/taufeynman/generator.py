"""The generator H_tau(., D) in differential-plus-jump form and in spectral form.

Under the Fourier convention F[phi](p) = (2 pi)^{-d/2} int exp(-i p.q) phi(q) dq
the symbol maps to operators by p -> -i grad, so

    H_tau phi = -tr(A Hess phi) + b_tau . grad phi + c_tau phi
                - sum_j w_j (phi(q + y_j) - phi(q) - y_j . grad phi / (1 + |y_j|^2))

where b_tau, c_tau are the coefficients of ``tau_transform``.  The jump sum
enters with a minus sign: its symbol is exactly r(p), and -H_tau is then the
generator of a positive (Levy-type) semigroup.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .semigroup import GridFunction, GridSpec, GridWarning, apply_F
from .symbols import HamiltonSymbol, as_points, eval_symbol, tau_transform

__all__ = [
    "SmoothTestFunction",
    "gaussian_test_function",
    "apply_generator",
    "apply_pdo_spectral",
    "derivative_residual",
]


@dataclass(frozen=True, eq=False)
class SmoothTestFunction:
    """Rapidly decaying smooth function with analytic first and second derivatives."""

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    support_radius: float

    def __call__(self, q) -> np.ndarray:
        return self.value(as_points(q, self.dim))

    def on(self, grid: GridSpec) -> GridFunction:
        return grid.sample(self.value)


def gaussian_test_function(dim: int = 1, mean=0.0, s: float = 1.0, amp: float = 1.0
                           ) -> SmoothTestFunction:
    """phi(q) = amp exp(-|q - mean|^2 / 2 s^2); negligible (< 1e-12) beyond its radius."""
    m = np.broadcast_to(np.asarray(mean, dtype=float), (dim,)).copy()
    s2 = s * s

    def value(q):
        u = q - m
        return amp * np.exp(-0.5 * np.sum(u * u, axis=-1) / s2)

    def grad(q):
        return -(q - m) / s2 * value(q)[..., None]

    def hess(q):
        u = (q - m) / s2
        return (u[..., :, None] * u[..., None, :] - np.eye(dim) / s2) * value(q)[..., None, None]

    radius = m.max() + s * np.sqrt(2.0 * np.log(1e12 * max(1.0, amp) * 10.0))
    return SmoothTestFunction(dim, value, grad, hess, float(radius))


def apply_generator(H: HamiltonSymbol, tau: float, phi: SmoothTestFunction, q) -> np.ndarray:
    """(H_tau(., D) phi)(q) from the differential form plus the jump sum."""
    d = H.dim
    q = as_points(q, d)
    Q = tau_transform(H, tau).quad
    A = Q.A(q)
    out = (-np.einsum("...ij,...ji->...", A, phi.hess(q))
           + np.einsum("...i,...i->...", Q.b(q), phi.grad(q))
           + Q.c(q) * phi.value(q)).astype(complex)
    if H.has_jumps:
        L = H.levy
        f0 = phi.value(q)
        g0 = phi.grad(q)
        y2 = np.sum(L.atoms * L.atoms, axis=1)
        jump = np.zeros_like(f0)
        for y, w, yy in zip(L.atoms, L.weights, y2):
            jump = jump + w * (phi.value(q + y) - f0 - (g0 @ y) / (1.0 + yy))
        out = out - jump
    return out


def apply_pdo_spectral(H: HamiltonSymbol, phi: GridFunction, *, chunk: int = 256) -> GridFunction:
    """qp-quantization via the discrete Fourier transform.

    (2 pi)^{-d/2} int exp(i p.q) H(q, p) F[phi](p) dp, with F[phi] computed by FFT
    on the grid's reciprocal lattice and the p-sum done per output point.
    """
    g = phi.spec
    d = g.dim
    M = g.points
    h = g.h
    freqs = 2.0 * np.pi * np.fft.fftfreq(M, d=h)
    dp = 2.0 * np.pi / (M * h)
    # F[phi](p) ~ (2 pi)^{-d/2} h^d sum_j exp(-i p.(lo + j h)) phi_j
    vals = phi.values.reshape(g.shape)
    hat = np.fft.fftn(vals) * h ** d / (2.0 * np.pi) ** (d / 2.0)
    if d == 1:
        P = freqs[:, None]
        hat = hat * np.exp(-1j * freqs * g.lo)
    else:
        f0, f1 = np.meshgrid(freqs, freqs, indexing="ij")
        P = np.stack([f0.ravel(), f1.ravel()], axis=-1)
        hat = (hat * np.exp(-1j * (f0 + f1) * g.lo)).ravel()
    hat = hat.reshape(-1)
    nyq = np.max(np.abs(P), axis=-1) >= np.max(np.abs(P)) - 1e-12
    if np.max(np.abs(hat[nyq])) > 1e-8:
        warnings.warn("phi is not resolved at the Nyquist frequency; expect aliasing",
                      GridWarning, stacklevel=2)
    nodes = g.nodes()
    out = np.empty(nodes.shape[0], dtype=complex)
    pref = dp ** d / (2.0 * np.pi) ** (d / 2.0)
    for s in range(0, nodes.shape[0], chunk):
        q = nodes[s:s + chunk]
        sym = eval_symbol(H, q[:, None, :], P[None, :, :])
        phase = np.exp(1j * (q @ P.T))
        out[s:s + chunk] = pref * np.sum(phase * sym * hat[None, :], axis=1)
    return GridFunction(g, out)


def derivative_residual(H: HamiltonSymbol, tau: float, t: float, phi: SmoothTestFunction,
                        grid: GridSpec, **kw) -> float:
    """L1 grid norm of (F_tau(t) phi - phi) / t + H_tau phi."""
    f = phi.on(grid)
    Ff = apply_F(H, tau, t, f, **kw)
    gen = apply_generator(H, tau, phi, grid.nodes())
    r = (Ff.values - f.values) / t + gen
    return float(grid.cell * np.sum(np.abs(r)))
