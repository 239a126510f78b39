"""Hamilton functions of Levy-Khintchine type and their tau-quantization data.

A symbol has the form

    H(q, p) = c(q) + i b(q).p + p.A(q)p + r(p),
    r(p)    = sum_j w_j (1 - exp(i y_j.p) + i y_j.p / (1 + |y_j|^2)),

with the jump measure restricted to finitely many weighted atoms.  Points are
arrays whose last axis has length ``dim``; leading axes broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "CoefficientField",
    "QuadraticSymbol",
    "LevySpec",
    "HamiltonSymbol",
    "EllipticityError",
    "as_points",
    "eval_symbol",
    "levy_exponent",
    "tau_transform",
    "div_matrix",
    "div_vector",
    "trace_hess_matrix",
    "preset",
    "PRESETS",
]

PRESETS = ("constant", "sin-mass", "bump-drift", "well")

_KIND_SHAPES = {"scalar": 0, "vector": 1, "matrix": 2}


class EllipticityError(ValueError):
    """Diffusion matrix is singular, indefinite or outside its declared bounds."""


def as_points(q, dim: int) -> np.ndarray:
    """Coerce ``q`` to a float array of points with trailing axis ``dim``.

    For ``dim == 1`` a bare scalar or an array without a trailing unit axis is
    interpreted as a collection of 1-d points.
    """
    q = np.asarray(q, dtype=float)
    if dim == 1:
        if q.ndim == 0 or q.shape[-1] != 1:
            q = q[..., None]
        return q
    if q.ndim == 0 or q.shape[-1] != dim:
        raise ValueError(f"expected points with trailing axis {dim}, got shape {q.shape}")
    return q


def _probe_points(dim: int) -> np.ndarray:
    axis = np.linspace(-3.0, 3.0, 7) + 0.123
    if dim == 1:
        return axis[:, None]
    g = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([g[0].ravel(), g[1].ravel()], axis=-1)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """A smooth coefficient q -> scalar, vector or matrix with derivatives.

    ``value(q)`` receives points of shape (..., dim) and returns an array of
    shape (...) + S, with S = (), (dim,) or (dim, dim) according to ``kind``.
    ``grad`` returns (...) + S + (dim,) and ``hess`` (...) + S + (dim, dim).
    Missing derivatives fall back to central differences.
    """

    dim: int
    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = 1e-5
    constant: bool = False
    check: bool = True

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("only dim 1 and 2 are supported")
        if self.kind not in _KIND_SHAPES:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        if self.check and (self.grad is not None or self.hess is not None):
            self._check_derivatives()

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.dim,) * _KIND_SHAPES[self.kind]

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant_field(cls, v, dim: int, kind: str) -> "CoefficientField":
        v = np.asarray(v, dtype=float)
        shape = (dim,) * _KIND_SHAPES[kind]
        v = np.broadcast_to(v, shape).copy() if kind != "matrix" or v.ndim else v * np.eye(dim)
        v.setflags(write=False)

        def value(q):
            q = np.asarray(q)
            return np.broadcast_to(v, q.shape[:-1] + shape)

        def grad(q):
            q = np.asarray(q)
            return np.zeros(q.shape[:-1] + shape + (dim,))

        def hess(q):
            q = np.asarray(q)
            return np.zeros(q.shape[:-1] + shape + (dim, dim))

        return cls(dim, kind, value, grad, hess, constant=True, check=False)

    @classmethod
    def from_1d(cls, f, df=None, d2f=None, kind: str = "scalar", **kw) -> "CoefficientField":
        """Wrap scalar functions of a real argument as a 1-d field of ``kind``."""
        pad = (1,) * _KIND_SHAPES[kind]

        def lift(g, extra):
            if g is None:
                return None

            def h(q):
                x = np.asarray(q, dtype=float)[..., 0]
                return np.asarray(g(x), dtype=float).reshape(x.shape + pad + extra)

            return h

        return cls(1, kind, lift(f, ()), lift(df, (1,)), lift(d2f, (1, 1)), **kw)

    # -- evaluation -----------------------------------------------------------

    def __call__(self, q) -> np.ndarray:
        q = as_points(q, self.dim)
        return np.broadcast_to(self.value(q), q.shape[:-1] + self.shape)

    def _steps(self, q: np.ndarray, base: float) -> np.ndarray:
        return base * (1.0 + np.abs(q))

    def gradient(self, q) -> np.ndarray:
        q = as_points(q, self.dim)
        if self.grad is not None:
            return np.broadcast_to(self.grad(q), q.shape[:-1] + self.shape + (self.dim,))
        return self._fd_grad(q)

    def hessian(self, q) -> np.ndarray:
        q = as_points(q, self.dim)
        if self.hess is not None:
            return np.broadcast_to(self.hess(q), q.shape[:-1] + self.shape + (self.dim, self.dim))
        return self._fd_hess(q)

    def _fd_grad(self, q: np.ndarray, value=None) -> np.ndarray:
        f = self.value if value is None else value
        h = self._steps(q, self.fd_step)
        cols = []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0
            hk = h[..., k]
            d = np.asarray(f(q + hk[..., None] * e)) - np.asarray(f(q - hk[..., None] * e))
            cols.append(d / (2.0 * hk.reshape(hk.shape + (1,) * (d.ndim - hk.ndim))))
        return np.stack(cols, axis=-1)

    def _fd_hess(self, q: np.ndarray) -> np.ndarray:
        if self.grad is not None:
            # central differences of the analytic gradient
            return self._fd_grad(q, value=self.grad)
        # second differences of the value need a larger step against roundoff
        h = self._steps(q, max(self.fd_step, 1e-3))
        f = self.value
        s = len(self.shape)
        out = np.zeros(q.shape[:-1] + self.shape + (self.dim, self.dim))
        f0 = np.asarray(f(q))
        for j in range(self.dim):
            for k in range(j, self.dim):
                ej = np.zeros(self.dim)
                ek = np.zeros(self.dim)
                ej[j] = 1.0
                ek[k] = 1.0
                hj = h[..., j][..., None]
                hk = h[..., k][..., None]
                if j == k:
                    d = (np.asarray(f(q + hj * ej)) - 2.0 * f0 + np.asarray(f(q - hj * ej)))
                    denom = hj[..., 0] ** 2
                else:
                    d = (np.asarray(f(q + hj * ej + hk * ek)) - np.asarray(f(q + hj * ej - hk * ek))
                         - np.asarray(f(q - hj * ej + hk * ek)) + np.asarray(f(q - hj * ej - hk * ek)))
                    denom = 4.0 * hj[..., 0] * hk[..., 0]
                val = d / denom.reshape(denom.shape + (1,) * s)
                out[..., j, k] = val
                out[..., k, j] = val
        return out

    def _check_derivatives(self) -> None:
        q = _probe_points(self.dim)
        if self.grad is not None:
            a = np.asarray(self.grad(q), dtype=float)
            fd = self._fd_grad(q)
            if not np.allclose(a, fd, rtol=1e-6, atol=1e-6):
                raise ValueError("analytic gradient disagrees with finite differences")
        if self.hess is not None:
            a = np.asarray(self.hess(q), dtype=float)
            if self.grad is not None:
                fd = self._fd_grad(q, value=self.grad)
            else:
                fd = self._fd_hess(q)
            if not np.allclose(a, fd, rtol=1e-6, atol=1e-6):
                raise ValueError("analytic hessian disagrees with finite differences")


def _zero(dim: int, kind: str) -> CoefficientField:
    shape = (dim,) * _KIND_SHAPES[kind]
    return CoefficientField.constant_field(np.zeros(shape), dim, kind)


@dataclass(frozen=True, eq=False)
class QuadraticSymbol:
    """h(q, p) = c(q) + i b(q).p + p.A(q)p with ellipticity bounds a0, A0.

    ``a0 = 0`` admits degenerate (e.g. vanishing) diffusion; such symbols can
    only be used through regularized phase-space integrals.
    """

    A: CoefficientField
    b: CoefficientField
    c: CoefficientField
    a0: float
    A0: float

    def __post_init__(self):
        d = self.A.dim
        if (self.A.kind, self.b.kind, self.c.kind) != ("matrix", "vector", "scalar"):
            raise ValueError("A, b, c must be matrix, vector and scalar fields")
        if self.b.dim != d or self.c.dim != d:
            raise ValueError("coefficient dimensions differ")
        if not (0.0 <= self.a0 <= self.A0):
            raise ValueError("need 0 <= a0 <= A0")
        q = _probe_points(d)
        Aq = self.A(q)
        if np.max(np.abs(Aq - np.swapaxes(Aq, -1, -2))) > 1e-12:
            raise EllipticityError("A(q) is not symmetric at probe points")
        ev = np.linalg.eigvalsh(Aq)
        slack = 1e-12 * max(1.0, self.A0)
        if ev.min() < self.a0 - slack or ev.max() > self.A0 + slack:
            raise EllipticityError(
                f"eigenvalues of A in [{ev.min():.6g}, {ev.max():.6g}] violate [{self.a0}, {self.A0}]"
            )

    @property
    def dim(self) -> int:
        return self.A.dim

    @property
    def is_constant(self) -> bool:
        return self.A.constant and self.b.constant and self.c.constant


@dataclass(frozen=True, eq=False)
class LevySpec:
    """Finite-activity jump measure N = sum_j w_j delta_{y_j}."""

    atoms: np.ndarray
    weights: np.ndarray
    rate: float = field(init=False)
    probs: np.ndarray = field(init=False)
    gamma: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        y = np.asarray(self.atoms, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] != w.shape[0]:
            raise ValueError("atoms must have shape (m, d) matching weights (m,)")
        if w.size and np.any(w <= 0):
            raise ValueError("Levy weights must be positive")
        if w.size and np.any(np.all(y == 0.0, axis=1)):
            raise ValueError("Levy atoms must avoid the origin")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(y)):
            raise ValueError("Levy atoms and weights must be finite")
        y.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", y)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rate", float(w.sum()))
        probs = w / self.rate if w.size else w.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "gamma", self.compensator())

    @classmethod
    def from_pairs(cls, pairs, dim: int = 1) -> "LevySpec":
        """Build from [(y, w), ...] or [{"y": ..., "w": ...}, ...]."""
        ys, ws = [], []
        for item in pairs:
            y, w = (item["y"], item["w"]) if isinstance(item, dict) else item
            ys.append(np.broadcast_to(np.asarray(y, dtype=float), (dim,)))
            ws.append(float(w))
        atoms = np.array(ys, dtype=float).reshape(len(ys), dim)
        return cls(atoms, np.array(ws, dtype=float))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def empty(self) -> bool:
        return self.weights.size == 0

    def compensator(self) -> np.ndarray:
        y = self.atoms
        return (self.weights[:, None] * y / (1.0 + np.sum(y * y, axis=1))[:, None]).sum(axis=0)

    def scaled(self, s: float) -> "LevySpec":
        return LevySpec(self.atoms, self.weights * s)


@dataclass(frozen=True, eq=False)
class HamiltonSymbol:
    quad: QuadraticSymbol
    levy: LevySpec | None = None

    def __post_init__(self):
        if self.levy is not None and self.levy.dim != self.quad.dim:
            raise ValueError("Levy atoms and coefficients have different dimensions")

    @property
    def dim(self) -> int:
        return self.quad.dim

    @property
    def has_jumps(self) -> bool:
        return self.levy is not None and not self.levy.empty

    def __call__(self, q, p) -> np.ndarray:
        return eval_symbol(self, q, p)

    def with_levy(self, levy: LevySpec | None) -> "HamiltonSymbol":
        return HamiltonSymbol(self.quad, levy)


def levy_exponent(L: LevySpec | None, p) -> np.ndarray:
    """r(p) for an atomic jump measure; Re r(p) >= 0."""
    if L is None or L.empty:
        p = np.asarray(p, dtype=float)
        return np.zeros(p.shape[:-1] if p.ndim else (), dtype=complex)
    p = as_points(p, L.dim)
    yp = p @ L.atoms.T
    y2 = np.sum(L.atoms * L.atoms, axis=1)
    terms = 1.0 - np.exp(1j * yp) + 1j * yp / (1.0 + y2)
    return terms @ L.weights


def eval_symbol(H: HamiltonSymbol, q, p) -> np.ndarray:
    """H(q, p) = c(q) + i b(q).p + p.A(q)p + r(p), broadcasting over points."""
    d = H.dim
    q = as_points(q, d)
    p = as_points(p, d)
    Q = H.quad
    A = Q.A(q)
    quad = np.einsum("...i,...ij,...j->...", p, A, p)
    drift = np.einsum("...i,...i->...", Q.b(q), p)
    out = Q.c(q) + 1j * drift + quad
    if H.has_jumps:
        out = out + levy_exponent(H.levy, p)
    return out


def div_matrix(A: CoefficientField, q) -> np.ndarray:
    """(Div A)_j = sum_k d_k A_jk."""
    g = A.gradient(q)
    return np.einsum("...jkk->...j", g)


def div_vector(b: CoefficientField, q) -> np.ndarray:
    return np.einsum("...jj->...", b.gradient(q))


def trace_hess_matrix(A: CoefficientField, q) -> np.ndarray:
    """sum_{j,k} d_j d_k A_jk."""
    return np.einsum("...jkjk->...", A.hessian(q))


def tau_transform(H: HamiltonSymbol, tau: float) -> HamiltonSymbol:
    """The 1-symbol H^tau whose qp-quantization equals the tau-quantization of H.

    b_tau = b - 2(1-tau) Div A,  c_tau = c + (1-tau) Div b - (1-tau)^2 tr Hess A;
    A and the jump part are unchanged.
    """
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    s = 1.0 - tau
    if s == 0.0:
        return H
    Q = H.quad
    if Q.A.constant and Q.b.constant:
        return H
    d = Q.dim

    def b_val(q):
        return Q.b(q) - 2.0 * s * div_matrix(Q.A, q)

    def c_val(q):
        return Q.c(q) + s * div_vector(Q.b, q) - s * s * trace_hess_matrix(Q.A, q)

    b_new = CoefficientField(d, "vector", b_val, fd_step=Q.b.fd_step, check=False)
    c_new = CoefficientField(d, "scalar", c_val, fd_step=Q.c.fd_step, check=False)
    return HamiltonSymbol(QuadraticSymbol(Q.A, b_new, c_new, Q.a0, Q.A0), H.levy)


# -- named coefficient presets ------------------------------------------------


def _const(v, kind):
    return CoefficientField.constant_field(v, 1, kind)


def preset(name: str, levy: LevySpec | None = None, *, A: float = 1.0, b: float = 0.5,
           c: float = 1.0) -> HamiltonSymbol:
    """One of the shipped 1-d symbols, all with analytic derivatives.

    ``constant`` uses the keyword values A, b, c; the others are

    - ``sin-mass``:   A(q) = 2 + sin q, b = 0, c = 0
    - ``bump-drift``: A = 1, b(q) = exp(-q^2), c = 0
    - ``well``:       A = 1, b = 0, c(q) = q^2 / (1 + q^2)
    """
    if name == "constant":
        quad = QuadraticSymbol(_const(A, "matrix"), _const(b, "vector"), _const(c, "scalar"),
                               a0=float(A), A0=float(A))
    elif name == "sin-mass":
        Af = CoefficientField.from_1d(lambda x: 2.0 + np.sin(x), np.cos, lambda x: -np.sin(x),
                                      kind="matrix")
        quad = QuadraticSymbol(Af, _const(0.0, "vector"), _const(0.0, "scalar"), a0=1.0, A0=3.0)
    elif name == "bump-drift":
        bf = CoefficientField.from_1d(
            lambda x: np.exp(-x * x),
            lambda x: -2.0 * x * np.exp(-x * x),
            lambda x: (4.0 * x * x - 2.0) * np.exp(-x * x),
            kind="vector",
        )
        quad = QuadraticSymbol(_const(1.0, "matrix"), bf, _const(0.0, "scalar"), a0=1.0, A0=1.0)
    elif name == "well":
        cf = CoefficientField.from_1d(
            lambda x: x * x / (1.0 + x * x),
            lambda x: 2.0 * x / (1.0 + x * x) ** 2,
            lambda x: (2.0 - 6.0 * x * x) / (1.0 + x * x) ** 3,
        )
        quad = QuadraticSymbol(_const(1.0, "matrix"), _const(0.0, "vector"), cf, a0=1.0, A0=1.0)
    else:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return HamiltonSymbol(quad, levy)
