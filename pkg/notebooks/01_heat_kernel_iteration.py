#!/usr/bin/env python3
# coding: utf-8

# # Iterating a heat-kernel step on a grid
#
# A step of the solver is an integral operator whose kernel is a Gaussian with
# coefficients frozen at a mixed point m = tau q + (1 - tau) q1, convolved with
# the law of the jump part.  Iterating the step n times with step t / n
# approximates the evolution semigroup.  For constant coefficients the step is
# already exact, so the first check compares a single step with the closed form.

# In[1]:

from __future__ import annotations

import numpy as np

from taufeynman import (
    ConstantCoeffProblem,
    GaussianMixture,
    GridSpec,
    LevySpec,
    chernoff_iterate,
    preset,
)


def datum(q):
    return np.exp(-0.5 * q[..., 0] ** 2)


grid = GridSpec(-16.0, 16.0, 1024)
f = grid.sample(datum)


# Constant coefficients A = 1, b = 0.5, c = 1 and two jump atoms.  The oracle
# evolves each Gaussian of the datum in closed form and sums the Poisson series.

# In[2]:

levy = LevySpec.from_pairs([(1.0, 0.5), (-0.7, 0.8)])
H = preset("constant", levy, A=1.0, b=0.5, c=1.0)
prob = ConstantCoeffProblem(1.0, 0.5, 1.0, levy)
exact, tail = GaussianMixture.single().evolve(prob, 0.5)
ref = exact(grid.nodes())

for n in (1, 4, 16, 64):
    u = chernoff_iterate(H, 1.0, 0.5, n, f)
    print(f"n = {n:3d}   L1 error vs oracle = {grid.cell * np.abs(u.values - ref).sum():.2e}")
print(f"Poisson series tail bound: {tail:.1e}")


# With a variable diffusion coefficient A(q) = 2 + sin q the step is only
# first-order accurate.  Self-convergence against n = 128 shows the error
# shrinking roughly like 1 / n.

# In[3]:

H = preset("sin-mass")
g = GridSpec(-12.0, 12.0, 769)
f = g.sample(datum)
ref = chernoff_iterate(H, 0.5, 0.5, 128, f)
prev = None
for n in (2, 4, 8, 16, 32, 64):
    err = (chernoff_iterate(H, 0.5, 0.5, n, f) - ref).l1_norm()
    ratio = "" if prev is None else f"   ratio {prev / err:.2f}"
    print(f"n = {n:3d}   e(n) = {err:.3e}{ratio}")
    prev = err
