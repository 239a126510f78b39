#!/usr/bin/env python3
# coding: utf-8

# # Paths: Monte Carlo and phase space
#
# Two further representations of the same evolution.  The first averages a
# weighted functional over simulated jump-diffusion paths.  The second writes
# each step kernel as an oscillatory integral over momentum and composes a few
# of them directly.

# In[1]:

from __future__ import annotations

import numpy as np

from taufeynman import (
    GridSpec,
    LevySpec,
    chernoff_iterate,
    hff_evaluate,
    hff_step_kernel,
    mc_estimate,
    mc_estimate_girsanov,
    one_step_kernel,
    preset,
)


def datum(q):
    return np.exp(-0.5 * q[..., 0] ** 2)


grid = GridSpec(-12.0, 12.0, 385)
f = grid.sample(datum)
x0 = np.zeros(1)


# Monte Carlo against the grid iteration with 64 steps.  The seed fixes every
# path; the result does not depend on the number of threads.

# In[2]:

for name in ("constant", "sin-mass", "bump-drift", "well"):
    H = preset(name, LevySpec.from_pairs([(1.0, 0.5)]))
    grid_value = chernoff_iterate(H, 1.0, 0.5, 64, f).at(0.0)
    m, se = mc_estimate(H, 1.0, 0.5, x0, datum, 64, 50_000, seed=1)
    print(f"{name:10s} mc = {m:.5f} +- {se:.5f}   grid = {grid_value:.5f}   z = {(m - grid_value) / se:+.2f}")


# Girsanov reweighting replaces the drift by a likelihood ratio.  It is
# unbiased but noisier.

# In[3]:

H = preset("constant", A=1.0, b=1.0, c=0.0)
m1, s1 = mc_estimate(H, 1.0, 0.25, x0, datum, 64, 50_000, seed=2)
m2, s2 = mc_estimate_girsanov(H, 0.25, x0, datum, 64, 50_000, seed=3)
print(f"drift    {m1:.5f} +- {s1:.5f}")
print(f"girsanov {m2:.5f} +- {s2:.5f}")


# The momentum-space form of one step matches the explicit kernel.

# In[4]:

probe = np.linspace(-2.0, 2.0, 21)
q, q1 = (a.ravel() for a in np.meshgrid(probe, probe, indexing="ij"))
H = preset("sin-mass", LevySpec.from_pairs([(1.0, 1.0)]))
for tau in (0.0, 0.5, 1.0):
    d = np.abs(hff_step_kernel(H, tau, 0.1, q, q1) - one_step_kernel(H, tau, 0.1, q, q1)).max()
    print(f"tau = {tau}: max kernel difference {d:.1e}")


# Composing two momentum-space steps on a small grid reproduces the two-step
# grid iteration at a single point.

# In[5]:

small = GridSpec(-10.0, 10.0, 201)
H = preset("sin-mass")
hv = hff_evaluate(H, 0.5, 0.2, 2, datum, 0.0, small)
lv = chernoff_iterate(H, 0.5, 0.2, 2, small.sample(datum)).at(0.0)
print(f"phase space {hv.real:.12f}   grid {lv:.12f}")
