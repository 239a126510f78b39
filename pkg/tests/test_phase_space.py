from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taufeynman.kernels import one_step_kernel
from taufeynman.phase_space import (
    CostGuardError,
    OscillatoryQuadSpec,
    PhasePath,
    action,
    embed,
    hff_evaluate,
    hff_step_kernel,
    path_integral,
    project,
    refine,
)
from taufeynman.semigroup import GridSpec, GridWarning, apply_F, chernoff_iterate
from taufeynman.symbols import (
    PRESETS,
    CoefficientField,
    HamiltonSymbol,
    LevySpec,
    QuadraticSymbol,
    eval_symbol,
    preset,
)

from conftest import datum

PROBE = np.linspace(-2.0, 2.0, 21)
QQ, QQ1 = (a.ravel() for a in np.meshgrid(PROBE, PROBE, indexing="ij"))


def heat(levy=None):
    return preset("constant", levy, A=1.0, b=0.0, c=0.0)


def p_only_symbol():
    """H(q, p) = p^2 + i 0.3 p + 0.2 + r(p) with constant coefficients."""
    return preset("constant", LevySpec.from_pairs([(1.0, 0.4)]), A=1.0, b=0.3, c=0.2)


def zero_symbol():
    z = CoefficientField.constant_field
    return HamiltonSymbol(QuadraticSymbol(z(0.0, 1, "matrix"), z(0.0, 1, "vector"),
                                          z(0.0, 1, "scalar"), 0.0, 0.0))


# -- paths and the embedding ---------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(0.1, 3), st.floats(0, 1),
       st.floats(-5, 5))
def test_round_trip(vals, t, tau, x):
    path = embed(vals, t, tau, x)
    assert path.n == 3
    np.testing.assert_array_equal(project(path)[:, 0], vals)


def test_constant_tuple_gives_constant_path():
    a, b, x = 0.7, -1.2, 2.0
    path = embed([a, b] * 4, 1.0, 0.3, x)
    for s in np.linspace(0, 1, 17)[:-1]:
        assert path.q(s)[0] == pytest.approx(a)
        assert path.p(s)[0] == b
    assert path.q(1.0)[0] == x


def test_breakpoint_follows_tau_rule():
    path = PhasePath(1.0, 0.5, [1.0, 3.0, -2.0], [0.0, 0.0, 0.0], 0.0)
    assert path.q(1 / 3)[0] == pytest.approx(2.0)
    assert path.q(2 / 3)[0] == pytest.approx(0.5)
    pq = PhasePath(1.0, 0.0, [1.0, 3.0], [0.0, 0.0], 0.0)
    qp = PhasePath(1.0, 1.0, [1.0, 3.0], [0.0, 0.0], 0.0)
    assert pq.q(0.5)[0] == 1.0 and qp.q(0.5)[0] == 3.0


def test_path_endpoints_and_left_continuous_momentum():
    path = PhasePath(2.0, 0.25, [1.0, 2.0], [5.0, 6.0], -3.0)
    assert path.q(0.0)[0] == 1.0
    assert path.q(2.0)[0] == -3.0
    assert path.p(1.0)[0] == 5.0          # p(t_1) = p(t_1 - 0)
    assert path.p(1.0 + 1e-9)[0] == 6.0
    with pytest.raises(ValueError):
        path.q(2.5)


def test_embed_rejects_odd_tuple():
    with pytest.raises(ValueError):
        embed([1.0, 2.0, 3.0], 1.0, 0.5, 0.0)


def test_action_examples():
    H = preset("sin-mass", LevySpec.from_pairs([(1.0, 0.5)]))
    a, b, t = 0.4, 1.3, 0.8
    path = embed([a, b] * 5, t, 0.5, a)
    assert action(H, path) == pytest.approx(t * eval_symbol(H, a, b), rel=1e-14)
    c0 = preset("constant", A=1e-300, b=0.0, c=2.5)
    rnd = embed(np.random.default_rng(0).normal(size=10) * 1e-100, t, 0.3, 0.0)
    assert action(c0, rnd) == pytest.approx(t * 2.5, rel=1e-14)


def test_action_uses_tagged_points():
    H = preset("sin-mass")
    path = embed([0.1, 1.0, 0.9, -2.0], 1.0, 0.25, 1.7)
    q_next = np.array([0.9, 1.7])
    tags = 0.25 * q_next + 0.75 * np.array([0.1, 0.9])
    expect = 0.5 * np.sum(eval_symbol(H, tags, np.array([1.0, -2.0])))
    assert action(H, path) == pytest.approx(expect, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8), st.floats(0.1, 2), st.floats(0, 1))
def test_refinement_consistency(vals, t, tau):
    # a step path described on 2n pieces carries the same integral of H
    H = p_only_symbol()
    path = embed(vals, t, tau, vals[-2])
    fine = refine(path, 2)
    assert path_integral(H, fine) == pytest.approx(path_integral(H, path), rel=1e-12, abs=1e-12)
    assert action(H, refine(path, 2)) == pytest.approx(action(H, path), rel=1e-12, abs=1e-12)


def test_action_equals_path_integral_for_momentum_only_symbols():
    H = p_only_symbol()
    path = embed(np.random.default_rng(3).normal(size=12), 1.3, 0.4, 0.2)
    assert action(H, path) == pytest.approx(path_integral(H, path), rel=1e-14)


# -- step kernels ----------------------------------------------------------------

def test_heat_step_kernel():
    t = 0.3
    z = QQ - QQ1
    k = hff_step_kernel(heat(), 0.5, t, QQ, QQ1)
    exact = (4 * np.pi * t) ** -0.5 * np.exp(-z * z / (4 * t))
    assert np.max(np.abs(k - exact)) < 1e-12


@pytest.mark.parametrize("name", ["constant", "sin-mass", "well"])
def test_imaginary_part_vanishes_for_even_symbols(name):
    # no drift and a symmetric jump law make H real and even in p
    H = preset(name, LevySpec.from_pairs([(1.0, 0.5), (-1.0, 0.5)]), b=0.0)
    k = hff_step_kernel(H, 0.5, 0.2, QQ, QQ1)
    assert np.max(np.abs(k.imag)) < 1e-10


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("levy", [None, [(1.0, 1.0)]])
def test_step_kernel_matches_lagrangian(name, levy):
    H = preset(name, LevySpec.from_pairs(levy) if levy else None)
    for tau in (0.0, 0.5, 1.0):
        k = hff_step_kernel(H, tau, 0.1, QQ, QQ1)
        assert np.max(np.abs(k - one_step_kernel(H, tau, 0.1, QQ, QQ1))) < 1e-6


def test_step_kernel_converges_as_p_grid_refines():
    H = preset("sin-mass", LevySpec.from_pairs([(1.0, 1.0)]))
    ref = one_step_kernel(H, 0.5, 0.1, QQ, QQ1)
    errs = []
    for pts in (41, 61, 101):
        spec = OscillatoryQuadSpec(p_max=20.0, points=pts)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridWarning)
            k = hff_step_kernel(H, 0.5, 0.1, QQ, QQ1, spec)
        errs.append(np.max(np.abs(k - ref)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-12


def test_underresolved_warning():
    with pytest.warns(GridWarning, match="underresolves"):
        hff_step_kernel(heat(), 1.0, 0.1, 3.0, -3.0, OscillatoryQuadSpec(p_max=20.0, points=41))


def test_step_kernel_regularization():
    H = preset("sin-mass")
    t, eps = 0.1, 1e-6
    k0 = hff_step_kernel(H, 0.5, t, QQ, QQ1)
    k1 = hff_step_kernel(H, 0.5, t, QQ, QQ1, OscillatoryQuadSpec(eps=eps))
    # exp(-eps p^2) adds 2 eps to the variance, so the change is eps K'' + O(eps^2)
    # and |K''| stays below max|K| / (a0 t)^2
    bound = eps * np.max(np.abs(k0)) / (H.quad.a0 * t) ** 2
    assert 0.0 < np.max(np.abs(k1 - k0)) < bound
    rich = hff_step_kernel(H, 0.5, t, QQ, QQ1, OscillatoryQuadSpec(eps_schedule=(1e-3, 2e-3, 3e-3)))
    plain = hff_step_kernel(H, 0.5, t, QQ, QQ1, OscillatoryQuadSpec(eps=1e-3))
    exact = one_step_kernel(H, 0.5, t, QQ, QQ1)
    assert np.max(np.abs(rich - exact)) < 0.01 * np.max(np.abs(plain - exact))


def test_quad_spec_validation():
    with pytest.raises(ValueError):
        OscillatoryQuadSpec(eps=-1.0)
    with pytest.raises(ValueError):
        OscillatoryQuadSpec(eps_schedule=(0.0, 1e-3))
    with pytest.raises(ValueError):
        hff_step_kernel(zero_symbol(), 1.0, 0.1, 0.0, 0.0)
    with pytest.raises(ValueError):
        hff_step_kernel(heat(), 1.0, 0.0, 0.0, 0.0)


def test_default_p_range_makes_integrand_negligible():
    H = preset("sin-mass")
    spec = OscillatoryQuadSpec()
    P, _ = spec.resolve(H, 0.1, 1.0, 0.0, 0.0)
    assert np.exp(-0.1 * H.quad.a0 * P * P) < 1e-12


# -- the n-fold phase-space integral ----------------------------------------------

GRID = GridSpec(-10, 10, 201)


@pytest.mark.parametrize("tau", [0.0, 0.5, 1.0])
def test_hff_single_step_is_apply_F(tau):
    H = preset("bump-drift", LevySpec.from_pairs([(1.0, 0.5)]))
    f = GRID.sample(datum)
    for x in (0.0, 0.7):
        hv = hff_evaluate(H, tau, 0.3, 1, datum, x, GRID)
        lv = apply_F(H, tau, 0.3, f).at(x)
        assert abs(hv - lv) < 1e-8


def test_hff_two_steps_constant_coefficients():
    H = preset("constant")
    one = hff_evaluate(H, 0.5, 0.5, 1, datum, 0.0, GRID)
    two = hff_evaluate(H, 0.5, 0.5, 2, datum, 0.0, GRID)
    assert abs(one - two) < 1e-5


def test_hff_two_steps_sin_mass():
    H = preset("sin-mass")
    hv = hff_evaluate(H, 0.0, 0.2, 2, datum, 0.0, GRID)
    lv = chernoff_iterate(H, 0.0, 0.2, 2, GRID.sample(datum)).at(0.0)
    assert abs(hv - lv) < 1e-4


def test_hff_accepts_smooth_test_function(smooth_phi):
    H = preset("well")
    a = hff_evaluate(H, 0.5, 0.2, 1, smooth_phi, 0.0, GRID)
    b = hff_evaluate(H, 0.5, 0.2, 1, GRID.sample(datum), 0.0, GRID)
    assert a == b


def test_pseudomeasure_normalization():
    g = GridSpec(-5, 5, 401)
    v = hff_evaluate(zero_symbol(), 1.0, 1.0, 1, lambda q: np.ones(q.shape[0]), 0.0, g,
                     OscillatoryQuadSpec(eps=0.05))
    assert v == pytest.approx(1.0, abs=1e-10)


def test_hff_guards():
    H = preset("constant")
    with pytest.raises(CostGuardError):
        hff_evaluate(H, 0.5, 0.5, 4, datum, 0.0, GRID)
    with pytest.raises(CostGuardError):
        hff_evaluate(H, 0.5, 0.5, 3, datum, 0.0, GridSpec(-10, 10, 2001))
    with pytest.raises(ValueError):
        hff_evaluate(H, 0.5, 0.5, 0, datum, 0.0, GRID)
    with pytest.raises(ValueError):
        hff_evaluate(H, 0.5, 0.5, 1, datum, 0.0, GridSpec(-5, 5, 21, dim=2))
