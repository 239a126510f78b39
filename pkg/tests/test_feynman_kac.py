from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from taufeynman.feynman_kac import (
    BLOCK_SIZE,
    GIRSANOV_SIGN,
    PathState,
    block_stream,
    calibrate_girsanov_sign,
    mc_estimate,
    mc_estimate_girsanov,
    simulate_step,
)
from taufeynman.kernels import one_step_kernel
from taufeynman.reference import ConstantCoeffProblem, exact_gaussian_solution
from taufeynman.semigroup import GridSpec, chernoff_iterate
from taufeynman.symbols import (
    CoefficientField,
    EllipticityError,
    HamiltonSymbol,
    LevySpec,
    QuadraticSymbol,
    preset,
    tau_transform,
)

from conftest import datum


def const(A=1.0, b=0.0, c=0.0, levy=None):
    return preset("constant", levy, A=A, b=b, c=c)


def test_pure_diffusion_step():
    st = PathState.start(0.3, 50_000, 1)
    out = simulate_step(const(), 1.0, 0.1, st, block_stream(0, 0))
    d = out.position[:, 0] - 0.3
    assert stats.kstest(d, stats.norm(scale=np.sqrt(0.2)).cdf).pvalue > 1e-3
    np.testing.assert_array_equal(out.log_weight, 0.0)


def test_constant_potential_weight():
    st = PathState.start(0.0, 10, 1)
    rng = block_stream(1, 0)
    for _ in range(5):
        prev = st.log_weight.copy()
        st = simulate_step(const(c=0.7), 0.5, 0.1, st, rng)
        np.testing.assert_allclose(prev - st.log_weight, 0.07, rtol=1e-15)


def test_step_matches_kernel():
    H = const(A=0.8, b=0.5, c=0.3, levy=LevySpec.from_pairs([(1.0, 1.0), (-0.5, 2.0)]))
    dt = 0.1
    x = simulate_step(H, 1.0, dt, PathState.start(0.0, 100_000, 1), block_stream(2, 0)).position[:, 0]
    # (F phi)(q) = E phi(X') from X = q, so X' has density K(0, .) / e^{-dt c}
    grid = np.linspace(-6, 6, 6001)
    dens = one_step_kernel(H, 1.0, dt, 0.0, grid) / np.exp(-dt * 0.3)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    res = stats.kstest(x, lambda v: np.interp(v, grid, cdf))
    assert res.pvalue > 1e-3


def test_step_rejects_bad_input():
    with pytest.raises(ValueError):
        simulate_step(const(), 1.0, 0.0, PathState.start(0.0, 3, 1), block_stream(0, 0))


def test_cholesky_guard():
    # bypass construction checks to hand the simulator an indefinite A
    A = CoefficientField.constant_field([[1.0, 2.0], [2.0, 1.0]], 2, "matrix")
    Q = QuadraticSymbol.__new__(QuadraticSymbol)
    object.__setattr__(Q, "A", A)
    object.__setattr__(Q, "b", CoefficientField.constant_field([0.0, 0.0], 2, "vector"))
    object.__setattr__(Q, "c", CoefficientField.constant_field(0.0, 2, "scalar"))
    object.__setattr__(Q, "a0", 1.0)
    object.__setattr__(Q, "A0", 3.0)
    H = HamiltonSymbol(Q)
    with pytest.raises(EllipticityError):
        simulate_step(H, 1.0, 0.1, PathState.start(np.zeros(2), 4, 2), block_stream(0, 0))


def test_mc_heat_example():
    m, se = mc_estimate(const(), 1.0, 0.5, 0.0, datum, 8, 100_000, seed=11)
    assert abs(m - 2**-0.5) < 3 * se


def test_mc_conservation():
    m, se = mc_estimate(const(b=0.4, levy=LevySpec.from_pairs([(1.0, 1.0)])), 1.0, 0.5, 0.0,
                        lambda x: np.ones(x.shape[0]), 4, 1000, seed=0)
    assert m == 1.0 and se == 0.0


def test_mc_potential_example():
    m, se = mc_estimate(const(c=1.0), 1.0, 0.5, 0.0, datum, 8, 100_000, seed=12)
    assert abs(m - 0.42888) < 3 * se + 1e-5


def test_mc_requires_paths_and_steps():
    with pytest.raises(ValueError):
        mc_estimate(const(), 1.0, 0.5, 0.0, datum, 4, 99, seed=0)
    with pytest.raises(ValueError):
        mc_estimate(const(), 1.0, 0.5, 0.0, datum, 0, 1000, seed=0)


def test_mc_deterministic_and_thread_independent():
    H = preset("sin-mass", LevySpec.from_pairs([(1.0, 0.5)]))
    n = 3 * BLOCK_SIZE + 17
    a = mc_estimate(H, 0.5, 0.5, 0.0, datum, 8, n, seed=5, threads=1)
    b = mc_estimate(H, 0.5, 0.5, 0.0, datum, 8, n, seed=5, threads=4)
    c = mc_estimate(H, 0.5, 0.5, 0.0, datum, 8, n, seed=5)
    assert a == b == c
    assert mc_estimate(H, 0.5, 0.5, 0.0, datum, 8, n, seed=6, threads=1) != a


def test_block_streams_differ():
    x = block_stream(3, 0).standard_normal(4)
    y = block_stream(3, 1).standard_normal(4)
    z = block_stream(4, 0).standard_normal(4)
    assert not np.array_equal(x, y) and not np.array_equal(x, z)
    np.testing.assert_array_equal(x, block_stream(3, 0).standard_normal(4))


def test_girsanov_reduces_without_drift():
    H = preset("sin-mass")
    a = mc_estimate(H, 1.0, 0.5, 0.0, datum, 8, 5000, seed=9)
    b = mc_estimate_girsanov(H, 0.5, 0.0, datum, 8, 5000, seed=9)
    assert a == b


def test_girsanov_agrees_with_drift_estimator():
    H = const(b=1.0)
    m1, s1 = mc_estimate(H, 1.0, 0.25, 0.0, datum, 16, 100_000, seed=21)
    m2, s2 = mc_estimate_girsanov(H, 0.25, 0.0, datum, 16, 100_000, seed=22)
    assert abs(m1 - m2) < 3 * np.hypot(s1, s2)
    exact = exact_gaussian_solution(ConstantCoeffProblem(1.0, 1.0, 0.0), 0.25, 0.0)
    assert abs(m2 - exact) < 3 * s2


def test_girsanov_variance_inflation():
    H = const(b=2.0)
    _, s1 = mc_estimate(H, 1.0, 0.25, 0.0, datum, 16, 50_000, seed=31)
    _, s2 = mc_estimate_girsanov(H, 0.25, 0.0, datum, 16, 50_000, seed=31)
    assert s2 > s1


def test_girsanov_rejects_jumps_and_bad_sign(one_atom):
    with pytest.raises(ValueError):
        mc_estimate_girsanov(const(levy=one_atom), 0.5, 0.0, datum, 4, 1000, seed=0)
    with pytest.raises(ValueError):
        mc_estimate_girsanov(const(), 0.5, 0.0, datum, 4, 1000, seed=0, sign=0)


def test_frozen_girsanov_sign_matches_calibration():
    assert calibrate_girsanov_sign() == GIRSANOV_SIGN == -1


def test_weak_convergence_in_steps():
    H = preset("bump-drift")
    est = {n: mc_estimate(H, 1.0, 0.5, 0.0, datum, n, 40_000, seed=41) for n in (8, 32, 128)}
    (m8, s8), (m32, s32), (m128, s128) = est[8], est[32], est[128]
    assert abs(m32 - m128) < 3 * np.hypot(s32, s128) + abs(m8 - m32)


@pytest.mark.parametrize("tau", [0.0, 0.5])
def test_mc_matches_transformed_iteration(tau):
    # the simulator runs the qp chain of tau_transform(H, tau)
    H = preset("sin-mass")
    g = GridSpec(-12, 12, 385)
    ref = chernoff_iterate(tau_transform(H, tau), 1.0, 0.5, 16, g.sample(datum)).at(0.0)
    m, se = mc_estimate(H, tau, 0.5, 0.0, datum, 16, 50_000, seed=51)
    assert abs(m - ref) < 3.5 * se
