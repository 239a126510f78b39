"""Tau-quantized Feynman formulas for Levy-type Hamiltonians.

Grid solvers for the Chernoff iterates [F_tau(t/n)]^n, their generators, a
Monte Carlo Feynman-Kac oracle and the phase-space (Hamiltonian) form of the
same iterates.
"""

from __future__ import annotations

from .feynman_kac import (
    BLOCK_SIZE,
    GIRSANOV_SIGN,
    PathState,
    block_stream,
    calibrate_girsanov_sign,
    mc_estimate,
    mc_estimate_girsanov,
    simulate_step,
)
from .generator import (
    SmoothTestFunction,
    apply_generator,
    apply_pdo_spectral,
    derivative_residual,
    gaussian_test_function,
)
from .kernels import (
    LevyIncrementLaw,
    gaussian_kernel,
    levy_density,
    levy_increment_sample,
    one_step_kernel,
)
from .phase_space import (
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
from .reference import (
    ConstantCoeffProblem,
    GaussianMixture,
    exact_gaussian_solution,
    exact_jump_solution,
)
from .semigroup import (
    GridFunction,
    GridSpec,
    GridWarning,
    KernelOperator,
    NumericalGuardError,
    apply_F,
    chernoff_iterate,
    l1_growth,
    l1_rate_bound,
    quantization_step_gap,
    step_operator,
)
from .symbols import (
    PRESETS,
    CoefficientField,
    EllipticityError,
    HamiltonSymbol,
    LevySpec,
    QuadraticSymbol,
    eval_symbol,
    levy_exponent,
    preset,
    tau_transform,
)

__version__ = "0.1.0"

__all__ = [
    "action",
    "apply_F",
    "apply_generator",
    "apply_pdo_spectral",
    "BLOCK_SIZE",
    "block_stream",
    "calibrate_girsanov_sign",
    "chernoff_iterate",
    "CoefficientField",
    "ConstantCoeffProblem",
    "CostGuardError",
    "derivative_residual",
    "EllipticityError",
    "embed",
    "eval_symbol",
    "exact_gaussian_solution",
    "exact_jump_solution",
    "gaussian_kernel",
    "gaussian_test_function",
    "GaussianMixture",
    "GIRSANOV_SIGN",
    "GridFunction",
    "GridSpec",
    "GridWarning",
    "HamiltonSymbol",
    "hff_evaluate",
    "hff_step_kernel",
    "KernelOperator",
    "l1_growth",
    "l1_rate_bound",
    "levy_density",
    "levy_exponent",
    "levy_increment_sample",
    "LevyIncrementLaw",
    "LevySpec",
    "mc_estimate",
    "mc_estimate_girsanov",
    "NumericalGuardError",
    "one_step_kernel",
    "OscillatoryQuadSpec",
    "path_integral",
    "PathState",
    "PhasePath",
    "preset",
    "PRESETS",
    "project",
    "QuadraticSymbol",
    "quantization_step_gap",
    "refine",
    "simulate_step",
    "SmoothTestFunction",
    "step_operator",
    "tau_transform",
]
