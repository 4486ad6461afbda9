"""Travelling waves of a nonlocal KdV-Burgers equation, at desk scale.

Subpackages: fracops (one-sided fractional derivative and Sobolev norms),
charroots (characteristic function and root certification), quadform (the
singular quadratic form by two routes), linops (linearised operator and its
null-space check), twsolve (nonlinear wave solver and moving-frame
validation), cli (command-line interface).
"""

from .charroots import (
    CharRoots,
    WaveParams,
    char_roots,
    count_roots_argument_principle,
    eval_char,
    find_complex_pair,
    find_lambda,
)
from .fracops import (
    ConstantTail,
    ExponentialApproach,
    FracParams,
    Grid,
    GridFunction,
    ZeroTail,
    apply_dalpha,
    dalpha_of_exponential,
    fourier_symbol,
    sobolev_norm,
)
from .linops import (
    AsymptoticExponential,
    Dirichlet0,
    DirichletValue,
    LinearizedOperator,
    assemble,
    null_space_check,
    solve_bvp,
)
from .quadform import (
    HalfLineFunction,
    MollifierKernel,
    QuadFormResult,
    build_kernel,
    energy_identity_residual,
    eval_I_direct,
    eval_I_kernel,
    h20_test_family,
    heaviside_slope,
    reflect_odd,
)
from .twsolve import (
    EvolveConfig,
    NewtonConfig,
    WaveProfile,
    evolve_moving_frame,
    initial_guess,
    measure_decay_rate,
    nonlinear_residual,
    solve_wave,
)

__version__ = "0.1.0"

__all__ = [
    "CharRoots",
    "WaveParams",
    "char_roots",
    "count_roots_argument_principle",
    "eval_char",
    "find_complex_pair",
    "find_lambda",
    "ConstantTail",
    "ExponentialApproach",
    "FracParams",
    "Grid",
    "GridFunction",
    "ZeroTail",
    "apply_dalpha",
    "dalpha_of_exponential",
    "fourier_symbol",
    "sobolev_norm",
    "AsymptoticExponential",
    "Dirichlet0",
    "DirichletValue",
    "LinearizedOperator",
    "assemble",
    "null_space_check",
    "solve_bvp",
    "HalfLineFunction",
    "MollifierKernel",
    "QuadFormResult",
    "build_kernel",
    "energy_identity_residual",
    "eval_I_direct",
    "eval_I_kernel",
    "h20_test_family",
    "heaviside_slope",
    "reflect_odd",
    "EvolveConfig",
    "NewtonConfig",
    "WaveProfile",
    "evolve_moving_frame",
    "initial_guess",
    "measure_decay_rate",
    "nonlinear_residual",
    "solve_wave",
    "__version__",
]
