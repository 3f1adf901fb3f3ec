"""Spectral solvers for nonlinear Beltrami equations and their fields of quasiconformal maps."""

from .errors import (
    BeltramiError,
    ConfigError,
    DegenerateWronskianError,
    EllipticityError,
    GridSpecError,
    NewtonStallError,
    NonConvergenceError,
    OutsideChartError,
    SpecMismatchError,
)
from .field import FieldSample, bilip_report, field_sweep, period, solve_for_a
from .grid import ComplexGrid, GridSpec, SpectralOperators, beurling, cauchy, d_z, d_zbar, make_operators, restrict
from .reconstruction import GradientChart, gradient_chart, invert_gradient, reconstruct_H, round_trip
from .solver import LinearSolveProblem, PrincipalSolution, residual, solve_nonlinear, solve_rlinear
from .structure import (
    CLinearH,
    RadialH,
    RLinearH,
    SmoothH,
    StructureFunction,
    ZeroH,
    catalog,
    parse_structure,
    verify_H1,
)
from .tangent import (
    directional_derivative,
    linearized_coefficients,
    nondegeneracy_report,
    verify_linearization,
    wronskian_coefficients,
)

__version__ = "0.1.0"
