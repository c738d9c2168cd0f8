"""Finite-dimensional noncommutative probability toolkit.

Tracial matrix algebras, singular value functions, symmetric norms and
Orlicz moments, submajorization, independent families, and drivers that
compare the two sides of moment inequalities for sums of independent
variables.
"""

from .algebra import (
    AlgElement,
    AlgebraMismatchError,
    NotHermitianError,
    TracialAlgebra,
    abs_op,
    adjoint,
    add,
    diagonal_algebra,
    element,
    element_from_json,
    element_to_json,
    functional_calculus,
    identity,
    matrix_algebra,
    matrix_unit,
    multiply,
    scale,
    singular_values,
    spectral_projection_above,
    trace,
    trace_product,
    zero,
)
from .harness import (
    HypothesisError,
    RatioReport,
    run_theorem,
    verify_js,
    verify_khinchine,
    verify_explicit_bounds,
    verify_modular,
    verify_rosenthal,
)
from .independence import (
    BudgetExceededError,
    DirectSumElement,
    Ensemble,
    IndependenceError,
    TensorFamily,
    build_fermionic_family,
    build_tensor_family,
    conditional_expectation,
    rademacher_expand,
    sample_ensemble,
)
from .majorization import hl_submajorize, uniform_submajorize
from .operators import (
    BlockMatrix,
    ColumnElement,
    op_L,
    op_S,
    op_Sstar,
    op_T,
    op_Tstar,
    square_function,
)
from .oracles import OracleReport, run_check
from .rearrangement import StepFunction, integrate_power, mu_of_direct_sum, restrict, singular_value_function
from .spaces import (
    ZE,
    Cap,
    Lp,
    Orlicz,
    OrliczFunction,
    Sum,
    format_norm_spec,
    luxemburg_norm,
    make_Mpq,
    norm,
    parse_norm_spec,
    phi_moment,
)

__all__ = [
    "AlgElement",
    "AlgebraMismatchError",
    "NotHermitianError",
    "TracialAlgebra",
    "abs_op",
    "adjoint",
    "add",
    "diagonal_algebra",
    "element",
    "element_from_json",
    "element_to_json",
    "functional_calculus",
    "identity",
    "matrix_algebra",
    "matrix_unit",
    "multiply",
    "scale",
    "singular_values",
    "spectral_projection_above",
    "trace",
    "trace_product",
    "zero",
    "HypothesisError",
    "RatioReport",
    "run_theorem",
    "verify_js",
    "verify_khinchine",
    "verify_explicit_bounds",
    "verify_modular",
    "verify_rosenthal",
    "BudgetExceededError",
    "DirectSumElement",
    "Ensemble",
    "IndependenceError",
    "TensorFamily",
    "build_fermionic_family",
    "build_tensor_family",
    "conditional_expectation",
    "rademacher_expand",
    "sample_ensemble",
    "hl_submajorize",
    "uniform_submajorize",
    "BlockMatrix",
    "ColumnElement",
    "op_L",
    "op_S",
    "op_Sstar",
    "op_T",
    "op_Tstar",
    "square_function",
    "OracleReport",
    "run_check",
    "StepFunction",
    "integrate_power",
    "mu_of_direct_sum",
    "restrict",
    "singular_value_function",
    "ZE",
    "Cap",
    "Lp",
    "Orlicz",
    "OrliczFunction",
    "Sum",
    "format_norm_spec",
    "luxemburg_norm",
    "make_Mpq",
    "norm",
    "parse_norm_spec",
    "phi_moment",
]

__version__ = "0.1.0"
