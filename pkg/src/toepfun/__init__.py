"""Circulant preconditioners for functions of Toeplitz matrices."""

from .analysis import (
    cluster_report,
    decompose_difference,
    difference_rank_cut,
    function_pair,
    norm_bound_audit,
    normal_equations_outliers,
    spectrum,
    split_bound_check,
    unitary_plus_check,
)
from .estimators import CirculantPreconditioner, FunctionToeplitzSolver
from .exceptions import (
    BoundViolation,
    BreakdownHessenbergSingular,
    IndefinitenessDetected,
    MaxIterExceeded,
    NearSingularFunctionValue,
    NotHermitian,
    PreconditionerNotHPD,
    RadiusViolation,
    SpectrumError,
    ToepfunError,
)
from .experiments import ExperimentSpec, run_spectrum, run_table, run_verification_suite
from .genfn import SampledSymbol, TrigPoly, experiment_symbols, fourier_coeffs, get_symbol, sup_norm
from .krylov import SolveReport, SolverConfig, cg, cgnr, gmres, minres
from .matfun import (
    TaylorSpec,
    cosm,
    expm,
    expm_perturbation_gap,
    matrix_function,
    sinm,
    taylor_exp,
    taylor_exp_bound,
    taylor_matfun,
)
from .structured import (
    CirculantMatrix,
    ToeplitzMatrix,
    abs_circulant_fn,
    circulant_apply_fn_inv,
    circulant_eigs,
    optimal_circulant,
    split_correction,
    toeplitz_from_symbol,
    toeplitz_matvec,
)

__version__ = "0.1.0"
