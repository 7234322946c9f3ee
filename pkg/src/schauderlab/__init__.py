"""Numerical verification lab for partial Holder (Schauder-type) estimates."""

from .lattice import (
    AnisotropicGrid,
    GridError,
    GridFunction,
    TimeAxis,
    fd_derivative,
    fd_mixed,
    fd_second,
    fd_xprime_alpha,
    load_grid_function,
    make_grid,
    multi_indices,
    multi_indices_upto,
    restrict_interior,
    sample,
    save_grid_function,
    slices_xpp,
)
from .fields import (
    CoefficientField,
    FieldError,
    SyntheticRhs,
    VectorField,
    check_ellipticity,
    constant_coefficients,
    degenerate_coefficients,
    hoelder_coefficients,
    load_coefficient_field,
    random_rough_coefficients,
    save_coefficient_field,
    synthetic_rhs,
    synthetic_vector_rhs,
)
from .seminorm import (
    AUTO,
    EXACT,
    PairBudget,
    SeminormSpec,
    sampled,
    seminorm_full,
    seminorm_partial,
    seminorm_time_half,
    seminorm_xprime,
    seminorm_xprime_k,
    seminorm_zprime,
    seminorm_zprime_k,
)
from .mollify import (
    Kernel1D,
    LemmaReport,
    build_kernel,
    check_lemma31,
    check_lemma41,
    mollify_full,
    mollify_xprime,
    mollify_zprime,
    plateau_bump,
)
from .campanato import (
    PolynomialSlice,
    best_fit_error,
    campanato_quotient,
    interior_centers,
    taylor_x_firstorder,
    taylor_xprime,
    taylor_zprime,
)
from .solve import (
    SolveError,
    SolveReport,
    solve_elliptic_div,
    solve_elliptic_nondiv,
    solve_parabolic_div,
    solve_parabolic_nondiv,
)
from . import oracle

__version__ = "0.1.0"
