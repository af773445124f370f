"""Rotationally symmetric homothetic solitons of the inverse mean curvature flow.

Build a profile r(y), check its shape, and write it out::

    from imcf_soliton import Params, integrate_profile, full_report
    prof = integrate_profile(Params(n=2, lam=2.0, mu=1.0), y_max=200.0)
    report = full_report(prof.params, profile=prof)
"""
from .analysis import (
    Check,
    InvariantReport,
    check_case1_exclusion,
    check_growth,
    check_sign_dichotomy,
    check_structural_bounds,
    estimate_slope,
    find_inflection,
    full_report,
)
from .core import (
    DerivedState,
    Params,
    Regime,
    State,
    classify_regime,
    derived_state,
    mean_curvature,
    rhs,
    soliton_residual,
    structural_w,
    third_derivative,
    yform_residual,
)
from .errors import (
    CrossCheckFailure,
    DomainError,
    MultipleInflections,
    NoConvergence,
    NoInflection,
    ParamError,
    PreconditionError,
    RangeError,
    SolitonError,
)
from .integrator import (
    EventSpec,
    Profile,
    Termination,
    Tolerances,
    dense_eval,
    hybrid_start,
    integrate_profile,
    reflect_even,
)
from .picard import (
    ContractionConstants,
    GridPair,
    contraction_constants,
    empirical_contraction_ratio,
    phi_map,
    picard_solve,
)

__version__ = "0.1.0"
