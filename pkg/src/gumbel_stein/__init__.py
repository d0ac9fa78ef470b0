"""Stein's method for the Gumbel law: semigroup, generator and the coupon-collector rate."""
from .coupon import (
    Budget,
    CollectorStat,
    CoupledTauPair,
    CouponConstants,
    constants,
    density_ratio,
    exact_cdf_Tn,
    exact_exp_moment,
    main_identity_sides,
    sample_coupled,
    y_gn_l2_sq,
    z_diff_l1,
    z_n_from,
)
from .distance import (
    Dictionary,
    DistanceReport,
    decomposition_terms,
    dict_distance,
    gap_profile,
    kolmogorov_distance,
    rate_fit,
)
from .errors import (
    BudgetExceeded,
    DegenerateInput,
    DomainError,
    GumbelSteinError,
    NonConvergence,
    WindowTooSmall,
)
from .functions import TestFunction
from .gumbel import (
    geometric_from_exponential,
    gumbel_cdf,
    gumbel_laplace,
    gumbel_pdf,
    gumbel_sample,
    max_stability_residual,
)
from .quad import CutoffPolicy, QuadConfig, integrate_halfline, integrate_line
from .rng import RngStream, uniform
from .semigroup import (
    GeneratorForm,
    TimeConstant,
    apply_semigroup,
    ergodic_gap,
    generator,
    generator_sup_bound_check,
    semigroup_derivative,
    stein_residual,
    stein_solution,
)

__version__ = "0.1.0"
