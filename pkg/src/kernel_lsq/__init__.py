"""Lagrange bases, Gram inverse certificates and L2 projection for zonal kernels on the 2-sphere."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .geometry import (  # noqa: E402,F401
    ManifoldConstants,
    PointSet,
    SpherePoint,
    candidate_grid,
    generate_fibonacci,
    geodesic_distance,
    mesh_stats,
    sphere_constants,
    thin_to_separation,
)
from .gram import (  # noqa: E402,F401
    GramCertificate,
    GramMatrix,
    assemble_gram,
    band_split,
    chebyshev_inverse_test,
    dms_constants,
    inverse_inf_norm,
    offdiag_decay_check,
    select_gamma,
)
from .kernels import (  # noqa: E402,F401
    LegendreSeriesKernel,
    SurfaceSplineKernel,
    kernel_eval,
    kernel_from_json,
    legendre_eval,
    perturbed_kernel,
    sobolev_kernel,
    surface_spline_eval,
)
from .lagrange import (  # noqa: E402,F401
    FunctionFamily,
    LagrangeBasis,
    RenormalizedBasis,
    analysis_map,
    collocation_matrix,
    eval_combination,
    eval_lagrange,
    renormalize,
    solve_augmented_lagrange,
    solve_lagrange,
)
from .projector import (  # noqa: E402,F401
    L2Projector,
    ProjectorReport,
    best_error,
    convergence_study,
    make_test_function,
    operator_norm_components,
    project,
    projector_inf_norm_direct,
)
from .quadrature import QuadratureRule, default_rule, inner_product, integrate, lp_norm, product_rule  # noqa: E402,F401
from .stability import (  # noqa: E402,F401
    StabilityReport,
    check_lp_condition,
    fit_decay,
    fit_holder,
    lebesgue_constant,
    measure_stability,
    nikolskii_check,
    riesz_bounds,
)
