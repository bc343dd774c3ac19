"""Radial p-Laplacian laboratory for the change of unknown linking a
gradient-source problem with an order-zero one."""

from .branch import (
    BranchDiagram,
    Diverged,
    LambdaStarResult,
    RegularityPrediction,
    ShootingCurve,
    branch_diagram,
    energy,
    extremal_solution,
    find_lambda_star,
    lambda_small,
    minimal_solution,
    regularity_prediction,
    shoot_sweep,
    stability_check,
)
from .catalog import EXAMPLE_IDS, CatalogEntry, catalog, lookup, power_g
from .eigen import EigenResult, first_eigenpair, hardy_constant, rayleigh
from .growth import (
    ConvexityReport,
    GrowthReport,
    classify_growth,
    construct_counterexample_g,
    convexity_diagnostics,
    critical_exponents,
)
from .nonlinearity import Nonlinearity, piecewise_linear, sampled
from .radial import (
    FixedRHS,
    GradientForm,
    OrderZero,
    RadialGrid,
    RadialProblem,
    RadialSolution,
    Weight,
    green_apply,
    norms,
    residual,
    shoot,
)
from .singular import (
    CorrespondenceReport,
    SingularFamily,
    correspondence_check,
    dirac_coefficient,
    solve_with_atom,
    um_family,
)
from .transform import GridSpec, TransformTables, build_transform, g_to_beta

__version__ = "0.1.0"
