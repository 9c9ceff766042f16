"""
treespace: geodesics, Frechet means, and relative-optimality certificates in
the Billera-Holmes-Vogtmann space of phylogenetic trees.
"""

from .backend import backend_name
from .frechet import (
    DirectionVector,
    FrechetProblem,
    GradientView,
    HessianView,
    decompose_direction,
    dir_deriv_of_dir_deriv,
    directional_derivative,
    frechet_value,
    local_support_pairs,
    restricted_gradient,
    restricted_hessian,
)
from .geodesics import (
    Geodesic,
    SupportClassification,
    SupportPair,
    SupportSequence,
    brute_force_geodesic,
    compute_geodesic,
    distance,
    leg_index,
    point_at,
    validate_support,
)
from .newick import NewickError, parse_newick, write_newick
from .optimizer import (
    NewtonConfig,
    OptimalityCertificate,
    certify_relative_optimality,
    check_delta_eps_optimality,
    damped_newton,
    init_quadratic_minimizer,
    line_search,
    minimize_dir_deriv_on_simplex,
    minimize_in_closed_orthant,
    newton_direction,
)
from .splits import (
    Orthant,
    Split,
    enumerate_interior_splits,
    is_compatible_set,
    pendant_split,
    splits_compatible,
)
from .sturm import ProximalSchedule, global_mean, proximal_step
from .trees import (
    SquaredPoint,
    Tree,
    common_edges,
    squaring_map,
    tree_from_json,
    tree_to_json,
    unsquare,
)

__version__ = "0.1.0"
