"""Free energy of multi-species spherical spin glasses.

Minimizes the Crisanti-Sommers functional over finitely-supported order
parameters, recovers the equivalent Parisi representation, and classifies
replica symmetry breaking (level and cross-species simultaneity) at the
minimizers found.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .analysis import (
    ClassificationReport,
    ResidualBlock,
    bridge_residual,
    check_simultaneity_hypothesis,
    classify_rsb,
    compute_residuals,
    cs_identity_residual,
    parisi_identity_residuals,
)
from .functionals import (
    BAssignment,
    ConstraintError,
    dA_db,
    eval_A,
    eval_B,
    grad_B_points,
)
from .mc import McConfig, McEstimate, estimate_F, sample_hamiltonian
from .model import (
    MixtureModel,
    check_convexity,
    eval_theta,
    eval_xi,
    eval_xi_s,
    hessian_xi,
    load_model,
    s_ext,
    single_species_pspin,
)
from .orderparam import (
    DiscretePair,
    PairMetricView,
    d_at_atoms,
    delta_at_atoms,
    ibp_quantile_check,
    pseudometric,
    pushforward_support,
)
from .solver import (
    SolveConfig,
    SolveReport,
    minimize_B,
    recover_b,
    stationary_b,
    support_bound,
)

__all__ = [
    "BACKEND",
    "BAssignment",
    "ClassificationReport",
    "ConstraintError",
    "DiscretePair",
    "McConfig",
    "McEstimate",
    "MixtureModel",
    "PairMetricView",
    "ResidualBlock",
    "SolveConfig",
    "SolveReport",
    "bridge_residual",
    "check_convexity",
    "check_simultaneity_hypothesis",
    "classify_rsb",
    "compute_residuals",
    "cs_identity_residual",
    "d_at_atoms",
    "dA_db",
    "delta_at_atoms",
    "estimate_F",
    "eval_A",
    "eval_B",
    "eval_theta",
    "eval_xi",
    "eval_xi_s",
    "grad_B_points",
    "hessian_xi",
    "ibp_quantile_check",
    "load_model",
    "minimize_B",
    "parisi_identity_residuals",
    "pseudometric",
    "pushforward_support",
    "recover_b",
    "s_ext",
    "sample_hamiltonian",
    "single_species_pspin",
    "stationary_b",
    "support_bound",
]
