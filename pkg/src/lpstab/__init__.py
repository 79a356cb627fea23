"""Stability of lp-regularized linear inverse problems.

Solvers for ``min_f 1/2 ||y - A f||_2^2 + lam ||f||_p^p`` with ``p > 1``,
the Lipschitz and Hölder constants that control how the minimizer moves with
``y``, and seeded experiments that check those constants empirically.
"""

from .bounds import (
    BoundSource,
    OperatorNormResult,
    Region,
    StabilityBound,
    abstract_holder,
    applicable_bound,
    growth_check_pge2,
    growth_check_plt2,
    holder_bound_pge2,
    local_lipschitz_plt2,
    operator_norm,
    r_p_ball,
    r_p_general,
    riesz_thorin_bound,
    tikhonov_lipschitz,
    tikhonov_loose,
)
from .duality import ONE, DualVector, duality_map, g_inverse, g_p
from .estimators import DualityMapTransformer, LpRegression, TikhonovRegression
from .model import (
    ForwardOperator,
    Measurement,
    ProblemSpec,
    Signal,
    SolverConfig,
    gradient,
    objective,
    synthesis_from_analysis,
)
from .solvers import (
    ConvergenceError,
    GramMatrix,
    Solution,
    gram_matrix,
    prox_power,
    representer_certificate,
    solve_lp,
    solve_tikhonov,
)

__version__ = "0.1.0"
