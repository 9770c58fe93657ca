"""Three-block ADMM for regularized least squares decomposition (RLSD).

Solve ``min f1(x1) + f2(x2) + f3(x3)  s.t.  A1 x1 + A2 x2 + x3 = b`` with the
plain Gauss-Seidel ADMM sweep, and check the monotone quantities that make the
iteration converge for any positive penalty.
"""

from . import kernels
from .bench import BenchSpec, gen_background, gen_cpcp, gen_lasso, gen_spcp, generate
from .bundle import read_problem, write_problem
from .diagnostics import (
    CertificateReport,
    Check,
    ReferenceSolution,
    certify,
    check_high_gamma,
    check_identity_x3_lambda,
    compute_reference,
    decrease_margin,
    lyapunov_low,
    lyapunov_mid,
)
from .errors import (
    InfeasiblePointError,
    InvalidInputError,
    MissingReferenceError,
    NotApplicableError,
    NumericalError,
    RlsdError,
    UnsupportedCombinationError,
)
from .gamma import (
    GammaRangeParams,
    Interval,
    IntervalUnion,
    admissible_gamma_range,
    canonical_regime_coverage,
    canonical_theorem_coverage,
)
from .problem import (
    Block,
    BlockMap,
    KktResidual,
    RlsdProblem,
    augmented_lagrangian,
    constraint_violation,
    kkt_residual,
    objective,
    residual,
)
from .regularizers import (
    Box,
    Canonical,
    Regularizer,
    StronglyConvexSmooth,
    project_box,
    prox,
    prox_l1,
    prox_nuclear,
)
from .solver import SolveResult, SolverConfig, Status, Trace, solve, step

__version__ = "0.1.0"
