"""Policy-gradient synthesis for the continuous-time LQR.

Core pieces: certified Lyapunov solvers (direct and truncated-integral
quadrature), the exact policy gradient and Riccati baseline, bounded-noise
robust gradient emulation, a normalized-encoding error algebra verifying the
Gramian pipeline at desk scale, and reproducible benchmark drivers.
"""

from .descent import (
    ContractionCheck,
    DescentCheck,
    IterationTrace,
    OptimizerConfig,
    RateFit,
    fit_linear_rate,
    policy_gradient_descent,
    verify_descent_lemma,
    verify_gain_contraction,
)
from .encoding import (
    EmulatedEncoding,
    SelectFamily,
    build_select_family,
    emulate_objective_evaluation,
    emulate_trace_estimate,
    encode_matrix_exponential,
    encode_problem_matrix,
    encode_product,
    lcu_combine,
    verify_lyapunov_encoding,
)
from .errors import (
    BudgetError,
    ConvergenceError,
    DimensionError,
    LqrkitError,
    RadiusError,
    StabilityError,
    StepSizeError,
    ValidationError,
    VerificationError,
)
from .gradients import (
    ErrorBudget,
    GradientReport,
    emulate_entry_tomography,
    emulate_norm_estimation,
    robust_gradient,
    split_budget,
    two_point_estimator,
    vectorize_gradient,
)
from .linalg import (
    DecayEnvelope,
    SpectralSummary,
    decay_envelope,
    is_hurwitz,
    kron_vectorize,
    matrix_exponential,
    spectral_summary,
)
from .lqr import (
    FeedbackGain,
    ProblemInstance,
    SublevelConstants,
    exact_gradient,
    gain,
    initial_gain,
    newton_kleinman,
    objective,
    problem,
    state_covariance_X,
    sublevel_constants,
    value_matrix_P,
)
from .lyapunov import (
    LyapunovSolution,
    QuadraturePlan,
    quadrature_plan,
    solve_lyapunov_direct,
    solve_lyapunov_quadrature,
    truncation_horizon,
)

__version__ = "0.1.0"
