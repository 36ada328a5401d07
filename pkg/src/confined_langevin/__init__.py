"""Weak-order integrators for Langevin dynamics confined by specular reflection."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ConfinedLangevinError,
    ContractViolationError,
    DimensionMismatchError,
    EmptyStatisticsError,
    EstimationFailureError,
    InvalidRayError,
    NumericError,
    OutOfDomainError,
    SingularConfigurationError,
    ToleranceError,
    UnderpoweredStudyError,
)
from .geometry import (
    Annulus,
    Ball,
    Box,
    ConvexPolytope,
    Domain,
    HalfLine,
    HalfSpace,
    Interval,
    IntervalProduct,
    RayHit,
    domain_from_config,
    reflect,
)
from .schemes import (
    DynamicsSpec,
    Gaussian,
    GeneralDrift,
    NoiseLaw,
    PhaseState,
    PotentialLangevin,
    SchemeId,
    StepOutcome,
    ThreePoint,
    TwoPoint,
    UnstableOU,
    a_c_step,
    b_step,
    noise_law,
    o_step,
    obabo_jacobian_1d,
    p_step,
    step,
)
from .models import (
    ConstantPotential,
    CoupledQuartic2D,
    ExperimentPreset,
    Funnel,
    InvertedQuadratic,
    ObservableSpec,
    Potential,
    QuadraticWell,
    bvp_gibbs_decay,
    bvp_oscillatory_halfline,
    bvp_quartic_momentum,
    bvp_shifted_square,
    experiment_registry,
    fp_image_density,
    funnel_potential_average,
    gibbs_average,
    ring_weighted_square_average,
)
from .harness import (
    ConvergenceReport,
    EstimatorReport,
    SimulationConfig,
    TauStats,
    convergence_study,
    energy_drift_study,
    fit_loglog_slope,
    run_ergodic,
    run_finite_time,
    run_time_average,
    tau_statistics,
)
from .sir import (
    PosteriorSpec,
    SirData,
    SirParams,
    grad_log_posterior,
    log_posterior,
    make_synthetic_data,
    pla_step,
    rla_step,
    run_sir_inference,
    sir_solve,
)
