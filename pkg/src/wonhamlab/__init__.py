"""Continuous-time finite-state filtering: exact and misspecified filters,
derivative flows, and Monte Carlo verification of stability and robustness bounds."""

from .errors import (
    AbsorbingStateError,
    BoundaryInitialConditionError,
    ConfigError,
    DimensionMismatchError,
    GridMismatchError,
    IllConditionedWarning,
    InsufficientTrialsError,
    NegativeOffDiagonalError,
    NonPositiveEntryError,
    NonSquareError,
    NonzeroRowSumError,
    NotMixingError,
    ObservationMismatchError,
    StateCollapseError,
    UnknownExperimentError,
    WonhamLabError,
)
from .models import (
    FilterModel,
    GeneratorMatrix,
    ModelPair,
    ObservationMap,
    RobustnessConstants,
    component_inverse_moment_bound,
    generator_gap,
    inverse_moment_constant,
    mixing_rate,
    observation_gap,
    stationary_distribution,
    robustness_bound,
    robustness_constants,
    validate_generator,
    validate_observation,
    validate_simplex,
    validate_tangent,
)
from .simulate import (
    ObservationPath,
    SignalPath,
    TimeGrid,
    export_path_csv,
    simulate_increments_batch,
    simulate_observations,
    simulate_signal,
    spawn_generators,
)
from .filters import (
    FilterTrajectory,
    FlowMatrix,
    compose_flows,
    euler_filter_trajectory,
    export_trajectory_csv,
    filter_semiflow,
    filter_trajectory,
    gauge_filter,
    normalize,
    normalize_jacobian,
    normalize_second_derivative,
    wonham_step,
    zakai_flow,
    zakai_flow_inverse,
)
from .sensitivity import (
    DerivativeRecord,
    derivative_bound,
    derivative_flow,
    derivative_records_to_csv,
    derivative_smoothing_route,
    error_representation_check,
    lipschitz_bound,
    robustness_inequality,
    second_derivative_flow,
    second_derivative_gap_bound,
    smoothing_matrix,
    tilted_filter,
)
from .experiments import (
    ExperimentReport,
    ExperimentSpec,
    interpolate_pair,
    list_experiments,
    measure_integrator_tolerance,
    run_convergence_sweep,
    run_derivative_audit,
    run_experiment,
    run_forgetting_experiment,
    run_integrator_refinement,
    run_inverse_moment_experiment,
    run_robustness_experiment,
)

__version__ = "0.1.0"
