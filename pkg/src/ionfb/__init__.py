"""Feedback cooling of a single trapped ion in front of a mirror.

Cross-validating engines for the same physics: exact Gaussian moment
dynamics, closed-form steady states, truncated-Fock master equations, and
stochastic measurement/feedback trajectories.  All dynamical quantities are
expressed in units of the laser-cooling rate (gamma_eff = 1).
"""

from .analytic import (
    DopplerAsymptote,
    n_min_doppler_asymptote,
    n_min_large_detuning,
    nss_cold_damping,
    nss_gain_slope,
    nss_large_detuning,
    nss_variable_phase,
    optimal_gain_cold_damping,
    optimal_gain_large_detuning,
)
from .errors import (
    BlueDetuningError,
    ConfigError,
    DegenerateStateError,
    DimensionMismatchError,
    GridMismatchError,
    HeatingDominatesError,
    IonfbError,
    NoStableGainError,
    NormCollapseError,
    NotNormalizedError,
    ParameterRegimeWarning,
    PhysicalityWarning,
    SampleRateTooLowError,
    StepTooLargeError,
    TruncationLeakageError,
    UnstableError,
)
from .fock import (
    FockEvolution,
    FockOperators,
    TruncatedDensityMatrix,
    build_fock_operators,
    default_n_max,
    evolve_density_matrix,
    expectations,
    liouvillian_apply,
    load_density_snapshots,
    mirror_jump_operator,
    phonon_expectation,
    save_density_snapshots,
    suggest_timestep,
    wigner_moments,
)
from .moments import (
    DriftDiffusion,
    FeedbackConfig,
    GaussianMomentState,
    StabilityReport,
    build_drift_diffusion,
    evolve_moments,
    phonon_number,
    squeezing_parameter,
    stability_margin,
    steady_state_moments,
    write_moment_series,
)
from .optimize import (
    OptimalPoint,
    golden_section,
    minimize_over_gain,
    optimal_phase_vs_detuning,
    write_optimal_curve,
)
from .params import (
    DerivedRates,
    PhysicalParams,
    derive_rates,
    dipole_alpha,
    dipole_pattern,
    isotropic_pattern,
    physical_params_from_config,
    read_config,
)
from .trajectories import (
    EnsembleStatistics,
    TrajectoryConfig,
    TrajectoryRecord,
    bandpass_demodulate,
    ensemble_statistics,
    simulate_diffusive_trajectory,
    simulate_ensemble,
    simulate_feedback_trajectory,
    simulate_jump_trajectory,
    write_ensemble_csv,
    write_metadata,
    write_trajectory_csv,
)

__version__ = "0.1.0"
