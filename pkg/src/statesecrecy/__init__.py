"""Secure remote state estimation over a lossy two-receiver channel.

Simulation library for an unstable linear plant whose sensor encodes
packets as reference differences keyed to user acknowledgments: the
user decodes exactly, while one missed interception makes the
eavesdropper's estimation error diverge at the open-loop rate.  Exact
MMSE filters for both receivers, a batch conditioning oracle,
withholding baselines, and a CLI harness with verification suites.
"""

from .baselines import (
    BaselineRun,
    DeterministicWithholding,
    RandomWithholding,
    baseline_covariances,
    decide_transmit,
)
from .channel import (
    ChannelLaw,
    OutcomeTrace,
    couple_trace,
    first_critical_time,
    reference_times,
    sample_trace,
    trace_from_csv,
    trace_to_csv,
    transmit,
)
from .coding import LocalKalmanFilter, SecrecyEncoder, encode_trace, user_decode
from .config import CodeSpec, ConfigError, ScenarioConfig, build_config, load_config
from .estimators import (
    EveBelief,
    EveFilter,
    UserBelief,
    UserFilter,
    batch_oracle,
    batch_oracle_estimate,
    write_step_log,
)
from .gaussians import (
    CovarianceMatrix,
    GaussianBelief,
    NumericError,
    condition,
    dominant_left_eigenvector,
    kalman_gain,
    pseudoinverse,
    solve_dare,
    spectral_radius,
    symmetrize,
)
from .plant import (
    LinearSystem,
    Trajectory,
    open_loop_covariance,
    simulate,
    trajectory_from_csv,
    trajectory_to_csv,
)
from .runner import RunRecord, collect_records, export_traces, run_scenario
from .suites import SUITE_NAMES, CheckResult, run_suite

__version__ = "0.1.0"

__all__ = [
    "BaselineRun",
    "ChannelLaw",
    "CheckResult",
    "CodeSpec",
    "ConfigError",
    "CovarianceMatrix",
    "DeterministicWithholding",
    "EveBelief",
    "EveFilter",
    "GaussianBelief",
    "LinearSystem",
    "LocalKalmanFilter",
    "NumericError",
    "OutcomeTrace",
    "RandomWithholding",
    "RunRecord",
    "ScenarioConfig",
    "SecrecyEncoder",
    "SUITE_NAMES",
    "Trajectory",
    "UserBelief",
    "UserFilter",
    "baseline_covariances",
    "batch_oracle",
    "batch_oracle_estimate",
    "build_config",
    "collect_records",
    "condition",
    "couple_trace",
    "decide_transmit",
    "dominant_left_eigenvector",
    "encode_trace",
    "export_traces",
    "first_critical_time",
    "kalman_gain",
    "load_config",
    "open_loop_covariance",
    "pseudoinverse",
    "reference_times",
    "run_scenario",
    "run_suite",
    "sample_trace",
    "simulate",
    "solve_dare",
    "spectral_radius",
    "symmetrize",
    "trace_from_csv",
    "trace_to_csv",
    "trajectory_from_csv",
    "trajectory_to_csv",
    "transmit",
    "user_decode",
    "write_step_log",
]
