"""qcorr: multi-time output correlators of continuously measured qubits.

Simulates simultaneous continuous measurement of several qubit observables
as stochastic signal records and evaluates their multi-time correlators
three independent ways: Monte Carlo estimation from records, exact
projective-collapse evaluation (brute-force and linear-time chain), and the
pair-product factorization valid for unital evolution without phase
backaction.
"""

from .analytic import (
    BRUTE_FORCE_MAX_EVENTS,
    CorrelatorSpec,
    SingularSpec,
    brute_force_correlator,
    chain_correlator,
    factorized_correlator,
    mean_signal,
    singular_corrections,
    two_time_correlator,
)
from .bloch import (
    AffinePropagator,
    EnsembleModel,
    MeasurementChannel,
    ModelSegment,
    build_ensemble_model,
    measurement_dephasing_generator,
    ordered_propagator,
    propagate_ensemble,
)
from .config import RunSetup, load_config, parse_config
from .empirical import (
    CorrelatorEstimate,
    Window,
    estimate_correlator,
    estimate_mean_signal,
    merge_estimates,
    trajectory_window_means,
)
from .errors import (
    ConfigError,
    EstimateMismatchError,
    FactorizationInapplicableError,
    IntegrationDivergedError,
    MagicMismatchError,
    QcorrError,
    RecordFormatError,
    SpecSizeError,
    TruncatedRecordError,
    ValidationError,
    VersionMismatchError,
)
from .noise import trajectory_draws, trajectory_generator
from .recordio import read_records, write_records
from .replica import (
    FourTimeSummary,
    ReplicaConfig,
    ScanRow,
    four_time_scan,
    replica_model,
    three_time_scan,
)
from .trajectory import (
    RecordSet,
    SignalRecord,
    SimConfig,
    TimestepWarning,
    ito_step,
    simulate_ensemble,
    simulate_range,
    simulate_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "AffinePropagator",
    "BRUTE_FORCE_MAX_EVENTS",
    "ConfigError",
    "CorrelatorEstimate",
    "CorrelatorSpec",
    "EnsembleModel",
    "EstimateMismatchError",
    "FactorizationInapplicableError",
    "FourTimeSummary",
    "IntegrationDivergedError",
    "MagicMismatchError",
    "MeasurementChannel",
    "ModelSegment",
    "QcorrError",
    "RecordFormatError",
    "RecordSet",
    "ReplicaConfig",
    "RunSetup",
    "ScanRow",
    "SignalRecord",
    "SimConfig",
    "SingularSpec",
    "SpecSizeError",
    "TimestepWarning",
    "TruncatedRecordError",
    "ValidationError",
    "VersionMismatchError",
    "Window",
    "brute_force_correlator",
    "build_ensemble_model",
    "chain_correlator",
    "estimate_correlator",
    "estimate_mean_signal",
    "factorized_correlator",
    "four_time_scan",
    "ito_step",
    "load_config",
    "mean_signal",
    "measurement_dephasing_generator",
    "merge_estimates",
    "ordered_propagator",
    "parse_config",
    "propagate_ensemble",
    "read_records",
    "replica_model",
    "simulate_ensemble",
    "simulate_range",
    "simulate_trajectory",
    "singular_corrections",
    "three_time_scan",
    "trajectory_draws",
    "trajectory_generator",
    "trajectory_window_means",
    "two_time_correlator",
    "write_records",
]
