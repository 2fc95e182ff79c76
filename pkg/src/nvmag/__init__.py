"""nvmag: spin-echo decoherence and magnetometry for a diamond defect spin.

The package simulates Hahn-echo coherence of a single electron spin
coupled to a dilute bath of spin-1/2 carbon-13 nuclei, extracts the
collapse/revival/envelope timescales that make the echo a field ruler,
and closes the loop with field inversion, three-axis reconstruction,
alignment resolution, and shot-noise sensitivity estimates.

Units throughout: nm, ms, Gauss, kHz (and GHz only in the level solver).
"""

from .bath import (
    BathRealization,
    LatticeConfig,
    NuclearSpin,
    generate_lattice_sites,
    hyperfine_vector,
    nuclear_dipolar_coupling,
    sample_bath,
)
from .decoherence import (
    CoherenceTrace,
    EchoSchedule,
    FieldVector,
    analytic_coherence,
    analytic_trace,
    echo_coherence_trace,
    effective_field,
    ensemble_average,
    pair_echo_factor,
    required_time_step,
    single_spin_echo_factor,
)
from .errors import (
    ConfigError,
    CrossingNotFoundError,
    DomainError,
    GridTooCoarseError,
    InsufficientEnvelopeError,
    NoRevivalError,
    PhysicsError,
    ShapeError,
    UnsupportedBranchError,
)
from .magnetometry import (
    AlignmentResolution,
    AxisMeasurement,
    Calibration,
    FieldEstimate,
    OdmrSpectrum,
    invert_TR_to_B,
    make_simulated_probe,
    measurements_to_components,
    odmr_transitions,
    reconstruct_field,
    resolve_alignment,
    subtract_bias,
    zeeman_levels,
)
from .sensitivity import (
    DetectionLimit,
    OptimalPoint,
    ReadoutModel,
    SensitivityReport,
    build_report,
    fluorescence_signal,
    min_detectable_field,
    optimal_sensitivity,
    sensitivity_eta,
    shot_noise,
    signal_response,
)
from .timescales import (
    PowerLawFit,
    RevivalPeak,
    TimescaleSet,
    extract_T2,
    extract_TR,
    extract_Tw,
    extract_timescales,
    find_revival_peaks,
    fit_power_law,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentResolution",
    "AxisMeasurement",
    "BathRealization",
    "Calibration",
    "CoherenceTrace",
    "ConfigError",
    "CrossingNotFoundError",
    "DetectionLimit",
    "DomainError",
    "EchoSchedule",
    "FieldEstimate",
    "FieldVector",
    "GridTooCoarseError",
    "InsufficientEnvelopeError",
    "LatticeConfig",
    "NoRevivalError",
    "NuclearSpin",
    "OdmrSpectrum",
    "OptimalPoint",
    "PhysicsError",
    "PowerLawFit",
    "ReadoutModel",
    "RevivalPeak",
    "SensitivityReport",
    "ShapeError",
    "TimescaleSet",
    "UnsupportedBranchError",
    "analytic_coherence",
    "analytic_trace",
    "build_report",
    "echo_coherence_trace",
    "effective_field",
    "ensemble_average",
    "extract_T2",
    "extract_TR",
    "extract_Tw",
    "extract_timescales",
    "find_revival_peaks",
    "fit_power_law",
    "fluorescence_signal",
    "generate_lattice_sites",
    "hyperfine_vector",
    "invert_TR_to_B",
    "make_simulated_probe",
    "measurements_to_components",
    "min_detectable_field",
    "nuclear_dipolar_coupling",
    "odmr_transitions",
    "optimal_sensitivity",
    "pair_echo_factor",
    "reconstruct_field",
    "required_time_step",
    "resolve_alignment",
    "sample_bath",
    "sensitivity_eta",
    "shot_noise",
    "signal_response",
    "single_spin_echo_factor",
    "subtract_bias",
    "zeeman_levels",
    "__version__",
]
