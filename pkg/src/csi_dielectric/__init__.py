"""Dielectric property estimation from WiFi channel-state-information traces.

A forward transmission model relates a material slab's relative permittivity
and conductivity to the complex channel response measured between two WiFi
antennas. The package provides the trace data model, the preprocessing that
restores voltage units and cancels packet clock phase, the two-coefficient
calibration, the analytic inversion back to dielectric properties, and a
deterministic forward simulator that makes the whole pipeline verifiable
without radio hardware.
"""

__version__ = "0.1.0"

from .calibration import (
    CalibrationError,
    CalibrationProfile,
    CalibrationSample,
    fit_coefficients,
    fit_coefficients_lm,
    load_profile,
    residuals,
    save_profile,
)
from .em import (
    EPS0,
    MU0,
    NonPhysicalError,
    PropagationFactors,
    TransmissionFactor,
    factors_from_transmission,
    invert_to_dielectric,
    transmission_factor,
    wavenumbers,
)
from .estimator import (
    DielectricEstimate,
    ErrorReport,
    SweepEntry,
    estimate,
    estimate_per_subcarrier,
    relative_errors,
)
from .materials import REFERENCE_MATERIALS
from .preprocess import (
    AveragedResponse,
    RescaleConfig,
    phase_adjust,
    phase_adjust_per_subcarrier,
    preprocess_trace,
    rescale_factor,
    rescale_frame,
    select_subcarrier,
    total_power,
    trim_and_average,
)
from .simulator import (
    SimScenario,
    default_scenario_coefficients,
    synth_channel,
    synth_trace,
    synth_trace_with_truth,
)
from .trace import (
    CsiFrame,
    DielectricProperties,
    SubcarrierGrid,
    Trace,
    TraceFormatError,
    load_trace,
    parse_trace,
    save_trace,
    validate_trace,
    write_trace,
)

__all__ = [
    "AveragedResponse",
    "CalibrationError",
    "CalibrationProfile",
    "CalibrationSample",
    "CsiFrame",
    "DielectricEstimate",
    "DielectricProperties",
    "EPS0",
    "ErrorReport",
    "MU0",
    "NonPhysicalError",
    "PropagationFactors",
    "REFERENCE_MATERIALS",
    "RescaleConfig",
    "SimScenario",
    "SubcarrierGrid",
    "SweepEntry",
    "Trace",
    "TraceFormatError",
    "TransmissionFactor",
    "default_scenario_coefficients",
    "estimate",
    "estimate_per_subcarrier",
    "factors_from_transmission",
    "fit_coefficients",
    "fit_coefficients_lm",
    "invert_to_dielectric",
    "load_profile",
    "load_trace",
    "parse_trace",
    "phase_adjust",
    "phase_adjust_per_subcarrier",
    "preprocess_trace",
    "relative_errors",
    "rescale_factor",
    "rescale_frame",
    "residuals",
    "save_profile",
    "save_trace",
    "select_subcarrier",
    "synth_channel",
    "synth_trace",
    "synth_trace_with_truth",
    "total_power",
    "transmission_factor",
    "trim_and_average",
    "validate_trace",
    "wavenumbers",
    "write_trace",
]
