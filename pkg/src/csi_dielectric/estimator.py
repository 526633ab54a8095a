"""Map a preprocessed channel value through a calibration profile to (eps_r, sigma).

The estimation inverts the calibrated two-term channel model: the slab
transmission factor is isolated as

    T = (measured - coeff_multipath) / coeff_los

and then inverted analytically to wavenumber components and dielectric
properties. Relative-error metrics against reference truth values complete
the evaluation loop.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from . import em
from .calibration import CalibrationProfile
from .preprocess import AveragedResponse, select_subcarrier
from .trace import DielectricProperties


@dataclass(frozen=True)
class DielectricEstimate:
    """Estimated properties plus the transmission-factor intermediates."""

    est: DielectricProperties
    magnitude: float
    phase_rad: float
    subcarrier_position: int | None
    freq_hz: float


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors vs truth; delta_sigma is None for zero-conductivity truth."""

    delta_eps: float
    delta_sigma: float | None

    def __post_init__(self) -> None:
        if self.delta_eps < 0.0:
            raise ValueError("delta_eps must be >= 0")
        if self.delta_sigma is not None and self.delta_sigma < 0.0:
            raise ValueError("delta_sigma must be >= 0")


@dataclass(frozen=True)
class SweepEntry:
    """Per-subcarrier outcome: an estimate, or the error that prevented one."""

    subcarrier_position: int
    estimate: DielectricEstimate | None
    error: str | None = None


def estimate(
    measured: complex, profile: CalibrationProfile, wrap_hint: int = 0
) -> DielectricEstimate:
    """Estimate dielectric properties from one averaged channel value [V]."""
    measured = complex(measured)
    if not (math.isfinite(measured.real) and math.isfinite(measured.imag)):
        raise ValueError(f"measured must be finite, got {measured}")
    numer = measured - profile.coeff_multipath
    if numer == 0:
        raise em.NonPhysicalError(
            "measured value equals the multipath coefficient (zero transmission)"
        )
    t = numer / profile.coeff_los
    pf = em.factors_from_transmission(t, profile.d_m, wrap_hint)
    props = em.invert_to_dielectric(pf, profile.freq_hz)
    # record the branch-reduced transmission factor; wrap_hint only enters k_r
    theta = cmath.phase(t)
    if theta > 0.0:
        theta -= 2.0 * math.pi
    factor = em.TransmissionFactor(magnitude=min(abs(t), 1.0), phase_rad=theta)
    return DielectricEstimate(
        est=props,
        magnitude=factor.magnitude,
        phase_rad=factor.phase_rad,
        subcarrier_position=profile.subcarrier_position,
        freq_hz=profile.freq_hz,
    )


def relative_errors(est: DielectricProperties, truth: DielectricProperties) -> ErrorReport:
    """delta_eps = |eps_r - eps_hat|/eps_r and likewise for sigma.

    A zero-conductivity truth makes delta_sigma undefined (reported as None)
    rather than an infinity.
    """
    if not (truth.eps_r > 0.0):
        raise ValueError("truth.eps_r must be > 0")
    delta_eps = abs(truth.eps_r - est.eps_r) / truth.eps_r
    if truth.sigma == 0.0:
        return ErrorReport(delta_eps=delta_eps, delta_sigma=None)
    delta_sigma = abs(truth.sigma - est.sigma) / truth.sigma
    return ErrorReport(delta_eps=delta_eps, delta_sigma=delta_sigma)


def estimate_per_subcarrier(
    avg: AveragedResponse,
    profiles: list[CalibrationProfile],
    wrap_hint: int = 0,
) -> list[SweepEntry]:
    """Independent estimates for every profiled subcarrier position.

    Failures (non-physical transmission, profile/grid mismatch) are recorded
    per position without aborting the sweep.
    """
    entries: list[SweepEntry] = []
    for profile in sorted(profiles, key=lambda p: p.subcarrier_position or 0):
        position = profile.subcarrier_position
        if position is None:
            entries.append(
                SweepEntry(subcarrier_position=0, estimate=None, error="profile has no subcarrier position")
            )
            continue
        try:
            value, freq = select_subcarrier(avg, position)
            if not math.isclose(freq, profile.freq_hz, rel_tol=1e-9):
                raise ValueError(
                    f"profile frequency {profile.freq_hz} Hz does not match grid ({freq} Hz)"
                )
            entries.append(
                SweepEntry(
                    subcarrier_position=position,
                    estimate=estimate(value, profile, wrap_hint),
                )
            )
        except (ValueError, IndexError) as exc:  # includes NonPhysicalError
            entries.append(SweepEntry(subcarrier_position=position, estimate=None, error=str(exc)))
    return entries
