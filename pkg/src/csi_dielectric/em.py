"""Electromagnetic forward and inverse maps for a lossy non-magnetic medium.

Forward direction: (eps_r, sigma, f) -> complex wavenumber components
(k_r, k_i) -> complex transmission factor across a slab of thickness d.
Inverse direction: transmission factor -> (k_r, k_i) -> (eps_r, sigma).

All arithmetic is double precision. The forward/inverse pair is written in
cancellation-free form so the roundtrip holds to ~1e-12 relative even for
nearly lossless media (sigma -> 0), where the textbook expressions lose
half the significand.
"""

from __future__ import annotations

import math
import cmath
from dataclasses import dataclass

from .trace import DielectricProperties

# vacuum permittivity [F/m] and permeability [H/m] (CODATA 2018)
EPS0 = 8.8541878128e-12
MU0 = 1.25663706212e-6

# below this k_i/k_r ratio the medium is treated as lossless; the ratio-based
# inversion is singular at sigma = 0 and its limit is analytic
LOSSLESS_RATIO = 1e-9

TWO_PI = 2.0 * math.pi


class NonPhysicalError(ValueError):
    """Measured or derived quantity is outside the passive-medium domain."""


@dataclass(frozen=True)
class PropagationFactors:
    """Wavenumber components of a plane wave in a lossy medium.

    k_r: phase constant [rad/m], > 0
    k_i: attenuation constant [Np/m], >= 0, <= k_r for passive media
    """

    k_r: float
    k_i: float

    def __post_init__(self) -> None:
        if not (self.k_r > 0.0):
            raise NonPhysicalError(f"k_r must be > 0, got {self.k_r}")
        if self.k_i < 0.0:
            raise NonPhysicalError(f"k_i must be >= 0, got {self.k_i}")
        if self.k_r < self.k_i:
            raise NonPhysicalError(
                f"k_r must be >= k_i for a passive medium, got k_r={self.k_r}, k_i={self.k_i}"
            )


@dataclass(frozen=True)
class TransmissionFactor:
    """Polar form of the slab transmission ratio.

    magnitude: in (0, 1]; phase_rad: in (-2*pi, 0], the accumulated
    (negative) phase across the slab after branch selection.
    """

    magnitude: float
    phase_rad: float

    def __post_init__(self) -> None:
        if not (0.0 < self.magnitude <= 1.0):
            raise NonPhysicalError(f"magnitude must be in (0, 1], got {self.magnitude}")
        if not (-TWO_PI < self.phase_rad <= 0.0):
            raise NonPhysicalError(f"phase_rad must be in (-2*pi, 0], got {self.phase_rad}")


def wavenumbers(props: DielectricProperties, freq_hz: float) -> PropagationFactors:
    """Phase and attenuation constants of a plane wave in the given medium.

    k_r = w*sqrt(mu0*eps0*eps_r) * sqrt((sqrt(1+L^2)+1)/2)
    k_i = w*sqrt(mu0*eps0*eps_r) * sqrt((sqrt(1+L^2)-1)/2)

    with w = 2*pi*f and loss term L = sigma/(eps0*eps_r*w). The k_i radical
    is evaluated as L^2/(sqrt(1+L^2)+1) to avoid cancellation at small L.
    """
    if freq_hz <= 0.0:
        raise ValueError(f"freq_hz must be > 0, got {freq_hz}")
    w = TWO_PI * freq_hz
    loss = props.sigma / (EPS0 * props.eps_r * w)
    s = math.sqrt(1.0 + loss * loss)
    base = w * math.sqrt(MU0 * EPS0 * props.eps_r)
    k_r = base * math.sqrt((s + 1.0) / 2.0)
    k_i = base * math.sqrt((loss * loss / (s + 1.0)) / 2.0)
    return PropagationFactors(k_r=k_r, k_i=k_i)


def transmission_factor(pf: PropagationFactors, d_m: float) -> complex:
    """Complex transmission ratio across a slab: e^{-k_i d} * e^{-j k_r d}."""
    if d_m <= 0.0:
        raise ValueError(f"d_m must be > 0, got {d_m}")
    return math.exp(-pf.k_i * d_m) * cmath.exp(-1j * pf.k_r * d_m)


# |t| may exceed 1 by a few rounding steps for a lossless slab; treat that as 1
_UNIT_MAG_TOL = 1e-9


def factors_from_transmission(t: complex, d_m: float, wrap_hint: int = 0) -> PropagationFactors:
    """Invert a slab transmission ratio to wavenumber components.

    k_i = -ln|t|/d. The phase is the principal argument mapped into
    (-2*pi, 0] (subtracting 2*pi when positive) and shifted by a further
    -2*pi*wrap_hint for slabs thicker than one wavelength; k_r = -phase/d.

    Raises NonPhysicalError for |t| > 1 (gain), |t| = 0, a non-positive
    k_r, or a result with k_r < k_i (wrong phase branch).
    """
    if d_m <= 0.0:
        raise ValueError(f"d_m must be > 0, got {d_m}")
    mag = abs(t)
    if mag == 0.0:
        raise NonPhysicalError("transmission magnitude is zero")
    if mag > 1.0 + _UNIT_MAG_TOL:
        raise NonPhysicalError(f"non-physical gain: |t| = {mag} > 1")
    k_i = 0.0 if mag >= 1.0 else -math.log(mag) / d_m

    theta = cmath.phase(t)
    if theta > 0.0:
        theta -= TWO_PI
    theta -= TWO_PI * wrap_hint
    k_r = -theta / d_m
    if k_r <= 0.0:
        raise NonPhysicalError("k_r must be > 0 (zero-phase transmission has no material solution)")
    if k_r < k_i:
        raise NonPhysicalError(
            f"non-physical medium, check wrap_hint: k_r={k_r} < k_i={k_i}"
        )
    return PropagationFactors(k_r=k_r, k_i=k_i)


def invert_to_dielectric(pf: PropagationFactors, freq_hz: float) -> DielectricProperties:
    """Recover (eps_r, sigma) from wavenumber components at one frequency.

    With r = k_r/k_i the loss ratio n = sigma/eps_r follows from
    n = eps0*w*sqrt(((1+r^2)/(r^2-1))^2 - 1), algebraically reduced to
    2*eps0*w*r/(r^2-1), and then
    eps_r = 2*k_r^2 / (w^2*mu0*eps0*(sqrt(1+n^2/(w^2*eps0^2)) + 1)),
    sigma = n*eps_r.

    For k_i/k_r below the lossless threshold the ratio is singular and the
    analytic limit applies: sigma = 0, eps_r = (k_r*c/w)^2.
    """
    if freq_hz <= 0.0:
        raise ValueError(f"freq_hz must be > 0, got {freq_hz}")
    w = TWO_PI * freq_hz
    if pf.k_i < LOSSLESS_RATIO * pf.k_r:
        c = 1.0 / math.sqrt(MU0 * EPS0)
        eps_r = (pf.k_r * c / w) ** 2
        return DielectricProperties(eps_r=eps_r, sigma=0.0)
    ratio = pf.k_r / pf.k_i
    denom = ratio * ratio - 1.0
    if denom <= 0.0:
        raise NonPhysicalError(
            f"k_r/k_i ratio {ratio} is singular (k_r must exceed k_i to invert)"
        )
    n = 2.0 * EPS0 * w * ratio / denom
    # (1+r^2)/(r^2-1) equals sqrt(1 + n^2/(eps0*w)^2); reuse it directly
    s = (1.0 + ratio * ratio) / denom
    eps_r = 2.0 * pf.k_r * pf.k_r / (w * w * MU0 * EPS0 * (s + 1.0))
    return DielectricProperties(eps_r=eps_r, sigma=n * eps_r)
