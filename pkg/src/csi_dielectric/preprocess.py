"""Convert raw frames into one averaged, phase-synchronized response.

Pipeline per frame: restore absolute voltage units from RSSI/AGC (the raw
CSI scale is receiver-internal), then cancel the random per-packet clock
phase by rotating both ports so the reference port's phase is zero. Frames
inside a settling window are then averaged per subcarrier.

The phase rotation is computed with explicit real arithmetic
(w * conj(ref) / |ref| expanded component-wise) rather than a unit phasor:
the products cancel the common packet phase algebraically, which keeps the
result bit-identical when both ports carry the same exactly-representable
rotation and within a few ULP for arbitrary rotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trace import CsiFrame, SubcarrierGrid

DEFAULT_C_DB = 44.0
DEFAULT_WINDOW_S = (10.0, 20.0)


@dataclass(frozen=True)
class RescaleConfig:
    """Unit-restoration and phase-anchoring settings.

    c_db: receiver-internal reference constant [dB] removed together with AGC.
    reference_port: which port's phase is zeroed ("a", the reference path).
    anchor_position: 1-based subcarrier whose reference phase rotates the
        whole frame; None (default) anchors each subcarrier at its own
        position, the strictest reading that keeps the differential phase
        well-defined on every carrier.
    """

    c_db: float = DEFAULT_C_DB
    reference_port: str = "a"
    anchor_position: int | None = None

    def __post_init__(self) -> None:
        if self.reference_port not in ("a", "b"):
            raise ValueError(f"reference_port must be 'a' or 'b', got {self.reference_port!r}")


@dataclass(frozen=True)
class AveragedResponse:
    """Per-subcarrier complex mean of the material-port response [V]."""

    grid: SubcarrierGrid
    values: np.ndarray
    n_frames_used: int
    window_s: tuple[float, float]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.n_frames_used < 1:
            raise ValueError("n_frames_used must be >= 1")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("averaged response contains non-finite values")


def total_power(
    rssi_a: float | None,
    rssi_b: float | None,
    rssi_c: float | None,
    agc: float,
    c_db: float,
) -> float:
    """Total received power in linear units from per-port RSSI readings.

    Combines the present ports' linear powers, then removes the hardware
    gain and the internal reference: sum(10^(rssi/10)) * 10^(-(agc+c)/10).
    Absent ports contribute zero linear power.
    """
    ports = [r for r in (rssi_a, rssi_b, rssi_c) if r is not None]
    if not ports:
        raise ValueError("no RSSI port present")
    acc = 0.0
    for r in ports:
        if not math.isfinite(r):
            raise ValueError(f"non-finite RSSI value {r}")
        acc += 10.0 ** (r / 10.0)
    if not math.isfinite(agc) or not math.isfinite(c_db):
        raise ValueError("agc and c_db must be finite")
    return acc * 10.0 ** (-(agc + c_db) / 10.0)


def mean_subcarrier_power(
    csi_a: np.ndarray | None,
    csi_b: np.ndarray | None = None,
    csi_c: np.ndarray | None = None,
) -> float:
    """Per-subcarrier mean of the summed port powers |csi|^2.

    This exact expression (same operation order) is shared with the trace
    simulator so that its synthesized RSSI inverts bit-consistently.
    """
    ports = [p for p in (csi_a, csi_b, csi_c) if p is not None and len(p) > 0]
    if not ports:
        raise ValueError("at least one CSI list must be non-empty")
    n = len(ports[0])
    if any(len(p) != n for p in ports):
        raise ValueError("CSI lists must have equal length")
    acc = 0.0
    for p in ports:
        arr = np.asarray(p, dtype=np.complex128)
        acc += float(np.sum(arr.real**2 + arr.imag**2))
    return acc / n


def rescale_factor(
    p_total: float,
    csi_a: np.ndarray | None,
    csi_b: np.ndarray | None = None,
    csi_c: np.ndarray | None = None,
) -> float:
    """Power ratio that converts raw CSI units to volts (apply as sqrt)."""
    denom = mean_subcarrier_power(csi_a, csi_b, csi_c)
    if denom == 0.0:
        raise ValueError("all-zero CSI: rescale denominator is zero")
    return p_total / denom


def rescale_frame(frame: CsiFrame, cfg: RescaleConfig = RescaleConfig()) -> CsiFrame:
    """Return the frame with both ports' CSI converted to volts."""
    p_total = total_power(frame.rssi_a, frame.rssi_b, frame.rssi_c, frame.agc, cfg.c_db)
    alpha = rescale_factor(p_total, frame.csi_a, frame.csi_b)
    s = math.sqrt(alpha)
    return CsiFrame(
        t=frame.t,
        agc=frame.agc,
        csi_a=s * frame.csi_a,
        csi_b=s * frame.csi_b,
        rssi_a=frame.rssi_a,
        rssi_b=frame.rssi_b,
        rssi_c=frame.rssi_c,
    )


def _rotate_by_conj(values: np.ndarray, ref) -> np.ndarray:
    # w * conj(ref) / |ref| with the complex product expanded into real ops;
    # numpy's fused complex kernels would break the exact cancellation of a
    # common rotation shared by both operands
    re = values.real * np.real(ref) + values.imag * np.imag(ref)
    im = values.imag * np.real(ref) - values.real * np.imag(ref)
    mag = np.abs(ref)
    return (re + 1j * im) / mag


def phase_adjust(
    frame: CsiFrame, subcarrier_position: int, cfg: RescaleConfig = RescaleConfig()
) -> CsiFrame:
    """Rotate both ports so the reference port's phase is zero at one position.

    Equivalent to multiplying every sample by e^{-j*theta_ref} with
    theta_ref the reference port's phase at ``subcarrier_position``
    (1-based). Magnitudes are preserved and the reference sample's phase is
    exactly zero afterwards.
    """
    ref_arr = frame.csi_a if cfg.reference_port == "a" else frame.csi_b
    if not (1 <= subcarrier_position <= len(ref_arr)):
        raise IndexError(
            f"subcarrier position {subcarrier_position} out of range 1..{len(ref_arr)}"
        )
    ref = complex(ref_arr[subcarrier_position - 1])
    if ref == 0:
        raise ValueError(f"zero reference sample at position {subcarrier_position}")
    return CsiFrame(
        t=frame.t,
        agc=frame.agc,
        csi_a=_rotate_by_conj(frame.csi_a, ref),
        csi_b=_rotate_by_conj(frame.csi_b, ref),
        rssi_a=frame.rssi_a,
        rssi_b=frame.rssi_b,
        rssi_c=frame.rssi_c,
    )


def phase_adjust_per_subcarrier(frame: CsiFrame, cfg: RescaleConfig = RescaleConfig()) -> CsiFrame:
    """Anchor every subcarrier at its own reference-port sample."""
    ref = frame.csi_a if cfg.reference_port == "a" else frame.csi_b
    if np.any(ref == 0):
        raise ValueError("zero reference sample")
    return CsiFrame(
        t=frame.t,
        agc=frame.agc,
        csi_a=_rotate_by_conj(frame.csi_a, ref),
        csi_b=_rotate_by_conj(frame.csi_b, ref),
        rssi_a=frame.rssi_a,
        rssi_b=frame.rssi_b,
        rssi_c=frame.rssi_c,
    )


def trim_and_average(
    frames,
    window_s: tuple[float, float],
    grid: SubcarrierGrid,
) -> AveragedResponse:
    """Complex per-subcarrier mean of csi_b over frames with t in the window.

    Frames must already be rescaled and phase-adjusted. The window is
    inclusive on both ends.
    """
    start, end = window_s
    if not (start < end):
        raise ValueError(f"window start must be < end, got {window_s}")
    selected = [f.csi_b for f in frames if start <= f.t <= end]
    if not selected:
        raise ValueError(f"no frames inside window [{start}, {end}] s")
    stacked = np.vstack(selected)
    # mean around the first row: constant sequences average to that constant
    # bit-exactly, and the shifted sum is better conditioned for long windows
    base = stacked[0]
    mean = base + (stacked - base).mean(axis=0)
    return AveragedResponse(
        grid=grid,
        values=mean,
        n_frames_used=len(selected),
        window_s=(float(start), float(end)),
    )


def select_subcarrier(avg: AveragedResponse, position: int) -> tuple[complex, float]:
    """Channel value and absolute frequency at a 1-based subcarrier position."""
    freq = avg.grid.frequency(position)  # raises IndexError when out of range
    return complex(avg.values[position - 1]), freq


def preprocess_trace(
    trace,
    window_s: tuple[float, float] = DEFAULT_WINDOW_S,
    cfg: RescaleConfig = RescaleConfig(),
) -> AveragedResponse:
    """Full preprocessing: rescale, phase-adjust, trim and average one trace."""
    start, end = window_s
    adjusted = []
    for frame in trace.frames:
        if not (start <= frame.t <= end):
            continue
        frame = rescale_frame(frame, cfg)
        if cfg.anchor_position is None:
            frame = phase_adjust_per_subcarrier(frame, cfg)
        else:
            frame = phase_adjust(frame, cfg.anchor_position, cfg)
        adjusted.append(frame)
    if not adjusted:
        raise ValueError(f"no frames inside window [{start}, {end}] s")
    return trim_and_average(adjusted, window_s, trace.grid)
