"""Trace data model and the portable JSONL on-disk format.

A trace is one measurement session: a subcarrier grid, the slab geometry,
and an ordered sequence of per-packet frames. Each frame carries the complex
channel response of two receive ports (csi_a: the reference path, csi_b: the
path through the material) plus the RSSI/AGC bookkeeping needed to restore
absolute voltage units.

File format (one JSON document per line):
  line 1 header: {"version": 1, "center_freq_hz": ..., "bandwidth_hz": ...,
    "spacing_hz": ..., "subcarrier_indices": [...], "d_m": ...,
    "material_label": "...", "packet_interval_s": ...}
  each further line, one frame: {"t": ..., "rssi_a": ..., "rssi_b": ...,
    "rssi_c": ..., "agc": ..., "csi_a": [[re, im], ...], "csi_b": [[re, im], ...]}
Absent RSSI ports are omitted (or null). Complex values are [real, imaginary].
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

TRACE_FORMAT_VERSION = 1

DEFAULT_CENTER_FREQ_HZ = 5.32e9
DEFAULT_BANDWIDTH_HZ = 20e6
DEFAULT_SPACING_HZ = 312.5e3

# The 30-entry reporting subgroup of a 64-tone 20 MHz channel:
# every second index from -28 to -2, then -1, 1, then every second from 3 to 27,
# then 28. Position 16 (1-based) is index +1, adjacent to the center frequency.
DEFAULT_SUBCARRIER_INDICES = tuple(
    list(range(-28, -1, 2)) + [-1, 1] + list(range(3, 28, 2)) + [28]
)


class TraceFormatError(ValueError):
    """Raised for malformed or invariant-violating trace data."""


@dataclass(frozen=True)
class SubcarrierGrid:
    """Frequency layout of the reported subcarriers.

    Subcarrier *positions* used throughout the package are 1-based indices
    into ``subcarrier_indices``; the signed entries themselves are offsets
    from the center frequency in units of ``spacing_hz``.
    """

    center_freq_hz: float = DEFAULT_CENTER_FREQ_HZ
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ
    spacing_hz: float = DEFAULT_SPACING_HZ
    subcarrier_indices: tuple[int, ...] = DEFAULT_SUBCARRIER_INDICES

    def __post_init__(self) -> None:
        object.__setattr__(self, "subcarrier_indices", tuple(int(i) for i in self.subcarrier_indices))
        if self.spacing_hz <= 0.0:
            raise TraceFormatError(f"spacing_hz must be > 0, got {self.spacing_hz}")
        idx = self.subcarrier_indices
        if len(idx) == 0:
            raise TraceFormatError("subcarrier_indices must be non-empty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise TraceFormatError("subcarrier_indices must be strictly increasing")
        half = self.bandwidth_hz / 2.0
        for i in idx:
            off = i * self.spacing_hz
            if abs(off) > half:
                raise TraceFormatError(
                    f"subcarrier index {i} at {off:+.0f} Hz lies outside the +-{half:.0f} Hz band"
                )

    @property
    def n_subcarriers(self) -> int:
        return len(self.subcarrier_indices)

    def frequency(self, position: int) -> float:
        """Absolute frequency [Hz] of the 1-based subcarrier position."""
        if not (1 <= position <= self.n_subcarriers):
            raise IndexError(
                f"subcarrier position {position} out of range 1..{self.n_subcarriers}"
            )
        return self.center_freq_hz + self.subcarrier_indices[position - 1] * self.spacing_hz


@dataclass(frozen=True)
class DielectricProperties:
    """Relative permittivity and conductivity [S/m] of a medium at one frequency."""

    eps_r: float
    sigma: float

    def __post_init__(self) -> None:
        if not (self.eps_r > 0.0) or not math.isfinite(self.eps_r):
            raise ValueError(f"eps_r must be a positive finite number, got {self.eps_r}")
        if self.eps_r < 1.0:
            warnings.warn(
                f"eps_r = {self.eps_r} < 1 is non-physical for ordinary media",
                stacklevel=2,
            )
        if self.sigma < 0.0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be >= 0 and finite, got {self.sigma}")


def _as_readonly_complex(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 1:
        raise TraceFormatError(f"CSI must be a flat list of complex values, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CsiFrame:
    """One packet's channel responses plus receiver power bookkeeping.

    rssi_a/b/c are per-port received power indicators [dB]; absent ports are
    None and contribute zero linear power. agc is the hardware gain [dB]
    applied before sampling. csi_a is the reference-path response, csi_b the
    material-path response; both are complex per-subcarrier values.
    """

    t: float
    agc: float
    csi_a: np.ndarray
    csi_b: np.ndarray
    rssi_a: float | None = None
    rssi_b: float | None = None
    rssi_c: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "csi_a", _as_readonly_complex(self.csi_a))
        object.__setattr__(self, "csi_b", _as_readonly_complex(self.csi_b))

    @property
    def rssi_ports(self) -> tuple[float | None, float | None, float | None]:
        return (self.rssi_a, self.rssi_b, self.rssi_c)


@dataclass(frozen=True)
class Trace:
    """A full measurement session against one material slab."""

    grid: SubcarrierGrid
    d_m: float
    material_label: str
    frames: tuple[CsiFrame, ...]
    packet_interval_s: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))


def validate_trace(trace: Trace) -> list[str]:
    """Return a description of every violated invariant (empty when valid)."""
    problems: list[str] = []
    if not (trace.d_m > 0.0):
        problems.append("d_m must be > 0")
    if len(trace.frames) == 0:
        problems.append("frames must be non-empty")
    n_sc = trace.grid.n_subcarriers
    prev_t = -math.inf
    for i, frame in enumerate(trace.frames):
        if frame.t < 0.0 or not math.isfinite(frame.t):
            problems.append(f"frames[{i}].t must be >= 0 and finite")
        if frame.t < prev_t:
            problems.append(f"frames[{i}].t decreases")
        prev_t = frame.t
        if len(frame.csi_a) != n_sc:
            problems.append(f"frames[{i}].csi_a length mismatch: {len(frame.csi_a)} != {n_sc}")
        if len(frame.csi_b) != n_sc:
            problems.append(f"frames[{i}].csi_b length mismatch: {len(frame.csi_b)} != {n_sc}")
        if all(r is None for r in frame.rssi_ports):
            problems.append(f"frames[{i}] has no RSSI port")
        for name, r in zip(("rssi_a", "rssi_b", "rssi_c"), frame.rssi_ports):
            if r is not None and not math.isfinite(r):
                problems.append(f"frames[{i}].{name} is non-finite")
        if not math.isfinite(frame.agc):
            problems.append(f"frames[{i}].agc is non-finite")
        for name, arr in (("csi_a", frame.csi_a), ("csi_b", frame.csi_b)):
            if not np.all(np.isfinite(arr.view(np.float64))):
                problems.append(f"frames[{i}].{name} contains a non-finite sample")
    return problems


def _require_valid(trace: Trace) -> None:
    problems = validate_trace(trace)
    if problems:
        raise TraceFormatError("; ".join(problems))


def _csi_to_json(arr: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in arr]


def _csi_from_json(entry, line_no: int, key: str) -> np.ndarray:
    try:
        return np.array([complex(re, im) for re, im in entry], dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise TraceFormatError(f"line {line_no}: malformed {key}: {exc}") from None


def write_trace(trace: Trace) -> bytes:
    """Serialize a valid trace to the JSONL format (deterministic bytes)."""
    _require_valid(trace)
    out = io.StringIO()
    header = {
        "version": TRACE_FORMAT_VERSION,
        "center_freq_hz": trace.grid.center_freq_hz,
        "bandwidth_hz": trace.grid.bandwidth_hz,
        "spacing_hz": trace.grid.spacing_hz,
        "subcarrier_indices": list(trace.grid.subcarrier_indices),
        "d_m": trace.d_m,
        "material_label": trace.material_label,
        "packet_interval_s": trace.packet_interval_s,
    }
    out.write(json.dumps(header, allow_nan=False))
    out.write("\n")
    for frame in trace.frames:
        record: dict = {"t": frame.t}
        for name, r in zip(("rssi_a", "rssi_b", "rssi_c"), frame.rssi_ports):
            if r is not None:
                record[name] = r
        record["agc"] = frame.agc
        record["csi_a"] = _csi_to_json(frame.csi_a)
        record["csi_b"] = _csi_to_json(frame.csi_b)
        out.write(json.dumps(record, allow_nan=False))
        out.write("\n")
    return out.getvalue().encode("utf-8")


def parse_trace(data: bytes | str) -> Trace:
    """Parse the JSONL trace format and verify every invariant."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise TraceFormatError("missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"line 1: malformed header: {exc}") from None
    if not isinstance(header, dict) or "center_freq_hz" not in header:
        raise TraceFormatError("line 1: not a trace header object")
    version = header.get("version")
    if version != TRACE_FORMAT_VERSION:
        raise TraceFormatError(f"unsupported trace format version {version!r}")
    try:
        grid = SubcarrierGrid(
            center_freq_hz=float(header["center_freq_hz"]),
            bandwidth_hz=float(header["bandwidth_hz"]),
            spacing_hz=float(header["spacing_hz"]),
            subcarrier_indices=tuple(header["subcarrier_indices"]),
        )
        d_m = float(header["d_m"])
        material_label = str(header["material_label"])
        packet_interval_s = float(header["packet_interval_s"])
    except KeyError as exc:
        raise TraceFormatError(f"line 1: header missing field {exc}") from None

    frames: list[CsiFrame] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"line {line_no}: malformed frame: {exc}") from None
        try:
            frame = CsiFrame(
                t=float(record["t"]),
                agc=float(record["agc"]),
                csi_a=_csi_from_json(record["csi_a"], line_no, "csi_a"),
                csi_b=_csi_from_json(record["csi_b"], line_no, "csi_b"),
                rssi_a=None if record.get("rssi_a") is None else float(record["rssi_a"]),
                rssi_b=None if record.get("rssi_b") is None else float(record["rssi_b"]),
                rssi_c=None if record.get("rssi_c") is None else float(record["rssi_c"]),
            )
        except KeyError as exc:
            raise TraceFormatError(f"line {line_no}: frame missing field {exc}") from None
        frames.append(frame)

    trace = Trace(
        grid=grid,
        d_m=d_m,
        material_label=material_label,
        frames=tuple(frames),
        packet_interval_s=packet_interval_s,
    )
    _require_valid(trace)
    return trace


def load_trace(path) -> Trace:
    with open(path, "rb") as fh:
        return parse_trace(fh.read())


def save_trace(trace: Trace, path) -> None:
    data = write_trace(trace)
    with open(path, "wb") as fh:
        fh.write(data)
