"""Forward-model trace synthesizer: the package's ground-truth source.

Each packet's channel responses follow the calibrated two-term model
(direct path times slab transmission, plus a multipath offset), rotated by
a random per-packet clock phase that both receive ports share. Additive
receiver noise, coarse per-port RSSI, per-frame AGC and a power-of-two raw
CSI gain reproduce the bookkeeping a real capture would carry, so the full
preprocessing path is exercised end to end.

Determinism: a scenario (seed included) maps to exactly one trace. The RNG
stream order per trace is part of the contract: packet phases, raw-gain
exponents, transient perturbation walks, then per-packet noise (reference
port first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import em
from .preprocess import mean_subcarrier_power, total_power
from .trace import CsiFrame, DielectricProperties, SubcarrierGrid, Trace

DEFAULT_AGC_DB = 30.0

_RSSI_MODES = ("quantized", "exact")


@dataclass(frozen=True)
class SimScenario:
    """Everything needed to synthesize one trace per material.

    coeff_los, coeff_multipath, reference_channel: per-subcarrier complex
    system coefficients (volts). snr_db of None disables noise. transient_s
    prepends perturbed frames before the steady n_packets. multipath_scale
    scales coeff_multipath, modelling stronger or weaker indirect paths.
    rssi_mode "quantized" rounds RSSI to 0.5 dB steps; "exact" tunes the
    emitted RSSI/AGC so the rescaling roundtrip recovers the volt-scale CSI
    to within a few ULP.
    """

    grid: SubcarrierGrid
    d_m: float
    coeff_los: np.ndarray
    coeff_multipath: np.ndarray
    reference_channel: np.ndarray
    snr_db: float | None = 30.0
    n_packets: int = 400
    packet_interval_s: float = 0.05
    c_db: float = 44.0
    seed: int = 0
    transient_s: float = 0.0
    multipath_scale: float = 1.0
    rssi_mode: str = "quantized"
    agc_db: float = DEFAULT_AGC_DB

    def __post_init__(self) -> None:
        for name in ("coeff_los", "coeff_multipath", "reference_channel"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            if arr.shape != (self.grid.n_subcarriers,):
                raise ValueError(
                    f"{name} must have one value per subcarrier "
                    f"({self.grid.n_subcarriers}), got shape {arr.shape}"
                )
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.n_packets < 1:
            raise ValueError(f"n_packets must be >= 1, got {self.n_packets}")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite or None")
        if self.multipath_scale < 0.0:
            raise ValueError(f"multipath_scale must be >= 0, got {self.multipath_scale}")
        if self.packet_interval_s <= 0.0:
            raise ValueError("packet_interval_s must be > 0")
        if self.transient_s < 0.0:
            raise ValueError("transient_s must be >= 0")
        if self.rssi_mode not in _RSSI_MODES:
            raise ValueError(f"rssi_mode must be one of {_RSSI_MODES}, got {self.rssi_mode!r}")


def default_scenario_coefficients(
    grid: SubcarrierGrid, seed: int = 0, base_scale: float = 0.05
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smoothly varying per-subcarrier coefficients drawn from a seeded RNG.

    Returns (coeff_los, coeff_multipath, reference_channel). Magnitude and
    phase follow low-order cosine series across the band, mimicking the
    gentle frequency dependence of a real front end.
    """
    rng = np.random.default_rng(seed)
    idx = np.asarray(grid.subcarrier_indices, dtype=float)
    x = idx / 64.0

    def smooth(scale: float) -> np.ndarray:
        mag = scale * (1.0 + 0.25 * np.cos(2 * np.pi * x + rng.uniform(0, 2 * np.pi)))
        phase = (
            rng.uniform(0, 2 * np.pi)
            + 1.5 * np.cos(2 * np.pi * x * rng.uniform(0.5, 1.5) + rng.uniform(0, 2 * np.pi))
        )
        return mag * np.exp(1j * phase)

    coeff_los = smooth(base_scale)
    coeff_multipath = smooth(0.25 * base_scale)
    reference_channel = smooth(base_scale)
    return coeff_los, coeff_multipath, reference_channel


def synth_channel(scn: SimScenario, props: DielectricProperties, sc_position: int) -> complex:
    """Noiseless material-port response at one 1-based subcarrier position."""
    freq = scn.grid.frequency(sc_position)
    t = em.transmission_factor(em.wavenumbers(props, freq), scn.d_m)
    i = sc_position - 1
    return complex(
        scn.coeff_los[i] * t + scn.multipath_scale * scn.coeff_multipath[i]
    )


def _channel_vector(scn: SimScenario, props: DielectricProperties) -> np.ndarray:
    return np.array(
        [synth_channel(scn, props, pos) for pos in range(1, scn.grid.n_subcarriers + 1)],
        dtype=np.complex128,
    )


def _transient_walks(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    # slowly varying magnitude/phase perturbation, faded out linearly so the
    # trace blends into its steady state
    steps_m = rng.normal(scale=0.08, size=n)
    steps_p = rng.normal(scale=0.25, size=n)
    fade = np.linspace(1.0, 0.0, n, endpoint=False)
    return np.cumsum(steps_m) * fade, np.cumsum(steps_p) * fade


def _quantize_rssi(value: float) -> float:
    return round(value * 2.0) / 2.0


def _tune_exact_rssi(
    target: float, rssi: list[float], agc: float, c_db: float
) -> tuple[list[float], float]:
    """Adjust agc and the weak port's RSSI so decoding lands on target.

    The decode (total_power) quantizes through dB space; two Newton
    corrections plus an ULP-lattice walk on the weak port (whose lattice is
    incommensurate with the other dB fields) put the recovered power within
    about one representable step of the true mean subcarrier power, which is
    what lets the rescale roundtrip close to a few ULP. The arithmetic below
    mirrors total_power exactly so the tuned fields decode bit-consistently.
    """
    nextafter = math.nextafter

    def decode(r: list[float], a: float) -> float:
        acc = 0.0
        for value in r:
            acc += 10.0 ** (value / 10.0)
        return acc * 10.0 ** (-(a + c_db) / 10.0)

    for _ in range(2):
        p0 = decode(rssi, agc)
        if p0 == target:
            return rssi, agc
        agc = agc + 10.0 * math.log10(p0 / target)
    weak = min(range(len(rssi)), key=lambda i: rssi[i])
    lin = [10.0 ** (r / 10.0) for r in rssi]
    share = lin[weak] / sum(lin)
    for _ in range(2):
        p0 = decode(rssi, agc)
        if p0 == target:
            return rssi, agc
        rssi = list(rssi)
        rssi[weak] = rssi[weak] - 10.0 * math.log10(p0 / target) / share

    # one spacing of the target keeps the final CSI within ~3 ULP; bitwise
    # hits are typical anyway
    good_enough = np.spacing(target)

    def walk(r0: list[float], a: float, best, best_err, steps: int):
        # expanding ring around the Newton point: evaluate near offsets first
        gain = 10.0 ** (-(a + c_db) / 10.0)
        head = 10.0 ** (r0[0] / 10.0) if weak == 1 else None
        tail = 10.0 ** (r0[1] / 10.0) if weak == 0 and len(r0) > 1 else None
        up = down = r0[weak]
        for _ in range(steps):
            for positive in (True, False):
                if positive:
                    up = nextafter(up, math.inf)
                    x = up
                else:
                    down = nextafter(down, -math.inf)
                    x = down
                term = 10.0 ** (x / 10.0)
                if head is not None:
                    p = (head + term) * gain
                elif tail is not None:
                    p = (term + tail) * gain
                else:
                    p = term * gain
                err = abs(p - target)
                if err < best_err:
                    r = list(r0)
                    r[weak] = x
                    best, best_err = (r, a), err
                    if best_err <= good_enough:
                        return best, best_err
        return best, best_err

    best = (list(rssi), agc)
    best_err = abs(decode(rssi, agc) - target)
    if best_err > good_enough:
        best, best_err = walk(rssi, agc, best, best_err, steps=48)
    if best_err > good_enough:
        base = best[0]
        for da in range(-6, 7):
            if da == 0:
                continue
            a = agc
            for _ in range(abs(da)):
                a = nextafter(a, math.inf if da > 0 else -math.inf)
            best, best_err = walk(base, a, best, best_err, steps=24)
            if best_err <= good_enough:
                break
    # the inlined decode must stay in lockstep with the real one
    r, a = best
    assert decode(r, a) == total_power(r[0], r[1] if len(r) > 1 else None, None, a, c_db)
    return best


def synth_trace(scn: SimScenario, props: DielectricProperties, label: str = "") -> Trace:
    """Synthesize one deterministic trace for the given material."""
    trace, _, _ = synth_trace_with_truth(scn, props, label)
    return trace


def synth_trace_with_truth(
    scn: SimScenario, props: DielectricProperties, label: str = ""
) -> tuple[Trace, np.ndarray, np.ndarray]:
    """Synthesize a trace plus its volt-scale ground truth.

    Returns (trace, volt_a, volt_b) where volt_a/volt_b are (n_frames, n_sc)
    matrices of the true voltage-scale CSI (noise and packet phase included)
    that preprocessing is expected to recover from the emitted frames.
    """
    rng = np.random.default_rng(scn.seed)
    n_sc = scn.grid.n_subcarriers
    n_transient = int(round(scn.transient_s / scn.packet_interval_s))
    n_total = n_transient + scn.n_packets

    channel_b = _channel_vector(scn, props)
    channel_a = np.asarray(scn.reference_channel, dtype=np.complex128)

    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_total)
    gain_exp = rng.integers(-2, 7, size=n_total)
    if n_transient > 0:
        walk_m, walk_p = _transient_walks(rng, n_transient)
    if scn.snr_db is not None:
        sig_power_a = float(np.mean(np.abs(channel_a) ** 2))
        sig_power_b = float(np.mean(np.abs(channel_b) ** 2))
        snr_lin = 10.0 ** (scn.snr_db / 10.0)
        std_a = math.sqrt(sig_power_a / snr_lin / 2.0)
        std_b = math.sqrt(sig_power_b / snr_lin / 2.0)
        noise_a = std_a * (
            rng.normal(size=(n_total, n_sc)) + 1j * rng.normal(size=(n_total, n_sc))
        )
        noise_b = std_b * (
            rng.normal(size=(n_total, n_sc)) + 1j * rng.normal(size=(n_total, n_sc))
        )

    frames: list[CsiFrame] = []
    truth_a = np.empty((n_total, n_sc), dtype=np.complex128)
    truth_b = np.empty((n_total, n_sc), dtype=np.complex128)
    for i in range(n_total):
        u = complex(math.cos(phases[i]), math.sin(phases[i]))
        volt_a = u * channel_a
        volt_b = u * channel_b
        if i < n_transient:
            factor = (1.0 + walk_m[i]) * complex(math.cos(walk_p[i]), math.sin(walk_p[i]))
            volt_a = factor * volt_a
            volt_b = factor * volt_b
        if scn.snr_db is not None:
            volt_a = volt_a + noise_a[i]
            volt_b = volt_b + noise_b[i]
        truth_a[i] = volt_a
        truth_b[i] = volt_b

        s_a = mean_subcarrier_power(volt_a)
        s_b = mean_subcarrier_power(volt_b)
        s_total = mean_subcarrier_power(volt_a, volt_b)
        agc = scn.agc_db
        rssi = [
            10.0 * math.log10(s_a) + agc + scn.c_db,
            10.0 * math.log10(s_b) + agc + scn.c_db,
        ]
        if scn.rssi_mode == "quantized":
            rssi = [_quantize_rssi(r) for r in rssi]
        else:
            rssi, agc = _tune_exact_rssi(s_total, rssi, agc, scn.c_db)

        g = 2.0 ** float(gain_exp[i])
        frames.append(
            CsiFrame(
                t=i * scn.packet_interval_s,
                agc=agc,
                csi_a=g * volt_a,
                csi_b=g * volt_b,
                rssi_a=rssi[0],
                rssi_b=rssi[1],
            )
        )

    trace = Trace(
        grid=scn.grid,
        d_m=scn.d_m,
        material_label=label,
        frames=tuple(frames),
        packet_interval_s=scn.packet_interval_s,
    )
    return trace, truth_a, truth_b
