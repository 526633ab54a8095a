"""Fit the two complex system coefficients from known-material measurements.

The measurement model is linear in its unknowns:

    measured_i = coeff_los * T_i + coeff_multipath

where T_i is the slab transmission factor computed from material i's known
dielectric properties. coeff_los lumps the direct-path system response,
coeff_multipath the aggregate of all other propagation paths. The primary
solver is exact complex least squares; a damped iterative solver over the
four real parameters is kept as an independent cross-check and converges to
the same solution.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import em
from .trace import DielectricProperties

# warn when the calibration set barely spans the model (two best separations
# between transmission factors below this threshold)
SEPARATION_WARN_THRESHOLD = 0.05

_REL_TOL = 1e-9


class CalibrationError(ValueError):
    """Raised when a calibration set cannot determine the coefficients."""


@dataclass(frozen=True)
class CalibrationSample:
    """One known material's averaged channel value [V] plus its truth."""

    measured: complex
    known: DielectricProperties
    freq_hz: float
    d_m: float

    def __post_init__(self) -> None:
        m = complex(self.measured)
        if m == 0 or not (math.isfinite(m.real) and math.isfinite(m.imag)):
            raise ValueError(f"measured must be finite and non-zero, got {m}")


@dataclass(frozen=True)
class CalibrationProfile:
    """Fitted system coefficients for one subcarrier position."""

    coeff_los: complex
    coeff_multipath: complex
    freq_hz: float
    d_m: float
    residual_rms: float
    n_samples: int
    subcarrier_position: int | None = None

    def __post_init__(self) -> None:
        if self.coeff_los == 0:
            raise CalibrationError("coeff_los must be non-zero")
        if self.n_samples < 2:
            raise CalibrationError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.residual_rms < 0.0:
            raise CalibrationError("residual_rms must be >= 0")


def _design(samples: list[CalibrationSample]) -> tuple[np.ndarray, np.ndarray, float, float]:
    if len(samples) < 2:
        raise CalibrationError(f"insufficient calibration set: need >= 2 samples, got {len(samples)}")
    freq = samples[0].freq_hz
    d = samples[0].d_m
    for s in samples[1:]:
        if not math.isclose(s.freq_hz, freq, rel_tol=_REL_TOL) or not math.isclose(
            s.d_m, d, rel_tol=_REL_TOL
        ):
            raise CalibrationError("mismatched freq/d across samples")
    t = np.array(
        [em.transmission_factor(em.wavenumbers(s.known, s.freq_hz), s.d_m) for s in samples],
        dtype=np.complex128,
    )
    seps = np.abs(t[:, None] - t[None, :])[np.triu_indices(len(t), k=1)]
    scale = 1.0 + float(np.max(np.abs(t)))
    if float(np.max(seps)) < 1e-12 * scale:
        raise CalibrationError(
            "rank-deficient calibration set: all transmission factors are equal"
        )
    top_two = np.sort(seps)[::-1][:2]
    if np.all(top_two < SEPARATION_WARN_THRESHOLD):
        warnings.warn(
            "poorly conditioned calibration set: largest transmission-factor "
            f"separations {top_two.tolist()} are below {SEPARATION_WARN_THRESHOLD}",
            stacklevel=3,
        )
    measured = np.array([s.measured for s in samples], dtype=np.complex128)
    return t, measured, freq, d


def _profile(
    coeffs: np.ndarray,
    t: np.ndarray,
    measured: np.ndarray,
    freq: float,
    d: float,
    subcarrier_position: int | None,
) -> CalibrationProfile:
    resid = measured - (coeffs[0] * t + coeffs[1])
    rms = float(np.sqrt(np.mean(np.abs(resid) ** 2)))
    return CalibrationProfile(
        coeff_los=complex(coeffs[0]),
        coeff_multipath=complex(coeffs[1]),
        freq_hz=freq,
        d_m=d,
        residual_rms=rms,
        n_samples=len(t),
        subcarrier_position=subcarrier_position,
    )


def fit_coefficients(
    samples: list[CalibrationSample], subcarrier_position: int | None = None
) -> CalibrationProfile:
    """Exact complex least-squares fit of the two coefficients."""
    t, measured, freq, d = _design(samples)
    a = np.column_stack([t, np.ones_like(t)])
    coeffs, _, rank, _ = np.linalg.lstsq(a, measured, rcond=None)
    if rank < 2:
        raise CalibrationError("rank-deficient calibration set")
    return _profile(coeffs, t, measured, freq, d, subcarrier_position)


def _lm_solve(
    t: np.ndarray,
    measured: np.ndarray,
    x0: np.ndarray,
    tol: float,
    max_iters: int,
) -> tuple[np.ndarray, int]:
    """Damped least squares over [re(c_l), im(c_l), re(c_m), im(c_m)].

    The model is linear, so the Jacobian is constant; damping still follows
    the classic accept/reject schedule. Returns (solution, iterations).
    """
    n = len(t)
    jac = np.zeros((2 * n, 4))
    jac[0::2, 0] = -t.real
    jac[0::2, 1] = t.imag
    jac[0::2, 2] = -1.0
    jac[1::2, 0] = -t.imag
    jac[1::2, 1] = -t.real
    jac[1::2, 3] = -1.0
    jtj = jac.T @ jac
    diag = np.diag(np.diag(jtj))

    def residual(x: np.ndarray) -> np.ndarray:
        model = (x[0] + 1j * x[1]) * t + (x[2] + 1j * x[3])
        r = measured - model
        out = np.empty(2 * n)
        out[0::2] = r.real
        out[1::2] = r.imag
        return out

    x = x0.astype(float).copy()
    r = residual(x)
    cost = float(r @ r)
    lam = 1e-3
    for iteration in range(1, max_iters + 1):
        grad = jac.T @ r
        if np.max(np.abs(grad)) <= tol * (1.0 + cost):
            return x, iteration - 1
        step = np.linalg.solve(jtj + lam * diag, -grad)
        x_new = x + step
        r_new = residual(x_new)
        cost_new = float(r_new @ r_new)
        if cost_new <= cost:
            x, r, cost = x_new, r_new, cost_new
            lam = max(lam / 10.0, 1e-15)
            if np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(x))):
                return x, iteration
        else:
            lam *= 10.0
            if lam > 1e15:
                raise CalibrationError("damped least squares diverged (damping overflow)")
    raise CalibrationError(f"no convergence after {max_iters} iterations")


def fit_coefficients_lm(
    samples: list[CalibrationSample],
    initial_guess: tuple[complex, complex] | None = None,
    tol: float = 1e-14,
    max_iters: int = 200,
    subcarrier_position: int | None = None,
) -> CalibrationProfile:
    """Iterative damped least-squares fit; agrees with fit_coefficients."""
    if tol <= 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    t, measured, freq, d = _design(samples)
    if initial_guess is None:
        initial_guess = (1.0 + 0.0j, 0.0 + 0.0j)
    g_l, g_m = complex(initial_guess[0]), complex(initial_guess[1])
    x0 = np.array([g_l.real, g_l.imag, g_m.real, g_m.imag])
    x, _ = _lm_solve(t, measured, x0, tol, max_iters)
    coeffs = np.array([x[0] + 1j * x[1], x[2] + 1j * x[3]])
    return _profile(coeffs, t, measured, freq, d, subcarrier_position)


def residuals(profile: CalibrationProfile, samples: list[CalibrationSample]) -> list[complex]:
    """measured_i - (coeff_los * T_i + coeff_multipath) for each sample."""
    out = []
    for s in samples:
        t = em.transmission_factor(em.wavenumbers(s.known, s.freq_hz), s.d_m)
        out.append(s.measured - (profile.coeff_los * t + profile.coeff_multipath))
    return out


def profile_to_json(profile: CalibrationProfile) -> str:
    doc = {
        "freq_hz": profile.freq_hz,
        "d_m": profile.d_m,
        "subcarrier_position": profile.subcarrier_position,
        "coeff_los": [profile.coeff_los.real, profile.coeff_los.imag],
        "coeff_multipath": [profile.coeff_multipath.real, profile.coeff_multipath.imag],
        "residual_rms": profile.residual_rms,
        "n_samples": profile.n_samples,
    }
    return json.dumps(doc, allow_nan=False)


def profile_from_json(text: str) -> CalibrationProfile:
    doc = json.loads(text)
    return CalibrationProfile(
        coeff_los=complex(doc["coeff_los"][0], doc["coeff_los"][1]),
        coeff_multipath=complex(doc["coeff_multipath"][0], doc["coeff_multipath"][1]),
        freq_hz=float(doc["freq_hz"]),
        d_m=float(doc["d_m"]),
        residual_rms=float(doc["residual_rms"]),
        n_samples=int(doc["n_samples"]),
        subcarrier_position=None
        if doc.get("subcarrier_position") is None
        else int(doc["subcarrier_position"]),
    )


def save_profile(profile: CalibrationProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(profile_to_json(profile))
        fh.write("\n")


def load_profile(path) -> CalibrationProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_json(fh.read())
