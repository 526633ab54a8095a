"""Coefficient fitting: linear solve, damped iterative cross-check, persistence."""

import math

import numpy as np
import pytest

from csi_dielectric import (
    CalibrationError,
    CalibrationProfile,
    CalibrationSample,
    DielectricProperties,
    fit_coefficients,
    fit_coefficients_lm,
    load_profile,
    residuals,
    save_profile,
    transmission_factor,
    wavenumbers,
)
from csi_dielectric.calibration import _design, _lm_solve
from csi_dielectric.materials import ETHANOL_WATER

FREQ = 5.32e9
D = 0.002

TRUE_LOS = 0.041 - 0.027j
TRUE_MULTIPATH = 0.008 + 0.011j


def slab_t(props):
    return transmission_factor(wavenumbers(props, FREQ), D)


def synthetic_samples(noise=0.0, seed=0, coeff_los=TRUE_LOS, coeff_multipath=TRUE_MULTIPATH):
    rng = np.random.default_rng(seed)
    samples = []
    for props in ETHANOL_WATER.values():
        measured = coeff_los * slab_t(props) + coeff_multipath
        if noise > 0.0:
            scale = abs(measured) * noise
            measured += scale / math.sqrt(2) * complex(rng.normal(), rng.normal())
        samples.append(CalibrationSample(measured=measured, known=props, freq_hz=FREQ, d_m=D))
    return samples


class TestLinearFit:
    def test_recovers_constructed_coefficients(self):
        profile = fit_coefficients(synthetic_samples())
        assert abs(profile.coeff_los - TRUE_LOS) / abs(TRUE_LOS) < 1e-10
        assert abs(profile.coeff_multipath - TRUE_MULTIPATH) / abs(TRUE_MULTIPATH) < 1e-10
        assert profile.residual_rms < 1e-15
        assert profile.n_samples == 10

    def test_two_samples_interpolate_exactly(self):
        samples = synthetic_samples()[:2]
        profile = fit_coefficients(samples)
        assert profile.residual_rms < 1e-15
        assert all(abs(r) < 1e-15 for r in residuals(profile, samples))

    def test_identical_materials_rank_deficient(self):
        water = DielectricProperties(73.38, 6.41)
        measured = TRUE_LOS * slab_t(water) + TRUE_MULTIPATH
        samples = [
            CalibrationSample(measured=measured, known=water, freq_hz=FREQ, d_m=D)
            for _ in range(4)
        ]
        with pytest.raises(CalibrationError, match="rank-deficient"):
            fit_coefficients(samples)

    def test_single_sample_insufficient(self):
        with pytest.raises(CalibrationError, match="insufficient"):
            fit_coefficients(synthetic_samples()[:1])

    def test_mismatched_geometry_rejected(self):
        samples = synthetic_samples()[:3]
        bad = CalibrationSample(
            measured=samples[0].measured, known=samples[0].known, freq_hz=FREQ, d_m=0.003
        )
        with pytest.raises(CalibrationError, match="mismatched freq/d"):
            fit_coefficients(samples + [bad])

    def test_conditioning_warning_on_clustered_factors(self):
        # two nearly identical mild materials barely span the model
        a = DielectricProperties(5.00, 0.5)
        b = DielectricProperties(5.02, 0.5)
        samples = [
            CalibrationSample(TRUE_LOS * slab_t(m) + TRUE_MULTIPATH, m, FREQ, D) for m in (a, b)
        ]
        with pytest.warns(UserWarning, match="poorly conditioned"):
            fit_coefficients(samples)

    def test_residual_orthogonality(self):
        samples = synthetic_samples(noise=0.03, seed=5)
        profile = fit_coefficients(samples)
        r = np.array(residuals(profile, samples))
        t = np.array([slab_t(s.known) for s in samples])
        norm = np.linalg.norm([s.measured for s in samples])
        assert abs(np.sum(r * np.conj(t))) <= 1e-9 * norm
        assert abs(np.sum(r)) <= 1e-9 * norm

    def test_amplitude_scale_equivariance(self):
        samples = synthetic_samples(noise=0.02, seed=6)
        profile = fit_coefficients(samples)
        g = 3.5
        scaled = [
            CalibrationSample(g * s.measured, s.known, s.freq_hz, s.d_m) for s in samples
        ]
        profile_g = fit_coefficients(scaled)
        assert profile_g.coeff_los == pytest.approx(g * profile.coeff_los, rel=1e-12)
        assert profile_g.coeff_multipath == pytest.approx(g * profile.coeff_multipath, rel=1e-12)


class TestIterativeFit:
    def test_agrees_with_linear_on_clean_data(self):
        samples = synthetic_samples()
        lin = fit_coefficients(samples)
        lm = fit_coefficients_lm(samples)
        assert lm.coeff_los.real == pytest.approx(lin.coeff_los.real, abs=1e-8)
        assert lm.coeff_los.imag == pytest.approx(lin.coeff_los.imag, abs=1e-8)
        assert lm.coeff_multipath.real == pytest.approx(lin.coeff_multipath.real, abs=1e-8)
        assert lm.coeff_multipath.imag == pytest.approx(lin.coeff_multipath.imag, abs=1e-8)

    def test_agrees_on_noisy_data(self):
        # 30 dB SNR noise on the measurements
        samples = synthetic_samples(noise=10 ** (-30 / 20), seed=7)
        lin = fit_coefficients(samples)
        lm = fit_coefficients_lm(samples)
        for a, b in (
            (lm.coeff_los, lin.coeff_los),
            (lm.coeff_multipath, lin.coeff_multipath),
        ):
            assert a.real == pytest.approx(b.real, abs=1e-8)
            assert a.imag == pytest.approx(b.imag, abs=1e-8)
        assert lm.residual_rms == pytest.approx(lin.residual_rms, abs=1e-8)

    def test_exact_initial_guess_converges_immediately(self):
        samples = synthetic_samples()
        t, measured, _, _ = _design(samples)
        x0 = np.array([TRUE_LOS.real, TRUE_LOS.imag, TRUE_MULTIPATH.real, TRUE_MULTIPATH.imag])
        _, iterations = _lm_solve(t, measured, x0, tol=1e-12, max_iters=50)
        assert iterations <= 1

    def test_nonconvergence_raises(self):
        samples = synthetic_samples(noise=0.05, seed=8)
        with pytest.raises(CalibrationError, match="convergence"):
            fit_coefficients_lm(samples, initial_guess=(1e6 + 0j, -1e6j), max_iters=1)

    def test_randomized_solver_equivalence(self):
        rng = np.random.default_rng(9)
        for trial in range(25):
            c_l = complex(rng.normal(), rng.normal())
            if abs(c_l) < 0.1:
                c_l += 0.5
            c_m = 0.3 * complex(rng.normal(), rng.normal())
            noise = 0.0 if trial % 2 == 0 else 10 ** (-30 / 20)
            samples = synthetic_samples(
                noise=noise, seed=100 + trial, coeff_los=c_l, coeff_multipath=c_m
            )
            lin = fit_coefficients(samples)
            lm = fit_coefficients_lm(samples)
            for a, b in (
                (lm.coeff_los, lin.coeff_los),
                (lm.coeff_multipath, lin.coeff_multipath),
            ):
                assert a.real == pytest.approx(b.real, abs=1e-8)
                assert a.imag == pytest.approx(b.imag, abs=1e-8)


class TestResiduals:
    def test_exact_data_zero_residuals(self):
        samples = synthetic_samples()
        profile = fit_coefficients(samples)
        assert all(abs(r) < 1e-14 for r in residuals(profile, samples))

    def test_fault_injection_flags_one_sample(self):
        samples = synthetic_samples()
        corrupted = list(samples)
        bad = CalibrationSample(
            measured=samples[3].measured + 0.02 + 0.02j,
            known=samples[3].known,
            freq_hz=FREQ,
            d_m=D,
        )
        corrupted[3] = bad
        profile = fit_coefficients(samples)  # clean reference fit
        r = np.abs(residuals(profile, corrupted))
        assert np.argmax(r) == 3
        assert r[3] > 10 * np.delete(r, 3).max() + 1e-12

    def test_empty_sample_list(self):
        profile = fit_coefficients(synthetic_samples())
        assert residuals(profile, []) == []


class TestPersistence:
    def test_profile_json_roundtrip(self, tmp_path):
        profile = fit_coefficients(synthetic_samples(), subcarrier_position=16)
        path = tmp_path / "profile_sc16.json"
        save_profile(profile, path)
        again = load_profile(path)
        assert again == profile

    def test_profile_invariants(self):
        with pytest.raises(CalibrationError):
            CalibrationProfile(
                coeff_los=0j, coeff_multipath=0j, freq_hz=FREQ, d_m=D,
                residual_rms=0.0, n_samples=3,
            )
        with pytest.raises(CalibrationError):
            CalibrationProfile(
                coeff_los=1 + 0j, coeff_multipath=0j, freq_hz=FREQ, d_m=D,
                residual_rms=0.0, n_samples=1,
            )
