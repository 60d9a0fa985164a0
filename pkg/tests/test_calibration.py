import numpy as np
import pytest

from quantaflow import (CmosParams, DomainError, QisParams,
                        cmos_gray_to_photons, qis_forward)


class TestCmos:
    def test_zero(self):
        assert cmos_gray_to_photons(0.0) == 0.0

    def test_datasheet_values(self):
        p = CmosParams(gain_ratio=1.0, quantum_efficiency=0.68)
        assert cmos_gray_to_photons(68.0, p) == pytest.approx(100.0, abs=1e-12)
        assert cmos_gray_to_photons(100.0, p) == pytest.approx(100.0 / 0.68, abs=1e-10)

    def test_linear_and_round_trip(self):
        p = CmosParams(gain_ratio=2.0, quantum_efficiency=0.5)
        x = np.array([0.0, 1.0, 10.0, 250.0])
        photons = cmos_gray_to_photons(x, p)
        assert np.allclose(photons, 2.0 * x / 0.5)
        # I = QE * X / G inverts exactly
        gray = p.quantum_efficiency * photons / p.gain_ratio
        assert np.allclose(cmos_gray_to_photons(gray, p), photons, rtol=0, atol=0)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            cmos_gray_to_photons(-1.0)

    def test_bad_params(self):
        with pytest.raises(DomainError):
            CmosParams(gain_ratio=0.0)
        with pytest.raises(DomainError):
            CmosParams(quantum_efficiency=1.2)


class TestQisForward:
    def test_dark_and_noise_free_zero_input(self):
        p = QisParams(exposure_time=1.0, dark_signal=0.0, sigma_real_noise=0.0)
        out = qis_forward(np.zeros((8, 8)), p, seed=1)
        assert np.all(out == 0.0)

    def test_poisson_mean(self):
        # ET * QE * X = 4; unit ADC step preserves the counts exactly
        p = QisParams(gain_ratio=1.0, quantum_efficiency=0.5, exposure_time=1.0,
                      adc_bits=14, clip_max=float(2 ** 14 - 1))
        n = 200_000
        x = np.full(n, 8.0)
        out = qis_forward(x, p, seed=2)
        assert abs(out.mean() - 4.0) < 4 * np.sqrt(4.0 / n)

    def test_crf_gain_halves_needed_photons(self):
        p1 = QisParams(quantum_efficiency=1.0, exposure_time=1.0, crf=1.0)
        p2 = QisParams(quantum_efficiency=1.0, exposure_time=1.0, crf=2.0)
        n = 100_000
        m1 = qis_forward(np.full(n, 8.0), p1, seed=3).mean()
        m2 = qis_forward(np.full(n, 4.0), p2, seed=3).mean()
        assert abs(m1 - m2) < 4 * np.sqrt(2 * 8.0 / n)

    def test_clipping_saturates(self):
        p = QisParams(quantum_efficiency=1.0, exposure_time=1.0,
                      adc_bits=4, clip_max=15.0, sigma_real_noise=0.0)
        out = qis_forward(np.full(10_000, 100.0), p, seed=4)
        assert out.max() <= 15.0
        assert out.min() >= 0.0

    def test_noise_added_after_quantization(self):
        p0 = QisParams(quantum_efficiency=1.0, exposure_time=1.0,
                       sigma_real_noise=0.0)
        p1 = QisParams(quantum_efficiency=1.0, exposure_time=1.0,
                       sigma_real_noise=0.5)
        x = np.full(1000, 5.0)
        quiet = qis_forward(x, p0, seed=5)
        noisy = qis_forward(x, p1, seed=5)
        # same photon substream, so the difference is pure Gaussian noise
        diff = noisy - quiet
        assert not np.all(diff == 0.0)
        assert abs(diff.mean()) < 0.1

    def test_deterministic(self):
        p = QisParams(exposure_time=1.0)
        x = np.random.default_rng(0).uniform(0, 50, size=(32, 32))
        assert np.array_equal(qis_forward(x, p, seed=9), qis_forward(x, p, seed=9))

    def test_dark_signal_floor(self):
        p = QisParams(quantum_efficiency=1.0, exposure_time=1.0,
                      dark_signal=4.0, sigma_real_noise=0.0)
        n = 100_000
        out = qis_forward(np.zeros(n), p, seed=6)
        assert abs(out.mean() - 4.0) < 4 * np.sqrt(4.0 / n)

    def test_shape_mismatch_crf(self):
        p = QisParams(crf=np.ones((2, 2)))
        with pytest.raises(Exception):
            qis_forward(np.zeros((3, 3)), p, seed=0)

    def test_bad_params(self):
        with pytest.raises(DomainError):
            QisParams(exposure_time=0.0)
        with pytest.raises(DomainError):
            QisParams(crf=np.array([[1.0, -1.0]]))
