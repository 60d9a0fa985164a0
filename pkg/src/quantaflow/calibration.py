"""Real-camera conversions: CMOS gray level to photon count, and the
forward pixel model of a photon-counting camera with gain, quantum
efficiency, exposure time, dark current, and per-pixel response gain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DomainError, ShapeError

_STREAM_QIS_PHOTON = 11
_STREAM_QIS_NOISE = 12


@dataclass(frozen=True)
class CmosParams:
    gain_ratio: float = 1.0
    quantum_efficiency: float = 0.68

    def __post_init__(self):
        if self.gain_ratio <= 0:
            raise DomainError("gain ratio must be > 0")
        if not (0.0 < self.quantum_efficiency <= 1.0):
            raise DomainError("quantum efficiency must lie in (0, 1]")


def cmos_gray_to_photons(gray, p: CmosParams = CmosParams()):
    """Photons per pixel from a gray level: X = G * I / QE."""
    arr = np.asarray(gray, dtype=np.float64)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError("gray levels must be finite and >= 0")
    out = p.gain_ratio * arr / p.quantum_efficiency
    return float(out) if np.isscalar(gray) else out


@dataclass(frozen=True)
class QisParams:
    gain_ratio: float = 1.0
    quantum_efficiency: float = 0.68
    exposure_time: float = 74e-6       # seconds
    dark_signal: float = 0.0           # photons per exposure
    crf: np.ndarray | float = 1.0      # per-pixel response gain, > 0
    sigma_real_noise: float = 0.0
    adc_bits: int = 14
    clip_max: float = float(2 ** 14 - 1)

    def __post_init__(self):
        if self.gain_ratio <= 0 or self.exposure_time <= 0 or self.clip_max <= 0:
            raise DomainError("gain, exposure time and clip_max must be > 0")
        if not (0.0 < self.quantum_efficiency <= 1.0):
            raise DomainError("quantum efficiency must lie in (0, 1]")
        if self.dark_signal < 0 or self.sigma_real_noise < 0:
            raise DomainError("dark signal and noise sigma must be >= 0")
        if self.adc_bits < 1:
            raise DomainError("adc_bits must be >= 1")
        crf = self.crf
        if not np.isscalar(crf):
            crf = np.asarray(crf, dtype=np.float64)
            crf.setflags(write=False)
            object.__setattr__(self, "crf", crf)
        if np.any(np.asarray(crf) <= 0):
            raise DomainError("response gain entries must be > 0")


def qis_forward(photons: np.ndarray, p: QisParams, seed: int) -> np.ndarray:
    """Pixel values from a photon map.

    Per pixel: Poisson(ET * QE * (CRF * X + dark)), scaled by the gain,
    clipped, quantized (uniform over [0, clip_max], round half up), then
    Gaussian noise added last, matching the printed model order.
    """
    x = np.asarray(photons, dtype=np.float64)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("photon counts must be finite and >= 0")
    crf = p.crf
    if not np.isscalar(crf) and np.asarray(crf).shape != x.shape:
        raise ShapeError("response gain map shape must match the photon map")

    rate = p.exposure_time * p.quantum_efficiency * (crf * x + p.dark_signal)
    idx = np.arange(x.size, dtype=np.uint64)
    keys = rng.substream_keys(seed, idx, _STREAM_QIS_PHOTON)
    counts = rng.poissons(rate.ravel(), keys).astype(np.float64)
    v = np.clip(p.gain_ratio * counts, 0.0, p.clip_max)
    step = p.clip_max / (2 ** p.adc_bits - 1)
    quantized = np.floor(v / step + 0.5) * step
    if p.sigma_real_noise > 0:
        noise_keys = rng.substream_keys(seed, idx, _STREAM_QIS_NOISE)
        quantized += p.sigma_real_noise * rng.standard_normals(noise_keys)
    return quantized.reshape(x.shape)
