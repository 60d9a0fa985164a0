"""1-bit sensor forward model: Poisson arrivals, Gaussian read noise,
threshold ADC, bit-density statistics, and exposure inversion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq

from . import rng
from .errors import DomainError, ShapeError, UnidentifiableError

_STREAM_PHOTON = 1
_STREAM_READ = 2

# Exposure cap for bracketing during inversion; far above anything a
# bit density below 1 can demand in this application.
THETA_CAP = 64.0


@dataclass(frozen=True)
class ExposureMap:
    """Per-pixel expected photon count per exposure period."""

    width: int
    height: int
    theta: np.ndarray  # (height, width) float64

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=np.float64)
        if t.shape != (self.height, self.width):
            raise ShapeError(f"theta shape {t.shape} != ({self.height}, {self.width})")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise DomainError("exposure values must be finite and >= 0")
        object.__setattr__(self, "theta", t)
        t.setflags(write=False)

    @classmethod
    def constant(cls, width: int, height: int, value: float) -> "ExposureMap":
        return cls(width, height, np.full((height, width), value, dtype=np.float64))

    def scaled(self, factor: float) -> "ExposureMap":
        return ExposureMap(self.width, self.height, self.theta * factor)


@dataclass(frozen=True)
class SensorConfig:
    q: float = 0.5
    sigma_r: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.q) and self.q > 0):
            raise DomainError("ADC threshold q must be finite and > 0")
        if not (math.isfinite(self.sigma_r) and self.sigma_r >= 0):
            raise DomainError("read-noise sigma_r must be finite and >= 0")


@dataclass(frozen=True)
class BinaryFrame:
    """Bit-packed 1-bit frame, MSB-first within each byte, rows byte-aligned."""

    width: int
    height: int
    bits: np.ndarray = field(repr=False)  # (height, ceil(width/8)) uint8

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8)
        row_bytes = (self.width + 7) // 8
        if b.shape != (self.height, row_bytes):
            raise ShapeError(f"packed shape {b.shape} != ({self.height}, {row_bytes})")
        pad = 8 * row_bytes - self.width
        if pad and np.any(np.unpackbits(b, axis=1)[:, self.width:]):
            raise DomainError("padding bits must be zero")
        object.__setattr__(self, "bits", b)
        b.setflags(write=False)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryFrame":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ShapeError("bit array must be 2-D")
        h, w = arr.shape
        return cls(w, h, np.packbits(arr.astype(bool), axis=1))

    def to_array(self) -> np.ndarray:
        """Unpacked (height, width) uint8 array of 0/1."""
        return np.unpackbits(self.bits, axis=1, count=self.width)


@dataclass(frozen=True)
class DensityMap:
    width: int
    height: int
    mu: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mu, dtype=np.float64)
        if m.shape != (self.height, self.width):
            raise ShapeError(f"mu shape {m.shape} != ({self.height}, {self.width})")
        if np.any(m < 0) or np.any(m > 1):
            raise DomainError("densities must lie in [0, 1]")
        object.__setattr__(self, "mu", m)
        m.setflags(write=False)


@dataclass(frozen=True)
class NeighborhoodSpec:
    """(2r+1) x (2r+1) window centered on each pixel."""

    radius: int = 1
    boundary: str = "zero-pad"  # or "clamp"

    def __post_init__(self):
        if self.radius < 0:
            raise DomainError("radius must be >= 0")
        if self.boundary not in ("zero-pad", "clamp"):
            raise DomainError(f"unknown boundary rule {self.boundary!r}")

    @property
    def size(self) -> int:
        return (2 * self.radius + 1) ** 2


def _phi(z: float) -> float:
    # Standard normal CDF via the error function:
    #   Phi(z) = (1 + erf(z / sqrt(2))) / 2
    # math.erf is correctly rounded to double precision, well inside the
    # 1e-9 absolute error budget.
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _series_kmax(theta: float) -> int:
    # Chernoff-style tail margin: mass beyond theta + 12*sqrt(theta) + 12
    # is far below 1e-12.
    return max(30, math.ceil(theta + 12.0 * math.sqrt(theta) + 12.0))


def bit_probability(theta: float, q: float, sigma_r: float) -> float:
    """P(Y = 1) for a pixel with quanta exposure theta.

    Sums exp(-theta) theta^k / k! * Phi((k - q) / sigma_r) over k. With
    sigma_r = 0 the CDF factor degenerates to a unit step (ties at k = q
    fire), so the sum is the upper Poisson tail from ceil(q).
    """
    if not (math.isfinite(theta) and theta >= 0):
        raise DomainError("theta must be finite and >= 0")
    if not (math.isfinite(q) and q > 0):
        raise DomainError("q must be finite and > 0")
    if not (math.isfinite(sigma_r) and sigma_r >= 0):
        raise DomainError("sigma_r must be finite and >= 0")

    kmax = _series_kmax(theta)
    if sigma_r == 0.0:
        k0 = math.ceil(q)
        if theta == 0.0:
            return 0.0 if k0 > 0 else 1.0
        # 1 - P(Poisson(theta) < k0), summed upward for accuracy
        pmf = math.exp(-theta)
        cdf = pmf
        for k in range(1, k0):
            pmf *= theta / k
            cdf += pmf
        return min(max(1.0 - cdf, 0.0), 1.0)

    pmf = math.exp(-theta)
    total = pmf * _phi((0 - q) / sigma_r)
    for k in range(1, kmax + 1):
        pmf *= theta / k
        total += pmf * _phi((k - q) / sigma_r)
    return min(max(total, 0.0), 1.0)


def noise_floor(q: float, sigma_r: float) -> float:
    """Bit probability at zero exposure (read noise alone)."""
    return bit_probability(0.0, q, sigma_r)


def sample_frame(emap: ExposureMap, cfg: SensorConfig) -> BinaryFrame:
    """Draw one binary frame: per pixel, 1 iff Poisson(theta) + noise >= q.

    Deterministic given (emap, cfg.seed): every pixel owns a counter-based
    substream, so results do not depend on execution order.
    """
    theta = emap.theta.ravel()
    idx = np.arange(theta.size, dtype=np.uint64)
    photon_keys = rng.substream_keys(cfg.seed, idx, _STREAM_PHOTON)
    x = rng.poissons(theta, photon_keys).astype(np.float64)
    if cfg.sigma_r > 0:
        read_keys = rng.substream_keys(cfg.seed, idx, _STREAM_READ)
        x += cfg.sigma_r * rng.standard_normals(read_keys)
    bits = (x >= cfg.q).reshape(emap.height, emap.width)
    return BinaryFrame.from_array(bits)


def mean_bit_density(frame: BinaryFrame) -> float:
    """Fraction of 1-bits over the whole frame."""
    return int(frame.to_array().sum()) / (frame.width * frame.height)


def neighborhood_ones(frame: BinaryFrame, nb: NeighborhoodSpec) -> np.ndarray:
    """Integer count of 1-bits in each pixel's neighborhood (exact)."""
    arr = frame.to_array().astype(np.int64)
    size = 2 * nb.radius + 1
    mode = "constant" if nb.boundary == "zero-pad" else "nearest"
    return ndimage.correlate(arr, np.ones((size, size), dtype=np.int64), mode=mode)


def neighborhood_l2_norm(frame: BinaryFrame, nb: NeighborhoodSpec) -> np.ndarray:
    """Per-pixel L2 norm over the neighborhood; squares to the ones count."""
    return np.sqrt(neighborhood_ones(frame, nb).astype(np.float64))


def local_bit_density(frame: BinaryFrame, nb: NeighborhoodSpec) -> DensityMap:
    """Fraction of ones in each pixel's (2r+1)^2 neighborhood."""
    counts = neighborhood_ones(frame, nb)
    return DensityMap(frame.width, frame.height, counts / nb.size)


@lru_cache(maxsize=64)
def _monotone_in_theta(q: float, sigma_r: float) -> bool:
    grid = np.concatenate([[0.0], np.geomspace(1e-3, THETA_CAP, 60)])
    vals = [bit_probability(t, q, sigma_r) for t in grid]
    return all(b > a for a, b in zip(vals, vals[1:]))


def invert_bit_density(mu: float, q: float, sigma_r: float) -> float:
    """Exposure theta-hat with bit_probability(theta-hat) = mu.

    Closed form -ln(1 - mu) when sigma_r = 0 and q in (0, 1]; otherwise
    bracketed root finding over [0, THETA_CAP]. Monotonicity of the
    forward map is spot-checked once per (q, sigma_r); the root finder
    brackets globally either way, so a failed check only voids uniqueness.
    """
    if not (0.0 < mu < 1.0):
        raise DomainError("mu must lie strictly inside (0, 1); 0 and 1 are saturated")
    floor = noise_floor(q, sigma_r)
    if mu <= floor:
        raise UnidentifiableError(
            f"bit density {mu} at or below the read-noise floor {floor}"
        )
    if sigma_r == 0.0 and 0.0 < q <= 1.0:
        return -math.log(1.0 - mu)

    _monotone_in_theta(q, sigma_r)
    f = lambda t: bit_probability(t, q, sigma_r) - mu
    hi = THETA_CAP
    if f(hi) < 0:
        raise DomainError(f"bit density {mu} requires exposure above cap {THETA_CAP}")
    return brentq(f, 0.0, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
