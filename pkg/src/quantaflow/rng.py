"""Counter-based random streams with one independent substream per pixel.

Every draw is a pure function of (seed, stream tag, pixel index, counter),
so sampling is reproducible bit-for-bit no matter how work is split across
threads. The mixer is the splitmix64 finalizer applied twice, vectorized
over uint64 numpy arrays.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_TAG_PRIME = np.uint64(0xD6E8FEB86659FD93)
_IDX_PRIME = np.uint64(0xC2B2AE3D27D4EB4F)
_ATTEMPT_PRIME = np.uint64(0xFF51AFD7ED558CCD)

# Marsaglia polar: acceptance probability pi/4, so 96 attempt pairs can
# only be exhausted with probability < 1e-64 per pixel.
_MAX_POLAR_ATTEMPTS = 96

# Poisson sampling switches from inversion-by-search to the clipped
# normal approximation above this mean.
_POISSON_SEARCH_LIMIT = 30.0


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer (Steele et al. output mix)
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _MUL1
    x ^= x >> np.uint64(27)
    x *= _MUL2
    x ^= x >> np.uint64(31)
    return x


def substream_keys(seed: int, indices: np.ndarray, tag: int) -> np.ndarray:
    """One uint64 key per pixel index for the given (seed, tag) stream."""
    mixed = (seed ^ (tag * int(_TAG_PRIME))) & 0xFFFFFFFFFFFFFFFF
    base = _mix64(np.asarray([mixed], dtype=np.uint64))[0]
    keys = np.asarray(indices, dtype=np.uint64) * _IDX_PRIME
    keys ^= base
    return _mix64(keys)


def _draw_u64(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    return _mix64(_mix64(keys + counters.astype(np.uint64) * _GOLDEN))


def uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniform floats in [0, 1), one per key, at the given counter positions."""
    bits = _draw_u64(keys, np.asarray(counters))
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def standard_normals(keys: np.ndarray) -> np.ndarray:
    """One standard normal per key via the Marsaglia polar method.

    Rejected pairs advance the per-pixel counter, so consumption is
    deterministic per key regardless of what other pixels do.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    out = np.empty(keys.shape, dtype=np.float64)
    pending = np.arange(keys.size, dtype=np.intp)
    flat_keys = keys.ravel()
    flat_out = out.ravel()
    for attempt in range(_MAX_POLAR_ATTEMPTS):
        k = flat_keys[pending]
        ctr = np.full(pending.shape, 2 * attempt, dtype=np.uint64)
        u1 = 2.0 * uniforms(k, ctr) - 1.0
        u2 = 2.0 * uniforms(k, ctr + np.uint64(1)) - 1.0
        s = u1 * u1 + u2 * u2
        ok = (s > 0.0) & (s < 1.0)
        if np.any(ok):
            accepted = pending[ok]
            ss = s[ok]
            flat_out[accepted] = u1[ok] * np.sqrt(-2.0 * np.log(ss) / ss)
            pending = pending[~ok]
        if pending.size == 0:
            return out
    raise RuntimeError("polar method failed to accept after maximum attempts")


def _poisson_search(theta: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Inversion by sequential search; one uniform per pixel. Needs theta < ~30."""
    u = uniforms(keys, np.zeros(keys.shape, dtype=np.uint64))
    p = np.exp(-theta)
    cum = p.copy()
    k = np.zeros(theta.shape, dtype=np.int64)
    active = u > cum
    step = np.int64(0)
    while np.any(active):
        step += 1
        p = np.where(active, p * theta / float(step), p)
        cum = np.where(active, cum + p, cum)
        k[active] += 1
        active &= u > cum
        if step > 4000:  # unreachable for theta below the search limit
            raise RuntimeError("poisson search did not terminate")
    return k


def _poisson_normal_approx(theta: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Rounded Gaussian approximation, rejecting negative draws."""
    out = np.full(theta.shape, -1, dtype=np.int64)
    pending = np.arange(theta.size, dtype=np.intp)
    flat_theta = theta.ravel()
    flat_keys = keys.ravel()
    flat_out = out.ravel()
    attempt = 1
    while pending.size:
        salt = np.uint64((attempt * int(_ATTEMPT_PRIME)) & 0xFFFFFFFFFFFFFFFF)
        sub = _mix64(flat_keys[pending] + salt)
        th = flat_theta[pending]
        z = standard_normals(sub)
        cand = np.rint(th + np.sqrt(th) * z)
        ok = cand >= 0
        flat_out[pending[ok]] = cand[ok].astype(np.int64)
        pending = pending[~ok]
        attempt += 1
    return out


def poissons(theta: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Poisson draws, one per pixel, from the per-pixel substreams."""
    theta = np.asarray(theta, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.uint64)
    small = theta < _POISSON_SEARCH_LIMIT
    k = np.zeros(theta.shape, dtype=np.int64)
    if np.any(small):
        k[small] = _poisson_search(theta[small], keys[small])
    if np.any(~small):
        k[~small] = _poisson_normal_approx(theta[~small], keys[~small])
    return k


def frame_seed(seed: int, frame_index: int) -> int:
    """Per-frame seed for burst sampling: independent yet reproducible."""
    return (seed ^ (frame_index << 32)) & 0xFFFFFFFFFFFFFFFF
