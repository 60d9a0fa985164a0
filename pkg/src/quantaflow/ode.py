"""Filter-atom evolution along the continuous exposure variable.

The vector field is a 6-stage network over the flattened atom state
(normalize per atom -> tanh -> linear mix augmented with the scalar
exposure); integration uses fixed-step RK4 or adaptive Dormand-Prince 4(5).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IntegrationError, ShapeError
from .filters import Coefficients, FilterAtoms, compose_filters

STAGE_COUNT = 6
_NORM_EPS = 1e-5


@dataclass(frozen=True)
class SolverConfig:
    method: str = "dopri45"  # or "rk4-fixed"
    rtol: float = 1e-3
    atol: float = 1e-3
    fixed_steps: int = 64
    max_steps: int = 10000

    def __post_init__(self):
        if self.method not in ("dopri45", "rk4-fixed"):
            raise DomainError(f"unknown solver method {self.method!r}")
        if self.rtol <= 0 or self.atol <= 0:
            raise DomainError("tolerances must be > 0")
        if self.fixed_steps < 1 or self.max_steps < 1:
            raise DomainError("step counts must be >= 1")


@dataclass(frozen=True)
class AtomVectorField:
    """dLambda/dtheta as a stack of normalize -> tanh -> linear stages.

    Each stage weight has shape (n, n+1) with n = m*k*k; the extra column
    multiplies the scalar exposure input.
    """

    stage_weights: tuple  # STAGE_COUNT arrays of shape (n, n+1)
    lambda_init: FilterAtoms

    def __post_init__(self):
        n = self.lambda_init.m * self.lambda_init.k ** 2
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.stage_weights)
        if len(ws) != STAGE_COUNT:
            raise ShapeError(f"expected {STAGE_COUNT} stages, got {len(ws)}")
        for w in ws:
            if w.shape != (n, n + 1):
                raise ShapeError(f"stage weight shape {w.shape} != ({n}, {n + 1})")
            if not np.all(np.isfinite(w)):
                raise DomainError("stage weights must be finite")
        object.__setattr__(self, "stage_weights", ws)

    @property
    def m(self):
        return self.lambda_init.m

    @property
    def k(self):
        return self.lambda_init.k

    @classmethod
    def seeded(cls, m: int, k: int, seed: int,
               init_scale: float = 1.0) -> "AtomVectorField":
        """Deterministic random field: uniform(-s, s) with s = 1/sqrt(fan_in)."""
        gen = np.random.default_rng(seed)
        n = m * k * k
        s = 1.0 / np.sqrt(n + 1)
        weights = tuple(gen.uniform(-s, s, size=(n, n + 1)) for _ in range(STAGE_COUNT))
        init = FilterAtoms(m, k, init_scale * gen.standard_normal((m, k, k)))
        return cls(weights, init)

    @classmethod
    def zero(cls, m: int, k: int, lambda_init: FilterAtoms | None = None) -> "AtomVectorField":
        n = m * k * k
        init = lambda_init or FilterAtoms(m, k, np.zeros((m, k, k)))
        return cls(tuple(np.zeros((n, n + 1)) for _ in range(STAGE_COUNT)), init)

    def derivative(self, theta_tilde: float, state: np.ndarray) -> np.ndarray:
        """Evaluate the field at (theta_tilde, state); state is (m, k, k)."""
        x = np.asarray(state, dtype=np.float64)
        if x.shape != self.lambda_init.data.shape:
            raise ShapeError(f"state shape {x.shape} != {self.lambda_init.data.shape}")
        for w in self.stage_weights:
            atoms = x.reshape(self.m, -1)
            centered = atoms - atoms.mean(axis=1, keepdims=True)
            # Zero-variance atoms stay at zero mean; epsilon keeps the
            # division finite without inflating them.
            scale = np.sqrt(atoms.var(axis=1, keepdims=True) + _NORM_EPS)
            x = np.tanh(centered / scale).ravel()
            x = w @ np.concatenate([x, [theta_tilde]])
        return x.reshape(self.lambda_init.data.shape)


def eval_field(field_: AtomVectorField, theta_tilde: float,
               state: FilterAtoms) -> FilterAtoms:
    """dLambda/dtheta at the given exposure and atom state."""
    out = field_.derivative(float(theta_tilde), state.data)
    return FilterAtoms(state.m, state.k, out)


@dataclass(frozen=True)
class ConstantField:
    """Test/reference field whose derivative is a fixed tensor."""

    value: np.ndarray
    lambda_init: FilterAtoms

    def derivative(self, theta_tilde, state):
        return np.asarray(self.value, dtype=np.float64)


def _rk4_fixed(rhs, t0: float, t1: float, y0: np.ndarray, steps: int) -> np.ndarray:
    h = (t1 - t0) / steps
    y = y0
    for i in range(steps):
        t = t0 + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y

# Dormand-Prince 4(5) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])

_SAFETY = 0.9
_FACTOR_MIN = 0.2
_FACTOR_MAX = 5.0


def _dopri45(rhs, t0: float, t1: float, y0: np.ndarray, rtol: float,
             atol: float, max_steps: int) -> np.ndarray:
    span = t1 - t0
    if span == 0.0:
        return y0.copy()
    direction = 1.0 if span > 0 else -1.0
    h = span / 100.0
    t, y = t0, y0.copy()
    for _ in range(max_steps):
        if direction * (t1 - t) <= 0:
            return y
        if direction * (t + h - t1) > 0:
            h = t1 - t
        k = [rhs(t, y)]
        for i in range(1, 7):
            yi = y + h * sum(a * kk for a, kk in zip(_DP_A[i], k))
            k.append(rhs(t + _DP_C[i] * h, yi))
        y5 = y + h * sum(b * kk for b, kk in zip(_DP_B5, k))
        y4 = y + h * sum(b * kk for b, kk in zip(_DP_B4, k))
        err = y5 - y4
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if norm <= 1.0:
            t = t + h
            y = y5
            factor = _FACTOR_MAX if norm == 0.0 else _SAFETY * norm ** -0.2
        else:
            factor = _SAFETY * norm ** -0.2
        h *= min(max(factor, _FACTOR_MIN), _FACTOR_MAX)
        if direction * (t1 - t) <= 0:
            return y
    raise IntegrationError("adaptive step cap exceeded", last_theta=t)


def integrate_atoms(field_, theta_in: float, theta_target: float,
                    solver: SolverConfig = SolverConfig()) -> FilterAtoms:
    """Atoms at theta_target: initial state lambda_init at theta_in,
    integrated along the field (backward when target < input)."""
    for name, v in (("theta_in", theta_in), ("theta_target", theta_target)):
        if not (0.0 < v < 1.0):
            raise DomainError(f"{name} must lie in (0, 1), got {v}")
    init = field_.lambda_init
    shape = init.data.shape
    rhs = lambda t, y: field_.derivative(t, y.reshape(shape)).ravel()
    y0 = init.data.ravel().copy()
    if theta_in == theta_target:
        out = y0
    elif solver.method == "rk4-fixed":
        out = _rk4_fixed(rhs, theta_in, theta_target, y0, solver.fixed_steps)
    else:
        out = _dopri45(rhs, theta_in, theta_target, y0, solver.rtol,
                       solver.atol, solver.max_steps)
    return FilterAtoms(init.m, init.k, out.reshape(shape))


def atoms_for_pair(field_, theta_in: float, theta_target: float,
                   phi: Coefficients,
                   solver: SolverConfig = SolverConfig()) -> np.ndarray:
    """Composed (c_out, c_in, k, k) filters for an exposure pair."""
    return compose_filters(phi, integrate_atoms(field_, theta_in, theta_target, solver))


@dataclass(frozen=True)
class LipschitzEstimate:
    epsilon: float
    argmax_pair: tuple  # (theta_1, theta_2)


def estimate_lipschitz(field_, theta0: float, samples: int,
                       delta_grid, solver: SolverConfig = SolverConfig()) -> LipschitzEstimate:
    """Empirical continuity constant of the atom flow started at theta0.

    For each base point and offset delta, both endpoints are integrated
    from theta0 and the ratio ||Lambda_1 - Lambda_2|| / |delta| recorded.
    """
    if samples < 2:
        raise DomainError("need at least 2 sample points")
    deltas = [float(d) for d in delta_grid]
    if any(d <= 0 for d in deltas):
        raise DomainError("delta grid entries must be > 0")
    bases = np.linspace(0.02, 0.98, samples)
    cache = {}

    def atoms_at(t):
        t = round(float(t), 15)
        if t not in cache:
            cache[t] = integrate_atoms(field_, theta0, t, solver).data
        return cache[t]

    best = 0.0
    best_pair = (bases[0], bases[0])
    for t1 in bases:
        for d in deltas:
            t2 = t1 + d
            if not (0.0 < t2 < 1.0):
                continue
            dist = float(np.linalg.norm((atoms_at(t1) - atoms_at(t2)).ravel()))
            ratio = dist / d
            if ratio > best:
                best = ratio
                best_pair = (float(t1), float(t2))
    return LipschitzEstimate(best, best_pair)
