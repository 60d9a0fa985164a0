"""Numerical checks of the layer-bound inequality chain and the
exposure-continuity claim on randomized instances.

For atoms Lambda_1, Lambda_2 driving the same layer, the bound checked is

    ||Y_1 - Y_2||_2 <= ||phi||_2 * max_u ||x||_{2,N_u} * sqrt(|U|)
                       * ||Lambda_1 - Lambda_2||_2

with the neighborhood factor taken as the max over pixels, the weakest
uniform constant that still dominates the per-pixel chain. Bias is zeroed
inside all checks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DomainError
from .filters import (Coefficients, EaclConfig, FeatureMap, FilterAtoms,
                      ACTIVATIONS, eacl_preactivation)
from .ode import SolverConfig, integrate_atoms
from .sensor import BinaryFrame, NeighborhoodSpec, local_bit_density, neighborhood_ones

#: Absolute slack absorbing floating-point accumulation in inequality checks.
SLACK = 1e-9

#: Activations admissible in bound checks (non-expansive with unit constant).
BOUND_ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass(frozen=True)
class StageCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + SLACK


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    holds: bool
    slack: float
    instance_seed: int
    intermediate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "slack": self.slack,
            "instance_seed": self.instance_seed,
            "intermediate": {
                name: {"lhs": c.lhs, "rhs": c.rhs, "holds": c.holds}
                for name, c in self.intermediate.items()
            },
        }


def _neighborhood_sq_norms(inp: FeatureMap, k: int) -> np.ndarray:
    """Per-channel squared window norms: (c, h, w) sums of x^2 over the
    k x k neighborhood, zero-padded."""
    kernel = np.ones((k, k))
    return np.stack([
        ndimage.correlate(ch * ch, kernel, mode="constant", cval=0.0)
        for ch in inp.data
    ])


def verify_layer_bound(inp: FeatureMap, phi: Coefficients, atoms1: FilterAtoms,
                       atoms2: FilterAtoms, cfg: EaclConfig,
                       instance_seed: int = 0) -> BoundReport:
    """Evaluate both sides of the layer bound plus its two inner stages."""
    if cfg.activation not in BOUND_ACTIVATIONS:
        raise DomainError(
            f"bound checks need a unit-constant non-expansive activation, "
            f"got {cfg.activation!r}")
    act = ACTIVATIONS[cfg.activation]
    y1 = act(eacl_preactivation(inp, phi, atoms1))
    y2 = act(eacl_preactivation(inp, phi, atoms2))
    lhs = float(np.linalg.norm((y1 - y2).ravel()))

    k = atoms1.k
    sq = _neighborhood_sq_norms(inp, k)          # (c_in, h, w)
    nb_norm_all = np.sqrt(sq.sum(axis=0))        # across channels
    domain = inp.width * inp.height
    atom_dist = atoms1.distance(atoms2)
    rhs = phi.norm() * float(nb_norm_all.max()) * np.sqrt(domain) * atom_dist

    # Inner stages, on the same instance. B[i,j](u) is the difference of the
    # two atom responses at pixel u for input channel i and atom j.
    delta = atoms1.data - atoms2.data
    b = np.empty((phi.c_in, phi.m, inp.height, inp.width))
    for i in range(phi.c_in):
        for j in range(phi.m):
            r1 = ndimage.correlate(inp.data[i], atoms1.data[j], mode="constant")
            r2 = ndimage.correlate(inp.data[i], atoms2.data[j], mode="constant")
            b[i, j] = r1 - r2

    # Hoelder with p = q = 2: sum |phi_oij B_ij(u)| <= ||phi_o|| * ||B(u)||.
    holder_lhs = np.einsum("oij,ijhw->ohw", np.abs(phi.data), np.abs(b))
    phi_row_norms = np.linalg.norm(phi.data.reshape(phi.c_out, -1), axis=1)
    b_norms = np.sqrt(np.einsum("ijhw->hw", b * b))
    holder_rhs = phi_row_norms[:, None, None] * b_norms[None]
    hi = np.unravel_index(np.argmax(holder_lhs - holder_rhs), holder_lhs.shape)
    holder = StageCheck(float(holder_lhs[hi]), float(holder_rhs[hi]))

    # Cauchy-Schwarz: |<x_i, dLambda_j>_{N_u}| <= ||x_i||_{2,N_u} ||dLambda_j||.
    cs_lhs = np.empty_like(b)
    for i in range(phi.c_in):
        for j in range(phi.m):
            cs_lhs[i, j] = np.abs(
                ndimage.correlate(inp.data[i], delta[j], mode="constant"))
    atom_norms = np.linalg.norm(delta.reshape(phi.m, -1), axis=1)
    cs_rhs = np.sqrt(sq)[:, None] * atom_norms[None, :, None, None]
    ci = np.unravel_index(np.argmax(cs_lhs - cs_rhs), cs_lhs.shape)
    cauchy = StageCheck(float(cs_lhs[ci]), float(cs_rhs[ci]))

    holds = bool(lhs <= rhs + SLACK and holder.holds and cauchy.holds)
    return BoundReport(lhs=lhs, rhs=rhs, holds=holds, slack=rhs - lhs,
                       instance_seed=instance_seed,
                       intermediate={"holder": holder, "cauchy_schwarz": cauchy})


def _brute_window_sq_sum(bits: np.ndarray, nb: NeighborhoodSpec) -> np.ndarray:
    """Independent shift-and-add count of ones (= sum of squares) per window."""
    r = nb.radius
    mode = "constant" if nb.boundary == "zero-pad" else "edge"
    padded = np.pad(bits.astype(np.int64), r, mode=mode)
    h, w = bits.shape
    acc = np.zeros((h, w), dtype=np.int64)
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            acc += padded[dy:dy + h, dx:dx + w] ** 2
    return acc


def verify_density_identity(frame: BinaryFrame, nb: NeighborhoodSpec) -> bool:
    """Exact identity ||Y||^2_{2,N_u} = (ones in N_u) = |N_u| * mu_local."""
    counts = neighborhood_ones(frame, nb)
    brute = _brute_window_sq_sum(frame.to_array(), nb)
    if not np.array_equal(counts, brute):
        return False
    # mu = counts / |N_u| loses at most one ulp; |N_u| * mu recovers the
    # integer count exactly after rounding.
    scaled = local_bit_density(frame, nb).mu * nb.size
    if np.max(np.abs(scaled - counts)) > 1e-6:
        return False
    return bool(np.array_equal(np.rint(scaled).astype(np.int64), counts))


@dataclass(frozen=True)
class ContinuityReport:
    deltas: tuple
    output_distances: tuple   # D(delta)
    atom_distances: tuple     # A(delta)
    bound_constant: float
    bound_holds: tuple
    decreasing: bool

    @property
    def holds(self) -> bool:
        return self.decreasing and all(self.bound_holds)


def verify_exposure_continuity(field_, phi: Coefficients, inp: FeatureMap,
                               theta0: float, deltas, cfg: EaclConfig,
                               solver: SolverConfig = SolverConfig()) -> ContinuityReport:
    """Shrinking the exposure offset shrinks the layer-output change,
    and each offset respects the layer bound."""
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise DomainError("deltas must be positive and strictly decreasing")
    if cfg.activation not in BOUND_ACTIVATIONS:
        raise DomainError(f"continuity checks reject {cfg.activation!r}")
    act = ACTIVATIONS[cfg.activation]

    base_atoms = field_.lambda_init
    y_base = act(eacl_preactivation(inp, phi, base_atoms))
    sq = _neighborhood_sq_norms(inp, base_atoms.k)
    const = phi.norm() * float(np.sqrt(sq.sum(axis=0)).max()) * np.sqrt(inp.width * inp.height)

    d_vals, a_vals, ok = [], [], []
    for d in deltas:
        atoms_d = integrate_atoms(field_, theta0, theta0 + d, solver)
        y_d = act(eacl_preactivation(inp, phi, atoms_d))
        dist = float(np.linalg.norm((y_d - y_base).ravel()))
        a = base_atoms.distance(atoms_d)
        d_vals.append(dist)
        a_vals.append(a)
        ok.append(bool(dist <= const * a + SLACK))
    decreasing = all(b < a or (a == 0.0 and b == 0.0)
                     for a, b in zip(d_vals, d_vals[1:]))
    return ContinuityReport(tuple(deltas), tuple(d_vals), tuple(a_vals),
                            const, tuple(ok), decreasing)


def worker_count() -> int:
    """Parallelism cap from QF_THREADS; never affects results."""
    env = os.environ.get("QF_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_ordered(fn, items) -> list:
    """Apply fn across items, possibly in parallel, preserving input order."""
    n = worker_count()
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def random_layer_instance(seed: int, c: int = 4, m: int = 3, k: int = 3,
                          size: int = 16, activation: str = "relu"):
    """Seeded random (input, phi, atoms1, atoms2, cfg) tuple for bound checks."""
    gen = np.random.default_rng(seed)
    inp = FeatureMap.from_array(gen.uniform(0.0, 1.0, size=(c, size, size)))
    phi = Coefficients.from_array(gen.standard_normal((c, c, m)))
    atoms1 = FilterAtoms.from_array(gen.standard_normal((m, k, k)))
    atoms2 = FilterAtoms.from_array(atoms1.data + 0.1 * gen.standard_normal((m, k, k)))
    cfg = EaclConfig(bias=np.zeros(c), activation=activation)
    return inp, phi, atoms1, atoms2, cfg


def run_layer_bound_suite(instances: int, seed: int,
                          activation: str = "relu") -> list:
    """BoundReports for `instances` seeded random layer instances."""
    def one(i):
        s = seed + i
        inp, phi, a1, a2, cfg = random_layer_instance(s, activation=activation)
        return verify_layer_bound(inp, phi, a1, a2, cfg, instance_seed=s)
    return map_ordered(one, range(instances))
