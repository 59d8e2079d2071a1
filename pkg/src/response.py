from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import directed_hausdorff

from errors import LatticeError, ModelError, ProfileError, SingularProbeError, StepSizeError, TrackingError
from model import LatticeModel
from realspace import BoundarySpec, RealSpaceOperator, build
from spectral import eigenvalues

logger = logging.getLogger(__name__)

SINGULAR_PROBE = 1e-10
RECIPROCITY_TOL = 1e-10
STEP_GUARD = 0.5
TRACKING_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Susceptibility:
    omega: complex
    chi: np.ndarray
    asymmetry: float


@dataclass(frozen=True)
class ReciprocityResult:
    reciprocal: bool
    max_asymmetry: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Normalized states on a fixed time grid.

    ``log_growth[k]`` is ln ||exp(-i H dt) psi(t_{k-1})|| before the k-th
    renormalization (0 for the initial state).
    """

    times: np.ndarray
    states: np.ndarray
    log_growth: np.ndarray
    densities: np.ndarray

    @property
    def total_log_growth(self) -> np.ndarray:
        return np.cumsum(self.log_growth)


@dataclass(frozen=True)
class SensorPoint:
    N: int
    delta_E: float


@dataclass(frozen=True)
class CrossoverPoint:
    epsilon: float
    spectral_distance: float
    max_imag: float


def _norm2(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2)) if matrix.size else 0.0


def susceptibility(op: RealSpaceOperator, omega: complex) -> Susceptibility:
    """chi(omega) = -i (omega - H)^-1 from an LU factorization."""
    H = op.matrix
    shifted = omega * np.eye(len(H)) - H
    smallest = scipy.linalg.svdvals(shifted).min()
    if smallest <= SINGULAR_PROBE * max(_norm2(H), 1.0):
        raise SingularProbeError(f"omega={omega} is an eigenvalue of H (smallest singular value {smallest:.3g})")
    lu = scipy.linalg.lu_factor(shifted)
    chi = -1j * scipy.linalg.lu_solve(lu, np.eye(len(H), dtype=complex))
    magnitude = np.abs(chi)
    return Susceptibility(complex(omega), chi, float(np.abs(magnitude - magnitude.T).max()))


def reciprocity_test(op: RealSpaceOperator, omegas: Sequence[complex], tol: float = RECIPROCITY_TOL) -> ReciprocityResult:
    worst = max(susceptibility(op, omega).asymmetry for omega in omegas)
    return ReciprocityResult(worst < tol, worst)


def amplification_ratio(op: RealSpaceOperator, omega: complex) -> float:
    """ln(|chi_{N,1}| / |chi_{1,N}|): end-to-end gain from the first site to the last over the reverse."""
    chi = susceptibility(op, omega).chi
    return float(np.log(np.abs(chi[-1, 0])) - np.log(np.abs(chi[0, -1])))


def time_evolve(op: RealSpaceOperator, psi0: np.ndarray, t_max: float, dt: float) -> Trajectory:
    H = op.matrix
    if dt <= 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    if dt * _norm2(H) >= STEP_GUARD:
        raise StepSizeError(f"dt*||H|| = {dt * _norm2(H):.3g} exceeds {STEP_GUARD}; reduce dt")
    psi = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ProfileError("initial state is zero")
    psi = psi / norm

    steps = int(round(t_max / dt))
    propagator = scipy.linalg.expm(-1j * dt * H)
    states = np.empty((steps + 1, len(psi)), dtype=complex)
    log_growth = np.zeros(steps + 1)
    states[0] = psi
    for k in range(1, steps + 1):
        psi = propagator @ psi
        growth = np.linalg.norm(psi)
        psi = psi / growth
        states[k] = psi
        log_growth[k] = np.log(growth)

    densities = (np.abs(states) ** 2).reshape(steps + 1, op.n_cells, op.bands).sum(axis=2)
    logger.info("Evolved %d steps of dt=%g; total log growth %.4g.", steps, dt, log_growth.sum())
    return Trajectory(dt * np.arange(steps + 1), states, log_growth, densities)


def funnel_model(J_L: float, J_R: float, N_half: int, interface: complex | None = None) -> RealSpaceOperator:
    """Two open Hatano-Nelson chains with swapped hoppings joined at the middle.

    The left half carries (J_L, J_R), the right half (J_R, J_L); the interface
    bond defaults to (J_L + J_R) / 2 in both directions.
    """
    if abs(J_L) == abs(J_R):
        raise LatticeError("funneling needs |J_L| != |J_R|")
    if N_half < 5:
        raise LatticeError(f"N_half must be >= 5, got {N_half}")
    size = 2 * N_half
    matrix = np.zeros((size, size), dtype=complex)
    for n in range(size - 1):
        if n < N_half - 1:
            matrix[n, n + 1], matrix[n + 1, n] = J_L, J_R
        elif n > N_half - 1:
            matrix[n, n + 1], matrix[n + 1, n] = J_R, J_L
    bond = 0.5 * (J_L + J_R) if interface is None else interface
    matrix[N_half - 1, N_half] = matrix[N_half, N_half - 1] = bond
    return RealSpaceOperator(matrix, (size,), 1, BoundarySpec.obc())


def _check_1d(model: LatticeModel) -> None:
    if model.dimension != 1:
        raise ModelError("boundary sweeps are defined for 1D models")


def sensor_sweep(
    model: LatticeModel,
    epsilon: complex,
    N_list: Sequence[int],
    reference: complex = 0j,
) -> List[SensorPoint]:
    """Shift of the OBC eigenvalue nearest ``reference`` when the ends are coupled by epsilon."""
    _check_1d(model)
    points = []
    for N in N_list:
        open_values = eigenvalues(build(model, N, BoundarySpec.obc()))
        nearest = np.argsort(np.abs(open_values - reference), kind="stable")
        target = open_values[nearest[0]]
        if len(nearest) > 1 and abs(open_values[nearest[1]] - target) < TRACKING_TOL:
            raise TrackingError(
                f"N={N}: eigenvalues {target:.6g} and {open_values[nearest[1]]:.6g} are too close to track")
        coupled = eigenvalues(build(model, N, BoundarySpec.coupled(epsilon)))
        moved = coupled[np.argmin(np.abs(coupled - target))]
        points.append(SensorPoint(int(N), float(abs(moved - target))))
    logger.info("Sensor sweep at epsilon=%g over N=%s done.", abs(epsilon), list(N_list))
    return points


def sensor_slope(points: Sequence[SensorPoint]) -> float:
    """Least-squares slope of ln(delta_E) against N."""
    N = np.array([p.N for p in points], dtype=float)
    shifts = np.array([p.delta_E for p in points])
    return float(np.polyfit(N, np.log(shifts), 1)[0])


def spectral_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two spectra in the complex plane."""
    pa = np.column_stack([np.real(a), np.imag(a)])
    pb = np.column_stack([np.real(b), np.imag(b)])
    return float(max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0]))


def boundary_crossover(model: LatticeModel, N: int, epsilons: Sequence[float]) -> List[CrossoverPoint]:
    _check_1d(model)
    reference = eigenvalues(build(model, N, BoundarySpec.obc()))
    points = []
    for epsilon in epsilons:
        spectrum = eigenvalues(build(model, N, BoundarySpec.coupled(epsilon)))
        points.append(CrossoverPoint(float(epsilon), spectral_distance(spectrum, reference),
                                     float(np.abs(spectrum.imag).max())))
    return points


def crossover_epsilon(points: Sequence[CrossoverPoint]) -> float:
    """Smallest epsilon where the distance reaches half its value at the largest epsilon (log-interpolated).

    Samples with epsilon <= 0 have no place on the log axis and are skipped.
    """
    ordered = sorted((p for p in points if p.epsilon > 0), key=lambda p: p.epsilon)
    if not ordered:
        raise ValueError("crossover needs at least one sample with epsilon > 0")
    half = 0.5 * ordered[-1].spectral_distance
    for before, after in zip(ordered, ordered[1:]):
        if after.spectral_distance >= half:
            if before.spectral_distance >= half:
                return before.epsilon
            span = after.spectral_distance - before.spectral_distance
            fraction = (half - before.spectral_distance) / span
            return float(np.exp(np.log(before.epsilon) + fraction * (np.log(after.epsilon) - np.log(before.epsilon))))
    return ordered[-1].epsilon
