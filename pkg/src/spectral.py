from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist

from errors import SpectralError
from realspace import RealSpaceOperator, auto_gauge, imaginary_gauge

logger = logging.getLogger(__name__)

TOL_BIORTH = 1e-8
KAPPA_LIMIT = 1.0 / np.sqrt(np.finfo(float).eps)
# Biorthogonal overlaps smaller than this are left unnormalized (defective pair).
_OVERLAP_FLOOR = 1e-14

Gauge = Union[str, Sequence[float], None]


@dataclass(frozen=True, eq=False)
class BiorthogonalSystem:
    """Matched eigen-triples of a real-space operator.

    Column i of ``right`` and ``left`` belongs to ``eigenvalues[i]``; right
    vectors have unit norm with their largest component real-positive and
    ``vdot(left[:, i], right[:, i]) == 1`` unless the pair is defective.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: float
    min_pair_gap: float
    ep_flag: bool
    biorth_error: float
    gauge: Tuple[float, ...] | None = None

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def kappa_per_state(self) -> np.ndarray:
        overlaps = np.abs(np.einsum("ij,ij->j", self.left.conj(), self.right))
        norms = np.linalg.norm(self.left, axis=0) * np.linalg.norm(self.right, axis=0)
        with np.errstate(divide="ignore"):
            return np.where(overlaps > 0, norms / np.where(overlaps > 0, overlaps, 1.0), np.inf)

    def pair(self, i: int) -> Tuple[complex, np.ndarray, np.ndarray]:
        """(E_i, L_i, R_i)"""
        return complex(self.eigenvalues[i]), self.left[:, i], self.right[:, i]

    def nearest(self, energy: complex) -> int:
        return int(np.argmin(np.abs(self.eigenvalues - energy)))


@dataclass(frozen=True)
class EPDiagnostic:
    kappa_V: float
    min_pair_gap: float
    defect_estimate: int


def _sort_order(values: np.ndarray) -> np.ndarray:
    # ascending real part, ties by imaginary part
    return np.lexsort((np.round(values.imag, 10), np.round(values.real, 10)))


def _pair_gap(values: np.ndarray) -> float:
    if len(values) < 2:
        return float("inf")
    return float(pdist(np.column_stack([values.real, values.imag])).min())


def _working_matrix(op: RealSpaceOperator, gauge: Gauge) -> Tuple[np.ndarray, np.ndarray | None, Tuple[float, ...] | None]:
    if not np.all(np.isfinite(op.matrix)):
        raise SpectralError("operator has non-finite entries")
    radii = auto_gauge(op) if isinstance(gauge, str) and gauge == "auto" else gauge
    if radii is None:
        return op.matrix, None, None
    radii = tuple(float(r) for r in radii)
    matrix, logs = imaginary_gauge(op, radii)
    return matrix, logs, radii


def _solve(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        values, vectors = scipy.linalg.eig(matrix)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    order = _sort_order(values)
    vectors = vectors[:, order]
    return values[order], vectors / np.linalg.norm(vectors, axis=0)


def _adjoint_left(matrix: np.ndarray, values: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Left vectors from an eigensolve of H^dagger, matched greedily by conj(eigenvalue)."""
    try:
        adj_values, adj_vectors = scipy.linalg.eig(matrix.conj().T)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"adjoint eigensolver failed: {exc}") from exc
    free = np.ones(len(adj_values), dtype=bool)
    left = np.zeros_like(right)
    for i, value in enumerate(values):
        distance = np.where(free, np.abs(adj_values.conj() - value), np.inf)
        j = int(np.argmin(distance))
        free[j] = False
        vector = adj_vectors[:, j]
        overlap = np.vdot(vector, right[:, i])
        left[:, i] = vector / np.conj(overlap) if abs(overlap) > _OVERLAP_FLOOR else vector
    return left


def eig_biorthogonal(op: RealSpaceOperator, tol_biorth: float = TOL_BIORTH, gauge: Gauge = "auto") -> BiorthogonalSystem:
    """Biorthogonal eigendecomposition of ``op``.

    ``gauge`` is ``"auto"``, ``None`` or explicit per-axis radii for the
    imaginary gauge transform the eigensolve runs in. Vectors are always
    returned in the physical frame.
    """
    matrix, logs, radii = _working_matrix(op, gauge)
    values, right = _solve(matrix)

    kappa = float(np.linalg.cond(right))
    if kappa < KAPPA_LIMIT:
        left = scipy.linalg.inv(right).conj().T
    else:
        logger.warning("Eigenbasis condition %.3g exceeds %.3g; matching left vectors by adjoint solve.",
                       kappa, KAPPA_LIMIT)
        left = _adjoint_left(matrix, values, right)
    biorth_error = float(np.abs(left.conj().T @ right - np.eye(len(values))).max())
    ep_flag = bool(kappa >= KAPPA_LIMIT or biorth_error > tol_biorth)

    if logs is not None:
        right = right * np.exp(logs)[:, None]
        left = left * np.exp(-logs)[:, None]
    norms = np.linalg.norm(right, axis=0)
    right, left = right / norms, left * norms
    peak = right[np.argmax(np.abs(right), axis=0), np.arange(right.shape[1])]
    phase = peak / np.abs(peak)
    right, left = right / phase, left * phase.conj()

    condition = kappa if logs is None else float(np.linalg.cond(right))
    system = BiorthogonalSystem(values, right, left, condition, _pair_gap(values), ep_flag, biorth_error, radii)
    logger.debug("Solved %d states (kappa %.3g, gauge %s, ep_flag %s).", len(values), condition, radii, ep_flag)
    return system


def eigenvalues(op: RealSpaceOperator, gauge: Gauge = "auto") -> np.ndarray:
    """Sorted eigenvalues only."""
    matrix, _, _ = _working_matrix(op, gauge)
    try:
        values = scipy.linalg.eigvals(matrix)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    return values[_sort_order(values)]


def non_normality(op: RealSpaceOperator) -> float:
    H = op.matrix
    return float(np.linalg.norm(H @ H.conj().T - H.conj().T @ H, "fro"))


def ep_diagnostic(op: RealSpaceOperator, gauge: Gauge = "auto") -> EPDiagnostic:
    matrix, logs, _ = _working_matrix(op, gauge)
    values, right = _solve(matrix)
    singular = scipy.linalg.svdvals(right)
    rank = int(np.sum(singular > np.sqrt(np.finfo(float).eps) * singular[0]))
    if logs is not None:
        right = right * np.exp(logs)[:, None]
        right = right / np.linalg.norm(right, axis=0)
    return EPDiagnostic(float(np.linalg.cond(right)), _pair_gap(values), len(values) - rank)
