from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

import numpy as np

from errors import EPVicinityError, ProfileError
from realspace import RealSpaceOperator, Side

logger = logging.getLogger(__name__)

# |<L|R>| (with R at unit norm) below this is treated as an exceptional point.
EP_OVERLAP = 1e-12
MIN_FIT_SITES = 5


class ProfileKind(str, Enum):
    RIGHT = "right"
    LEFT = "left"
    BIORTHOGONAL = "biorthogonal"


class StateLabel(str, Enum):
    SKIN = "skin"
    TOPOLOGICAL_BOUNDARY = "topological_boundary"
    BULK = "bulk"


@dataclass
class ClassifierThresholds:
    edge_fraction: float = 0.5  # right-profile weight needed in the edge region
    participation: float = 0.2  # biorthogonal PR threshold, as a fraction of the cell count
    edge_region: float = 0.1  # outer share of cells per side counted as edge


@dataclass(frozen=True, eq=False)
class SiteProfile:
    """Cell-resolved, orbital-summed weights; shape equals the lattice sizes."""

    weights: np.ndarray
    kind: ProfileKind

    @property
    def normalization(self) -> complex:
        return complex(self.weights.sum())


@dataclass(frozen=True)
class StateClass:
    label: StateLabel
    side: Side | None
    metrics: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float


def _per_cell(values: np.ndarray, op: RealSpaceOperator) -> np.ndarray:
    return values.reshape(op.n_cells, op.bands).sum(axis=1).reshape(op.sizes)


def density_profile(state: np.ndarray, op: RealSpaceOperator, kind: ProfileKind = ProfileKind.RIGHT) -> SiteProfile:
    state = np.asarray(state, dtype=complex)
    if state.shape != (op.n_sites,):
        raise ProfileError(f"state has shape {state.shape}, lattice has {op.n_sites} sites")
    density = np.abs(state) ** 2
    total = density.sum()
    if total == 0:
        raise ProfileError("cannot build a profile from the zero vector")
    return SiteProfile(_per_cell(density / total, op), kind)


def biorthogonal_density(L: np.ndarray, R: np.ndarray, op: RealSpaceOperator) -> SiteProfile:
    """conj(L) * R per cell, divided by <L|R> so the weights sum to one.

    R is brought to unit norm. The pair is refused as exceptional when
    |<L|R>| vanishes, or when it is small against sum_n |L_n R_n|, a
    scale-free ratio that an imaginary gauge leaves unchanged.
    """
    L = np.asarray(L, dtype=complex)
    R = np.asarray(R, dtype=complex)
    norm = np.linalg.norm(R)
    if norm == 0:
        raise ProfileError("right vector is zero")
    R = R / norm
    products = L.conj() * R
    overlap = products.sum()
    scale = np.abs(products).sum()
    if abs(overlap) < EP_OVERLAP or abs(overlap) < EP_OVERLAP * scale:
        ratio = 0.0 if scale == 0 else abs(overlap) / scale
        raise EPVicinityError(f"|<L|R>| / sum|L_n R_n| = {ratio:.3g}; state sits at an exceptional point")
    return SiteProfile(_per_cell(products / overlap, op), ProfileKind.BIORTHOGONAL)


def decay_fit(profile: SiteProfile, window: Tuple[int, int]) -> DecayFit:
    """Slope of ln(weight) over the inclusive cell window; positive means growth to the right."""
    if profile.weights.ndim != 1:
        raise ProfileError("decay fits need a 1D profile")
    start, stop = int(window[0]), int(window[1])
    if start < 0 or stop >= len(profile.weights) or stop < start:
        raise ProfileError(f"window {window} outside the lattice of {len(profile.weights)} cells")
    if stop - start + 1 < MIN_FIT_SITES:
        raise ProfileError(f"window {window} has fewer than {MIN_FIT_SITES} sites")
    values = profile.weights[start:stop + 1]
    values = np.abs(values) if np.iscomplexobj(values) else values
    if np.any(values <= 0):
        raise ProfileError(f"non-positive weights in window {window}")
    sites = np.arange(start, stop + 1)
    logs = np.log(values)
    slope, intercept = np.polyfit(sites, logs, 1)
    residual = np.sum((logs - (slope * sites + intercept)) ** 2)
    spread = np.sum((logs - logs.mean()) ** 2)
    r_squared = 1.0 if spread == 0 else 1.0 - residual / spread
    return DecayFit(float(slope), float(r_squared))


def participation_ratio(weights: np.ndarray) -> float:
    """(sum |w|)^2 / sum |w|^2, between 1 and the number of cells."""
    magnitude = np.abs(weights).ravel()
    return float(magnitude.sum() ** 2 / np.sum(magnitude ** 2))


def edge_mask(sizes: Tuple[int, ...], edge_region: float = 0.1) -> np.ndarray:
    """Cells within the outer ``edge_region`` share of any axis."""
    mask = np.zeros(sizes, dtype=bool)
    for axis, size in enumerate(sizes):
        width = max(1, math.ceil(edge_region * size - 1e-9))
        index = [slice(None)] * len(sizes)
        index[axis] = np.r_[0:width, size - width:size]
        mask[tuple(index)] = True
    return mask


def dominant_side(weights: np.ndarray) -> Side:
    """Half of the lattice (along the first axis) carrying more |weight|."""
    magnitude = np.abs(weights)
    magnitude = magnitude.reshape(magnitude.shape[0], -1).sum(axis=1)
    half = len(magnitude) // 2
    left, right = magnitude[:half].sum(), magnitude[len(magnitude) - half:].sum()
    return Side.RIGHT if right > left else Side.LEFT


def sublattice_weights(state: np.ndarray, op: RealSpaceOperator) -> np.ndarray:
    """Share of |state|^2 on each orbital of the unit cell."""
    density = np.abs(np.asarray(state)) ** 2
    per_orbital = density.reshape(op.n_cells, op.bands).sum(axis=0)
    return per_orbital / per_orbital.sum()


def classify_state(
    L: np.ndarray,
    R: np.ndarray,
    op: RealSpaceOperator,
    thresholds: ClassifierThresholds | None = None,
) -> StateClass:
    thresholds = thresholds or ClassifierThresholds()
    right = density_profile(R, op)
    bio = biorthogonal_density(L, R, op)
    mask = edge_mask(op.sizes, thresholds.edge_region)
    edge_fraction = float(right.weights[mask].sum())
    pr = participation_ratio(bio.weights)
    metrics = {
        "right_edge_fraction": edge_fraction,
        "biorthogonal_participation_ratio_scaled": pr / op.n_cells,
    }
    if edge_fraction > thresholds.edge_fraction:
        if pr > thresholds.participation * op.n_cells:
            return StateClass(StateLabel.SKIN, dominant_side(right.weights), metrics)
        return StateClass(StateLabel.TOPOLOGICAL_BOUNDARY, dominant_side(bio.weights), metrics)
    return StateClass(StateLabel.BULK, None, metrics)


def classify_spectrum(system, op: RealSpaceOperator, thresholds: ClassifierThresholds | None = None) -> list[StateClass]:
    """Classify every eigenpair of a BiorthogonalSystem."""
    labels = [classify_state(system.left[:, i], system.right[:, i], op, thresholds) for i in range(len(system))]
    counts = {label: sum(c.label is label for c in labels) for label in StateLabel}
    logger.info("Classified %d states: %s.", len(labels), ", ".join(f"{k.value}={v}" for k, v in counts.items()))
    return labels
