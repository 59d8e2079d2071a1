"""Point gaps and spectral winding numbers of 1D Bloch bands."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from errors import GapClosedError, ModelError, SpectralError
from model import LatticeModel, bloch_stack
from realspace import Side

logger = logging.getLogger(__name__)

GAP_TOL = 1e-6
K_GRID = 2048
INTEGRALITY_TOL = 1e-4
# Bisection stops once every sampled phase step is below this.
_MAX_PHASE_STEP = np.pi / 2
_MAX_SAMPLES = 1 << 20


@dataclass(frozen=True)
class PointGap:
    open: bool
    min_dist: float


@dataclass(frozen=True)
class WindingResult:
    w: int
    E_B: complex
    raw_integral: complex
    k_samples_used: int


def _require_1d(model: LatticeModel) -> None:
    if model.dimension != 1:
        raise ModelError("point-gap topology is implemented for 1D models only")


def point_gap_open(model: LatticeModel, E_B: complex, k_grid: int = K_GRID, gap_tol: float = GAP_TOL) -> PointGap:
    _require_1d(model)
    ks = np.linspace(-np.pi, np.pi, k_grid, endpoint=False)
    bands = np.linalg.eigvals(bloch_stack(model, ks[:, None]))
    min_dist = float(np.abs(bands - E_B).min())
    return PointGap(min_dist > gap_tol, min_dist)


def _loop_function(model: LatticeModel, E_B: complex, form: str) -> Callable[[np.ndarray], np.ndarray]:
    if form == "printed":
        return lambda ks: np.linalg.det(bloch_stack(model, ks[:, None])) - E_B
    if form == "shifted":
        shift = E_B * np.eye(model.bands)
        return lambda ks: np.linalg.det(bloch_stack(model, ks[:, None]) - shift)
    raise ValueError(f"Unknown winding form '{form}' (use 'printed' or 'shifted')")


def winding_number(
    model: LatticeModel,
    E_B: complex,
    form: str = "printed",
    gap_tol: float = GAP_TOL,
    k_initial: int = 64,
) -> WindingResult:
    """Count how often the loop k -> f(k) winds around zero over the Brillouin zone.

    ``form="printed"`` uses f = det H(k) - E_B, ``form="shifted"`` uses
    f = det[H(k) - E_B]; they agree for one band and at E_B = 0.
    """
    gap = point_gap_open(model, E_B, gap_tol=gap_tol)
    if not gap.open:
        raise GapClosedError(f"point gap closed at E_B = {E_B} (min distance {gap.min_dist:.3g})")
    f = _loop_function(model, E_B, form)

    ks = np.linspace(-np.pi, np.pi, k_initial + 1)
    values = f(ks)
    while True:
        if np.abs(values).min() <= gap_tol:
            raise GapClosedError(f"loop passes through zero at E_B = {E_B} ({form} form)")
        steps = np.angle(values[1:] / values[:-1])
        coarse = np.abs(steps) >= _MAX_PHASE_STEP
        if not coarse.any():
            break
        if len(ks) > _MAX_SAMPLES:
            raise SpectralError(f"phase of the winding loop did not resolve with {len(ks)} samples")
        mids = 0.5 * (ks[:-1][coarse] + ks[1:][coarse])
        ks = np.concatenate([ks, mids])
        values = np.concatenate([values, f(mids)])
        order = np.argsort(ks)
        ks, values = ks[order], values[order]

    raw = complex(steps.sum(), np.log(np.abs(values[-1]) / np.abs(values[0]))) / (2 * np.pi)
    w = int(round(raw.real))
    if abs(raw - w) >= INTEGRALITY_TOL:
        raise SpectralError(f"winding integral {raw} is not within {INTEGRALITY_TOL} of an integer")
    logger.debug("Winding at E_B=%s: %d (%d samples).", E_B, w, len(ks))
    return WindingResult(w, complex(E_B), raw, len(ks))


def predict_skin_side(result: WindingResult) -> Side | None:
    if result.w < 0:
        return Side.RIGHT
    if result.w > 0:
        return Side.LEFT
    return None


def winding_map(
    model: LatticeModel,
    re_values: Sequence[float],
    im_values: Sequence[float],
    form: str = "printed",
    gap_tol: float = GAP_TOL,
) -> np.ndarray:
    """w over a grid of base points, shape (len(im_values), len(re_values)); NaN where the gap closes."""
    grid = np.full((len(im_values), len(re_values)), np.nan)
    for i, im in enumerate(im_values):
        for j, re in enumerate(re_values):
            try:
                grid[i, j] = winding_number(model, complex(re, im), form, gap_tol).w
            except GapClosedError:
                continue
    logger.info("Winding map: %d of %d base points have an open gap.", int(np.isfinite(grid).sum()), grid.size)
    return grid
