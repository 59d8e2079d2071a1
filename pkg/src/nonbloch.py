"""Non-Bloch band theory.

1D: characteristic roots beta_i(E), the GBZ condition |beta_q| = |beta_{q+1}|
and a refined GBZ curve seeded from a finite open chain.

2D: the amoeba of det[E - H(beta_x, beta_y)] rasterized in the
(log|beta_x|, log|beta_y|) plane; E belongs to the OBC spectrum when the
amoeba has no enclosed hole.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize_scalar

from errors import AmoebaError, DegeneratePolynomialError, GBZError, ModelError
from model import CharPoly, LatticeModel, char_poly
from realspace import BoundarySpec, Side, build
from spectral import eigenvalues

logger = logging.getLogger(__name__)

GBZ_TOL = 1e-6
DEGENERATE_COEFF = 1e-12
MAX_FAILED_SEEDS = 0.05
MAX_FAILED_SAMPLES = 0.01


def worker_count() -> int:
    """Thread cap from NHSKIN_THREADS, defaulting to the CPU count."""
    value = os.getenv("NHSKIN_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning("Ignoring NHSKIN_THREADS=%r (not an integer).", value)
    return os.cpu_count() or 1


# ---------------- 1D generalized Brillouin zone ---------------- #
@dataclass(frozen=True)
class GBZMembership:
    member: bool
    residual: float
    beta_pair: Tuple[complex, complex]


@dataclass(frozen=True)
class GBZSample:
    beta: complex
    energy: complex
    modulus_residual: float
    side: Side


def _checked_poly(model: LatticeModel, E: complex) -> CharPoly:
    if model.dimension != 1:
        raise ModelError("characteristic roots are defined for 1D models; use the amoeba in 2D")
    poly = char_poly(model, E)
    scale = poly.scale()
    if abs(poly.leading) <= DEGENERATE_COEFF * scale:
        raise DegeneratePolynomialError(
            f"leading coefficient of det[E - H(beta)] vanishes at E={E}; one-way hopping has no finite GBZ")
    if abs(poly.trailing) <= DEGENERATE_COEFF * scale:
        raise DegeneratePolynomialError(
            f"trailing coefficient of det[E - H(beta)] vanishes at E={E}; one-way hopping has no finite GBZ")
    return poly


def _sorted_roots(poly: CharPoly) -> np.ndarray:
    roots = np.roots(poly.polynomial())
    order = np.lexsort((np.round(np.angle(roots), 12), np.round(np.abs(roots), 12)))
    return roots[order]


def beta_roots(model: LatticeModel, E: complex) -> np.ndarray:
    """All roots of beta^q det[E - H(beta)], ascending by modulus, ties by argument."""
    return _sorted_roots(_checked_poly(model, E))


def _middle_pair(model: LatticeModel, E: complex) -> Tuple[complex, complex]:
    poly = _checked_poly(model, E)
    roots = _sorted_roots(poly)
    q = poly.pole_order[0]
    if q == 0 or q >= len(roots):
        raise DegeneratePolynomialError("the GBZ needs hopping in both directions")
    return complex(roots[q - 1]), complex(roots[q])


def _modulus_residual(pair: Tuple[complex, complex]) -> float:
    inner, outer = abs(pair[0]), abs(pair[1])
    return abs(inner - outer) / inner


def gbz_membership(model: LatticeModel, E: complex, gbz_tol: float = GBZ_TOL) -> GBZMembership:
    pair = _middle_pair(model, E)
    residual = _modulus_residual(pair)
    return GBZMembership(residual < gbz_tol, residual, pair)


def side_of(beta: complex, gbz_tol: float = GBZ_TOL) -> Side:
    modulus = abs(beta)
    if modulus < 1 - gbz_tol:
        return Side.LEFT
    if modulus > 1 + gbz_tol:
        return Side.RIGHT
    return Side.BLOCH


def gbz_decay_rate(beta: complex) -> float:
    """Per-cell growth of |psi|^2 for a skin mode at beta."""
    return 2.0 * float(np.log(abs(beta)))


def _seed_normals(seeds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit normals of the finite-size spectral curve and the local seed spacing."""
    normals = np.empty(len(seeds), dtype=complex)
    spacing = np.empty(len(seeds))
    for i, seed in enumerate(seeds):
        distance = np.abs(seeds - seed)
        distance[distance < 1e-12] = np.inf
        j = int(np.argmin(distance))
        if not np.isfinite(distance[j]):
            normals[i], spacing[i] = 1j, 1.0
            continue
        tangent = (seeds[j] - seed) / distance[j]
        normals[i], spacing[i] = 1j * tangent, distance[j]
    return normals, spacing


def gbz_curve(
    model: LatticeModel,
    n_seed: int = 400,
    refine_tol: float = 1e-8,
    gbz_tol: float = GBZ_TOL,
) -> List[GBZSample]:
    """Sample the GBZ by refining OBC eigenvalues onto |beta_q| = |beta_{q+1}|.

    Each seed is moved along the local normal of the finite-size spectrum to
    the minimum of the modulus residual; both degenerate roots are emitted.
    """
    if model.dimension != 1:
        raise ModelError("the GBZ curve is defined for 1D models")
    _middle_pair(model, 0.0)
    seeds = eigenvalues(build(model, n_seed, BoundarySpec.obc()))
    normals, spacing = _seed_normals(seeds)

    samples: List[GBZSample] = []
    failed: List[int] = []
    for i, (seed, normal, step) in enumerate(zip(seeds, normals, spacing)):
        def residual(t: float) -> float:
            try:
                return _modulus_residual(_middle_pair(model, seed + t * normal))
            except DegeneratePolynomialError:
                return np.inf

        reach = 3.0 * step + 1e-9
        start = residual(0.0)
        if start < refine_tol:
            t_best, best = 0.0, start
        else:
            found = minimize_scalar(residual, bounds=(-reach, reach), method="bounded", options={"xatol": refine_tol})
            t_best, best = (float(found.x), float(found.fun)) if found.fun < start else (0.0, start)
        if not best < gbz_tol:
            failed.append(i)
            continue
        energy = complex(seed + t_best * normal)
        pair = _middle_pair(model, energy)
        for beta in pair:
            samples.append(GBZSample(beta, energy, best, side_of(beta, gbz_tol)))

    if len(failed) > MAX_FAILED_SEEDS * len(seeds):
        raise GBZError(f"GBZ refinement failed on {len(failed)} of {len(seeds)} seeds", failed)
    if failed:
        logger.warning("Dropped %d of %d GBZ seeds that did not refine: %s", len(failed), len(seeds), failed)
    logger.info("GBZ of %s: %d samples from %d seeds.", model.label(), len(samples), len(seeds))
    return samples


# ---------------- 2D amoeba ---------------- #
@dataclass
class AmoebaSampling:
    window: Tuple[float, float, float, float] = (-3.0, 3.0, -3.0, 3.0)  # x_min, x_max, y_min, y_max
    resolution: int = 300  # raster cells per axis
    r_x_samples: int = 300  # log|beta_x| columns; cell-centred over the x extent
    phase_samples: int = 600  # arg(beta_x) samples over [0, 2*pi)
    per_branch: bool = False
    keep_points: bool = False


@dataclass(frozen=True, eq=False)
class AmoebaRaster:
    """Occupancy of the amoeba; ``occupancy[ix, iy]`` covers one cell of the window."""

    window: Tuple[float, float, float, float]
    resolution: int
    occupancy: np.ndarray
    counts: np.ndarray
    energy: complex
    failed_samples: int = 0
    total_samples: int = 0
    branches: np.ndarray | None = field(default=None, repr=False)
    points: np.ndarray | None = field(default=None, repr=False)

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        x_min, x_max, y_min, y_max = self.window
        width = (x_max - x_min) / self.resolution
        height = (y_max - y_min) / self.resolution
        return (x_min + (np.arange(self.resolution) + 0.5) * width,
                y_min + (np.arange(self.resolution) + 0.5) * height)


def _beta_y_roots(poly: CharPoly, beta_x: np.ndarray) -> np.ndarray:
    """Roots in beta_y for each beta_x, sorted by modulus; rows with a degenerate polynomial are NaN."""
    coeffs = poly.in_beta_y(beta_x)
    degree = coeffs.shape[1] - 1
    roots = np.full((len(beta_x), degree), np.nan + 0j)
    scale = np.abs(coeffs).max(axis=1)
    good = (np.abs(coeffs[:, -1]) > DEGENERATE_COEFF * scale) & (np.abs(coeffs[:, 0]) > DEGENERATE_COEFF * scale)
    if degree == 0 or not good.any():
        return roots
    monic = coeffs[good, :-1] / coeffs[good, -1:]
    companion = np.zeros((int(good.sum()), degree, degree), dtype=complex)
    companion[:, 1:, :-1] = np.eye(degree - 1)
    companion[:, :, -1] = -monic
    found = np.linalg.eigvals(companion)
    order = np.argsort(np.abs(found), axis=1)
    roots[good] = np.take_along_axis(found, order, axis=1)
    return roots


def _cell(values: np.ndarray, low: float, high: float, resolution: int) -> np.ndarray:
    """Cell index per value, clipped to -1 (below) and resolution (above)."""
    index = np.floor((values - low) / (high - low) * resolution)
    return np.clip(index, -1, resolution).astype(int)


def _amoeba_slice(poly: CharPoly, r_x: float, sampling: AmoebaSampling):
    _, _, y_min, y_max = sampling.window
    res = sampling.resolution
    phases = 2 * np.pi * np.arange(sampling.phase_samples) / sampling.phase_samples
    roots = _beta_y_roots(poly, np.exp(r_x + 1j * phases))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_y = np.log(np.abs(roots))
    bad_rows = ~np.all(np.isfinite(log_y), axis=1)

    n_branch = log_y.shape[1]
    column = np.zeros(res, dtype=bool)
    branches = np.zeros((n_branch, res), dtype=bool)
    counts = np.zeros(res, dtype=int)
    for a in range(n_branch):
        values = log_y[:, a]
        following = np.roll(values, -1)
        usable = ~(bad_rows | np.roll(bad_rows, -1))
        lo = _cell(np.minimum(values, following)[usable], y_min, y_max, res)
        hi = _cell(np.maximum(values, following)[usable], y_min, y_max, res)
        # the sorted-modulus branch is continuous in phase, so each segment is covered
        diff = np.zeros(res + 3, dtype=int)
        np.add.at(diff, lo + 1, 1)
        np.add.at(diff, hi + 2, -1)
        branches[a] = np.cumsum(diff)[1:res + 1] > 0
        column |= branches[a]
        cells = _cell(values[~bad_rows], y_min, y_max, res)
        cells = cells[(cells >= 0) & (cells < res)]
        np.add.at(counts, cells, 1)
    points = None
    if sampling.keep_points:
        finite = log_y[~bad_rows].ravel()
        points = np.column_stack([np.full(len(finite), r_x), finite])
    return column, branches, counts, int(bad_rows.sum()), points


def amoeba_points(
    model: LatticeModel,
    E: complex,
    sampling: AmoebaSampling | None = None,
) -> AmoebaRaster:
    sampling = sampling or AmoebaSampling()
    if model.dimension != 2:
        raise ModelError("the amoeba construction needs a 2D model")
    x_min, x_max, y_min, y_max = sampling.window
    if not (x_min < 0 < x_max and y_min < 0 < y_max):
        raise ValueError(f"amoeba window {sampling.window} must contain the origin")
    poly = char_poly(model, E)
    res = sampling.resolution
    width = (x_max - x_min) / sampling.r_x_samples
    r_values = x_min + (np.arange(sampling.r_x_samples) + 0.5) * width
    x_cells = _cell(r_values, x_min, x_max, res)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        slices = list(pool.map(lambda r: _amoeba_slice(poly, r, sampling), r_values))

    n_branch = slices[0][1].shape[0]
    occupancy = np.zeros((res, res), dtype=bool)
    counts = np.zeros((res, res), dtype=int)
    branches = np.zeros((n_branch, res, res), dtype=bool) if sampling.per_branch else None
    failed = 0
    for ix, (column, branch_columns, column_counts, bad, _) in zip(x_cells, slices):
        occupancy[ix] |= column
        counts[ix] += column_counts
        if branches is not None:
            branches[:, ix] |= branch_columns
        failed += bad
    total = sampling.r_x_samples * sampling.phase_samples
    if failed > MAX_FAILED_SAMPLES * total:
        raise AmoebaError(f"root finding failed on {failed} of {total} amoeba samples at E={E}")
    if failed:
        logger.warning("Tolerated %d failed amoeba samples of %d at E=%s.", failed, total, E)
    points = np.concatenate([s[4] for s in slices]) if sampling.keep_points else None
    return AmoebaRaster(sampling.window, res, occupancy, counts, complex(E), failed, total, branches, points)


def has_hole(raster: AmoebaRaster, min_hole_cells: int = 4) -> bool:
    """True if some empty region of at least ``min_hole_cells`` cells is cut off from the window border."""
    labels, count = ndimage.label(~raster.occupancy)
    if count == 0:
        return False
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    enclosed = np.setdiff1d(np.arange(1, count + 1), border)
    return bool(np.any(sizes[enclosed] >= min_hole_cells))


def obc_member_2d(model: LatticeModel, E: complex, sampling: AmoebaSampling | None = None) -> bool:
    member = not has_hole(amoeba_points(model, E, sampling))
    logger.info("E=%s %s the OBC spectrum of %s.", E, "is in" if member else "is outside", model.label())
    return member


def amoeba_1d_member(model: LatticeModel, E: complex, gbz_tol: float = GBZ_TOL) -> bool:
    """1D amoeba: E is an OBC energy when the two middle log-moduli touch."""
    inner, outer = _middle_pair(model, E)
    return abs(np.log(abs(outer)) - np.log(abs(inner))) < gbz_tol
