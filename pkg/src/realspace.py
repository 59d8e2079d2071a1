from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from errors import LatticeError
from model import LatticeModel, char_poly

logger = logging.getLogger(__name__)


class Side(str, Enum):
    """Lattice end a state piles up at; BLOCH marks an extended |beta| = 1 state."""

    LEFT = "left"
    RIGHT = "right"
    BLOCH = "bloch"


class BoundaryKind(str, Enum):
    OBC = "obc"
    PBC = "pbc"
    COUPLED = "coupled"


@dataclass(frozen=True)
class AxisBoundary:
    kind: BoundaryKind = BoundaryKind.OBC
    epsilon: complex = 0j  # only read for COUPLED

    @property
    def factor(self) -> complex:
        """Multiplier applied to bonds that wrap this axis."""
        if self.kind is BoundaryKind.OBC:
            return 0j
        if self.kind is BoundaryKind.PBC:
            return 1 + 0j
        return complex(self.epsilon)


@dataclass(frozen=True)
class BoundarySpec:
    axes: Tuple[AxisBoundary, ...]

    @classmethod
    def obc(cls, dimension: int = 1) -> "BoundarySpec":
        return cls((AxisBoundary(BoundaryKind.OBC),) * dimension)

    @classmethod
    def pbc(cls, dimension: int = 1) -> "BoundarySpec":
        return cls((AxisBoundary(BoundaryKind.PBC),) * dimension)

    @classmethod
    def coupled(cls, epsilon: complex, dimension: int = 1) -> "BoundarySpec":
        return cls((AxisBoundary(BoundaryKind.COUPLED, complex(epsilon)),) * dimension)

    @classmethod
    def parse(cls, text: str, dimension: int = 1) -> "BoundarySpec":
        """Parse ``obc``, ``pbc`` or ``coupled:EPS`` (EPS may be complex, e.g. ``1e-4+0i``)."""
        kind, _, value = text.strip().lower().partition(":")
        if kind == "obc" and not value:
            return cls.obc(dimension)
        if kind == "pbc" and not value:
            return cls.pbc(dimension)
        if kind == "coupled" and value:
            try:
                epsilon = complex(value.replace("i", "j"))
            except ValueError as exc:
                raise LatticeError(f"Bad coupling strength '{value}'") from exc
            return cls.coupled(epsilon, dimension)
        raise LatticeError(f"Unknown boundary '{text}' (use obc, pbc or coupled:EPS)")

    @property
    def fully_open(self) -> bool:
        """No bond crosses any boundary (Coupled(0) included)."""
        return all(axis.factor == 0 for axis in self.axes)

    def describe(self) -> str:
        parts = [a.kind.value if a.kind is not BoundaryKind.COUPLED else f"coupled({a.epsilon:g})" for a in self.axes]
        return "x".join(parts)


@dataclass(frozen=True, eq=False)
class RealSpaceOperator:
    """Dense Hamiltonian of a finite lattice.

    Row ``ravel_multi_index(cell, sizes) * bands + orbital`` belongs to
    ``(cell, orbital)``; cells are laid out in C order.
    """

    matrix: np.ndarray
    sizes: Tuple[int, ...]
    bands: int
    boundary: BoundarySpec
    model: LatticeModel | None = None

    @property
    def dimension(self) -> int:
        return len(self.sizes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]

    def site_index(self, cell: Sequence[int], orbital: int = 0) -> int:
        return int(np.ravel_multi_index(tuple(cell), self.sizes)) * self.bands + orbital

    def site_of(self, row: int) -> Tuple[Tuple[int, ...], int]:
        cell, orbital = divmod(int(row), self.bands)
        return tuple(int(c) for c in np.unravel_index(cell, self.sizes)), orbital

    def cell_of_rows(self) -> np.ndarray:
        """Flat cell index of every row."""
        return np.arange(self.n_sites) // self.bands

    def cell_coordinates(self) -> np.ndarray:
        """(n_sites, d) array of cell coordinates per row."""
        return np.stack(np.unravel_index(self.cell_of_rows(), self.sizes), axis=-1)


def build(model: LatticeModel, sizes: Sequence[int] | int, boundary: BoundarySpec | None = None) -> RealSpaceOperator:
    sizes = (int(sizes),) if np.isscalar(sizes) else tuple(int(s) for s in sizes)
    if len(sizes) != model.dimension:
        raise LatticeError(f"{len(sizes)} sizes given for a {model.dimension}D model")
    if any(s < 2 for s in sizes):
        raise LatticeError(f"every lattice size must be >= 2, got {sizes}")
    boundary = boundary or BoundarySpec.obc(model.dimension)
    if len(boundary.axes) != model.dimension:
        raise LatticeError(f"boundary has {len(boundary.axes)} axes, model has {model.dimension}")
    reach = model.hopping_range()
    for axis, size in enumerate(sizes):
        if reach[axis] >= size:
            raise LatticeError(f"hopping range {reach[axis]} along axis {axis} does not fit {size} cells")

    B = model.bands
    size_arr = np.array(sizes)
    cells = np.array(list(np.ndindex(*sizes)), dtype=int)
    row_cells = np.arange(len(cells))
    factors = np.array([axis.factor for axis in boundary.axes])
    matrix = np.zeros((len(cells) * B, len(cells) * B), dtype=complex)

    for term in model.terms:
        target = cells + np.array(term.offset)
        wrapped = (target < 0) | (target >= size_arr)
        weight = np.prod(np.where(wrapped, factors[None, :], 1.0), axis=1)
        keep = weight != 0
        col_cells = np.ravel_multi_index(tuple((target[keep] % size_arr).T), sizes)
        for a, b in zip(*np.nonzero(term.amplitude)):
            np.add.at(matrix, (row_cells[keep] * B + a, col_cells * B + b), weight[keep] * term.amplitude[a, b])

    logger.debug("Built %s on %s lattice (%s), %d sites.", model.label(), sizes, boundary.describe(), matrix.shape[0])
    return RealSpaceOperator(matrix, sizes, B, boundary, model)


def add_onsite_disorder(op: RealSpaceOperator, strength: float, seed: int) -> RealSpaceOperator:
    if strength < 0:
        raise LatticeError(f"disorder strength must be >= 0, got {strength}")
    rng = np.random.default_rng(seed)
    matrix = op.matrix + np.diag(rng.uniform(-strength, strength, size=op.n_sites))
    return replace(op, matrix=matrix)


# ---------------- Imaginary gauge ---------------- #
def gauge_logs(op: RealSpaceOperator, radii: Sequence[float]) -> np.ndarray:
    """log s for every row, with s_(cell) = prod_i radii_i ** cell_i and max(s) = 1."""
    logs = op.cell_coordinates() @ np.log(np.asarray(radii, dtype=float))
    return logs - logs.max()


def imaginary_gauge(op: RealSpaceOperator, radii: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Return (S^-1 H S, log s) for S = diag(s).

    The similarity rescales each bond by radii ** offset, i.e. it replaces
    H(beta) by H(radii * beta). Eigenvalues are unchanged.
    """
    logs = gauge_logs(op, radii)
    rows, cols = np.nonzero(op.matrix)
    gauged = np.zeros_like(op.matrix)
    gauged[rows, cols] = op.matrix[rows, cols] * np.exp(logs[cols] - logs[rows])
    return gauged, logs


def auto_gauge(op: RealSpaceOperator) -> Tuple[float, ...] | None:
    """GBZ radius at E = 0 for fully open 1D lattices, else None."""
    if op.model is None or op.dimension != 1 or not op.boundary.fully_open:
        return None
    poly = char_poly(op.model, 0.0)
    scale = poly.scale()
    if abs(poly.leading) <= 1e-12 * scale or abs(poly.trailing) <= 1e-12 * scale:
        return None
    moduli = np.sort(np.abs(np.roots(poly.polynomial())))
    q = poly.pole_order[0]
    if q == 0 or q >= len(moduli) or moduli[q - 1] == 0:
        return None
    radius = float(np.sqrt(moduli[q - 1] * moduli[q]))
    if not np.isfinite(radius) or radius <= 0:
        return None
    return (radius,)
