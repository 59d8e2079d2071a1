from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from errors import LatticeError
from model import HoppingTerm, LatticeModel, bloch_stack, builtin_2d, builtin_hatano_nelson, builtin_nh_ssh
from realspace import (
    BoundaryKind,
    BoundarySpec,
    add_onsite_disorder,
    auto_gauge,
    build,
    imaginary_gauge,
)


def test_open_chain_is_tridiagonal(hn) -> None:
    op = build(hn, 4, BoundarySpec.obc())
    expected = np.diag([0.5] * 3, 1) + np.diag([1.0] * 3, -1)
    assert np.array_equal(op.matrix, expected)
    assert op.sizes == (4,) and op.n_sites == 4


def test_periodic_ring_closes_circulant(hn) -> None:
    op = build(hn, 4, BoundarySpec.pbc())
    assert op.matrix[0, 3] == 1.0
    assert op.matrix[3, 0] == 0.5
    assert np.count_nonzero(op.matrix) == 8


def test_coupled_boundary_interpolates(hn) -> None:
    obc = build(hn, 4, BoundarySpec.obc()).matrix
    assert np.array_equal(build(hn, 4, BoundarySpec.coupled(0.0)).matrix, obc)
    assert np.array_equal(build(hn, 4, BoundarySpec.coupled(1.0)).matrix, build(hn, 4, BoundarySpec.pbc()).matrix)
    weak = build(hn, 4, BoundarySpec.coupled(1e-3)).matrix
    assert weak[0, 3] == pytest.approx(1e-3)
    assert weak[3, 0] == pytest.approx(5e-4)


def test_nh_ssh_bonds_land_on_the_right_orbitals() -> None:
    op = build(builtin_nh_ssh(0.6, 1.0, 0.3), 5)
    A, B = 0, 1
    assert op.matrix[op.site_index([2], A), op.site_index([2], B)] == pytest.approx(0.9)
    assert op.matrix[op.site_index([2], B), op.site_index([2], A)] == pytest.approx(0.3)
    assert op.matrix[op.site_index([2], A), op.site_index([1], B)] == pytest.approx(1.0)
    assert op.matrix[op.site_index([1], B), op.site_index([2], A)] == pytest.approx(1.0)
    assert op.site_of(op.site_index([3], B)) == ((3,), B)


def test_periodic_2d_lattice_reproduces_bloch_values() -> None:
    model = builtin_2d(0.5, 1.0, 0.2)
    op = build(model, (3, 3), BoundarySpec.pbc(2))
    values = np.linalg.eigvals(op.matrix)
    ks = 2 * np.pi * np.array([[a, b] for a in range(3) for b in range(3)]) / 3
    expected = bloch_stack(model, ks)[:, 0, 0]
    assert np.abs(values[:, None] - expected[None, :]).min(axis=1).max() < 1e-10
    assert np.abs(expected[:, None] - values[None, :]).min(axis=1).max() < 1e-10


def test_mixed_boundaries_per_axis() -> None:
    boundary = BoundarySpec((BoundarySpec.pbc().axes[0], BoundarySpec.obc().axes[0]))
    op = build(builtin_2d(0.5, 1.0, 0.0), (3, 3), boundary)
    # bond from cell (2, 1) to (0, 1) wraps axis 0 only
    assert op.matrix[op.site_index((2, 1)), op.site_index((0, 1))] == pytest.approx(0.5)
    assert op.matrix[op.site_index((1, 2)), op.site_index((1, 0))] == 0
    assert boundary.describe() == "pbcxobc"


def test_boundary_parsing() -> None:
    assert BoundarySpec.parse("obc").axes[0].kind is BoundaryKind.OBC
    assert BoundarySpec.parse("PBC", 2).axes[1].kind is BoundaryKind.PBC
    coupled = BoundarySpec.parse("coupled:1e-4")
    assert coupled.axes[0].factor == pytest.approx(1e-4)
    assert BoundarySpec.parse("coupled:0").fully_open
    assert not BoundarySpec.pbc().fully_open
    for text in ("ring", "coupled:", "coupled:abc", "obc:1"):
        with pytest.raises(LatticeError):
            BoundarySpec.parse(text)


def test_build_rejects_bad_lattices(hn) -> None:
    with pytest.raises(LatticeError):
        build(hn, 1)
    with pytest.raises(LatticeError):
        build(hn, (4, 4))
    with pytest.raises(LatticeError):
        build(hn, 4, BoundarySpec.obc(2))
    long_range = LatticeModel(1, 1, (HoppingTerm((2,), [[1.0]]), HoppingTerm((-1,), [[1.0]])))
    with pytest.raises(LatticeError):
        build(long_range, 2)
    assert build(long_range, 3).matrix[0, 2] == 1.0


def test_disorder_is_seeded_and_additive(hn) -> None:
    op = build(hn, 50)
    assert np.array_equal(add_onsite_disorder(op, 0.0, 3).matrix, op.matrix)
    first = add_onsite_disorder(op, 0.1, 42)
    second = add_onsite_disorder(op, 0.1, 42)
    assert np.array_equal(first.matrix, second.matrix)
    onsite = np.diag(first.matrix)
    assert np.all(np.abs(onsite) <= 0.1) and np.any(onsite != 0)
    assert first.model is hn
    with pytest.raises(LatticeError):
        add_onsite_disorder(op, -1.0, 0)


def test_imaginary_gauge_symmetrizes_hatano_nelson(hn) -> None:
    op = build(hn, 10)
    radii = auto_gauge(op)
    assert radii == pytest.approx((np.sqrt(2),))
    gauged, logs = imaginary_gauge(op, radii)
    assert np.allclose(gauged, gauged.T)
    assert logs.max() == 0
    assert np.allclose(np.sort(np.linalg.eigvals(gauged).real), np.sort(np.linalg.eigvals(op.matrix).real), atol=1e-8)


def test_auto_gauge_only_for_open_1d_chains(hn) -> None:
    assert auto_gauge(build(hn, 10, BoundarySpec.pbc())) is None
    assert auto_gauge(build(hn, 10, BoundarySpec.coupled(1e-6))) is None
    assert auto_gauge(build(builtin_2d(0.5, 1.0, 0.2), (4, 4))) is None
    assert auto_gauge(build(builtin_nh_ssh(0.6, 1.0, 0.3), 10)) == pytest.approx((np.sqrt(0.3 / 0.9),))


def _cell_shift(n_cells: int, bands: int) -> np.ndarray:
    return np.kron(np.roll(np.eye(n_cells), 1, axis=0), np.eye(bands))


@pytest.mark.parametrize("model,n_cells", [(builtin_hatano_nelson(0.5, 1.0), 8), (builtin_nh_ssh(0.6, 1.0, 0.3), 6)])
def test_periodic_operator_commutes_with_translation(model, n_cells) -> None:
    H = build(model, n_cells, BoundarySpec.pbc()).matrix
    T = _cell_shift(n_cells, model.bands)
    assert np.allclose(T @ H, H @ T, atol=1e-12)


@pytest.mark.parametrize("model,n_cells", [(builtin_hatano_nelson(0.5, 1.0), 12), (builtin_nh_ssh(0.6, 1.0, 0.3), 10)])
def test_periodic_spectrum_is_the_sampled_bloch_spectrum(model, n_cells) -> None:
    lattice = np.linalg.eigvals(build(model, n_cells, BoundarySpec.pbc()).matrix)
    ks = 2 * np.pi * np.arange(n_cells) / n_cells
    bands = np.linalg.eigvals(bloch_stack(model, ks[:, None])).ravel()
    distance = np.abs(lattice[:, None] - bands[None, :])
    rows, cols = linear_sum_assignment(distance)
    assert distance[rows, cols].max() < 1e-10


@pytest.mark.parametrize("boundary", [BoundarySpec.obc(), BoundarySpec.pbc(), BoundarySpec.coupled(0.3)])
def test_build_is_linear_in_the_model(hn, boundary) -> None:
    extra = LatticeModel(1, 1, (HoppingTerm((0,), [[0.3j]]), HoppingTerm((1,), [[0.2]])))
    summed = LatticeModel(1, 1, hn.terms + extra.terms)
    assert np.allclose(build(summed, 9, boundary).matrix,
                       build(hn, 9, boundary).matrix + build(extra, 9, boundary).matrix)
    factor = 0.7 - 1.2j
    assert np.allclose(build(hn.scaled(factor), 9, boundary).matrix, factor * build(hn, 9, boundary).matrix)
