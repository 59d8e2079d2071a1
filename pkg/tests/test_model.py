from __future__ import annotations

import json

import numpy as np
import pytest

from errors import ModelError
from model import (
    HoppingTerm,
    LatticeModel,
    bloch,
    bloch_stack,
    builtin_2d,
    builtin_hatano_nelson,
    builtin_nh_ssh,
    char_poly,
    is_hermitian,
    load_model,
    make_builtin,
    model_from_dict,
    nonbloch,
    nonbloch_stack,
    save_model,
)


def test_hatano_nelson_dispersion_matches_ellipse(hn) -> None:
    ks = np.linspace(-np.pi, np.pi, 1024, endpoint=False)
    values = bloch_stack(hn, ks[:, None])[:, 0, 0]
    expected = 1.5 * np.cos(ks) + 1j * (0.5 - 1.0) * np.sin(ks)
    assert np.abs(values - expected).max() < 1e-12


def test_bloch_point_values(hn, hn_hermitian) -> None:
    assert bloch(hn, [np.pi / 2])[0, 0] == pytest.approx(-0.5j, abs=1e-12)
    assert bloch(hn, [0.0])[0, 0] == pytest.approx(1.5)
    assert bloch(hn_hermitian, [0.0])[0, 0] == pytest.approx(2.0)


def test_nh_ssh_bloch_matrix_at_zero() -> None:
    model = builtin_nh_ssh(1.0, 1.0, 0.5)
    assert np.allclose(bloch(model, [0.0]), [[0.0, 2.5], [1.5, 0.0]])


def test_nh_ssh_off_diagonals_follow_the_bond_layout() -> None:
    model = builtin_nh_ssh(1.0, 1.0, 0.5)
    for k in np.linspace(-np.pi, np.pi, 7):
        h = bloch(model, [k])
        assert h[0, 1] == pytest.approx(1.5 + np.exp(-1j * k))
        assert h[1, 0] == pytest.approx(0.5 + np.exp(1j * k))


def test_gamma_zero_restores_hermiticity() -> None:
    samples = [[k] for k in np.linspace(-np.pi, np.pi, 33)]
    assert is_hermitian(builtin_nh_ssh(1.0, 1.0, 0.0), samples)
    assert not is_hermitian(builtin_nh_ssh(1.0, 1.0, 0.5), samples)


def test_two_dimensional_builtin_reduces_to_square_lattice() -> None:
    model = builtin_2d(1.0, 1.0, 0.0)
    k = np.array([0.3, -1.1])
    assert bloch(model, k)[0, 0] == pytest.approx(2 * np.cos(k[0]) + 2 * np.cos(k[1]))


def test_nonbloch_values(hn) -> None:
    assert nonbloch(hn, [1.0])[0, 0] == pytest.approx(1.5)
    assert nonbloch(hn, [np.sqrt(2)])[0, 0] == pytest.approx(1.41421356, abs=1e-8)
    with pytest.raises(ModelError):
        nonbloch(hn, [0.0])


def test_nonbloch_2d_term_bookkeeping() -> None:
    model = builtin_2d(0.5, 1.0, 0.2)
    bx, by = 1.3 - 0.2j, 0.7 + 0.4j
    expected = (0.5 * (bx + 1 / by) + 1.0 * (1 / bx + by)
                + 0.2 * (bx * by + bx / by + by / bx + 1 / (bx * by)))
    assert nonbloch(model, [bx, by])[0, 0] == pytest.approx(expected)


@pytest.mark.parametrize("model", [builtin_nh_ssh(0.6, 1.0, 0.3), builtin_2d(0.5, 1.0, 0.2)])
def test_bloch_is_nonbloch_on_the_unit_torus(model) -> None:
    rng = np.random.default_rng(7)
    ks = rng.uniform(-np.pi, np.pi, size=(100, model.dimension))
    assert np.allclose(bloch_stack(model, ks), nonbloch_stack(model, np.exp(1j * ks)), atol=1e-12)


@pytest.mark.parametrize("model", [builtin_nh_ssh(0.6, 1.0, 0.3), builtin_2d(0.5, 1.0, 0.2)])
def test_bloch_is_two_pi_periodic(model) -> None:
    rng = np.random.default_rng(11)
    ks = rng.uniform(-np.pi, np.pi, size=(100, model.dimension))
    shift = 2 * np.pi * rng.integers(-2, 3, size=ks.shape)
    assert np.allclose(bloch_stack(model, ks + shift), bloch_stack(model, ks), atol=1e-12)


def test_symmetric_2d_char_poly_is_invariant_under_axis_swap() -> None:
    table = char_poly(builtin_2d(1.0, 1.0, 0.2), 0.3).as_array()
    assert table.shape[0] == table.shape[1]
    assert np.allclose(table, table.T)
    lopsided = char_poly(builtin_2d(0.5, 1.0, 0.2), 0.3).as_array()
    assert not np.allclose(lopsided, lopsided.T)


def test_wrong_momentum_length_is_rejected(hn) -> None:
    with pytest.raises(ModelError):
        bloch(hn, [0.1, 0.2])


def test_hatano_nelson_char_poly_table(hn) -> None:
    poly = char_poly(hn, 0.3)
    assert poly.lower == (-1,) and poly.upper == (1,)
    assert poly.coeffs[(1,)] == pytest.approx(-0.5)
    assert poly.coeffs[(0,)] == pytest.approx(0.3)
    assert poly.coeffs[(-1,)] == pytest.approx(-1.0)
    assert poly.pole_order == (1,)


@pytest.mark.parametrize("model", [builtin_nh_ssh(1.0, 1.0, 0.5), builtin_2d(0.5, 1.0, 0.2)])
def test_char_poly_matches_determinant(model) -> None:
    rng = np.random.default_rng(7)
    E = 0.3 - 0.1j
    poly = char_poly(model, E)
    for _ in range(10):
        beta = rng.uniform(0.5, 1.5, model.dimension) * np.exp(1j * rng.uniform(0, 2 * np.pi, model.dimension))
        direct = np.linalg.det(E * np.eye(model.bands) - nonbloch(model, beta))
        assert abs(poly.evaluate(beta) - direct) < 1e-10


def test_2d_char_poly_exponent_box() -> None:
    poly = char_poly(builtin_2d(0.5, 1.0, 0.2), 0.0)
    assert poly.lower == (-1, -1) and poly.upper == (1, 1)
    assert poly.in_beta_y(np.array([1.0, 2.0])).shape == (2, 3)


def test_one_way_hopping_keeps_vanishing_leading_coefficient() -> None:
    poly = char_poly(builtin_hatano_nelson(0.0, 1.0), 0.0)
    assert poly.upper == (1,)
    assert poly.leading == 0


def test_duplicate_offsets_are_summed() -> None:
    model = LatticeModel(1, 1, (HoppingTerm((1,), [[0.25]]), HoppingTerm((1,), [[0.25]]), HoppingTerm((-1,), [[1.0]])))
    assert len(model.terms) == 2
    assert model.terms[1].amplitude[0, 0] == pytest.approx(0.5)


def test_amplitudes_are_read_only(hn) -> None:
    with pytest.raises(ValueError):
        hn.terms[0].amplitude[0, 0] = 3.0


def test_invalid_terms_report_their_index() -> None:
    with pytest.raises(ModelError) as excinfo:
        LatticeModel(1, 1, (HoppingTerm((1,), [[1.0]]), HoppingTerm((1, 0), [[1.0]])))
    assert excinfo.value.term_index == 1
    assert str(excinfo.value).startswith("term 1:")

    with pytest.raises(ModelError):
        LatticeModel(1, 2, (HoppingTerm((1,), [[1.0]]),))
    with pytest.raises(ModelError):
        LatticeModel(1, 1, (HoppingTerm((1,), [[0.0]]),))
    with pytest.raises(ModelError):
        LatticeModel(3, 1, (HoppingTerm((1, 0, 0), [[1.0]]),))


def test_make_builtin_checks_names_and_parameters() -> None:
    model = make_builtin("nh-ssh", {"t1": 0.6, "t2": 1.0, "gamma": 0.3})
    assert model.bands == 2
    with pytest.raises(ModelError):
        make_builtin("kagome", {})
    with pytest.raises(ModelError):
        make_builtin("hatano-nelson", {"jl": 0.5})


def test_saved_model_loads_back(tmp_path) -> None:
    model = builtin_2d(0.5, 1.0, 0.2)
    path = tmp_path / "asym.json"
    save_model(model, str(path))
    loaded = load_model(str(path))
    assert loaded.dimension == 2
    assert np.array_equal(loaded.offsets, model.offsets)
    assert np.allclose(loaded.amplitudes, model.amplitudes)


def test_shipped_model_files_match_builtins(models_dir) -> None:
    assert np.allclose(load_model(str(models_dir / "hatano_nelson.json")).amplitudes,
                       builtin_hatano_nelson(0.5, 1.0).amplitudes)
    assert np.allclose(load_model(str(models_dir / "asym2d.json")).amplitudes,
                       builtin_2d(0.5, 1.0, 0.2).amplitudes)


def test_malformed_files_raise_model_error(tmp_path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(str(path))

    with pytest.raises(ModelError):
        model_from_dict({"dimension": 1, "terms": []})

    bad_term = {"dimension": 1, "bands": 1, "terms": [{"offset": [1], "amplitude": [[{"re": 1.0}]]},
                                                      {"offset": [1], "amplitude": [[1.0, 2.0]]}]}
    with pytest.raises(ModelError) as excinfo:
        model_from_dict(json.loads(json.dumps(bad_term)))
    assert excinfo.value.term_index == 1
