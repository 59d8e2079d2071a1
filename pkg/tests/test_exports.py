from __future__ import annotations

import json

import numpy as np

import run
from exports import format_complex, heatmap_svg, scatter_svg, write_csv, write_manifest, write_matrix_csv, write_pgm
from realspace import build


def test_csv_cells_round_trip_floats(tmp_path) -> None:
    path = write_csv(str(tmp_path / "t.csv"), ["a", "b", "c", "d"], [[1, 0.1, True, None], [np.int64(2), np.float64(1 / 3), False, "x"]])
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines == ["a,b,c,d", "1,0.1,true,", "2,0.3333333333333333,false,x"]
    assert float(lines[2].split(",")[1]) == 1 / 3


def test_matrix_csv_lists_nonzero_entries(tmp_path, hn) -> None:
    path = write_matrix_csv(str(tmp_path / "h.csv"), build(hn, 3))
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "row,col,re,im"
    assert len(lines) == 1 + 4
    assert "0,1,0.5,0.0" in lines


def test_pgm_header_and_orientation(tmp_path) -> None:
    occupancy = np.zeros((4, 3), dtype=bool)
    occupancy[0, 0] = True
    path = write_pgm(str(tmp_path / "a.pgm"), occupancy)
    data = open(path, "rb").read()
    header = b"P5\n4 3\n255\n"
    assert data.startswith(header)
    pixels = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(3, 4)
    assert pixels[2, 0] == 255 and pixels.sum() == 255


def test_svg_writers_are_deterministic(tmp_path) -> None:
    x = np.linspace(0, 1, 5)
    first = scatter_svg(str(tmp_path / "a.svg"), {"s": (x, x ** 2), "l": (x, x)}, "t", line=("l",))
    second = scatter_svg(str(tmp_path / "b.svg"), {"s": (x, x ** 2), "l": (x, x)}, "t", line=("l",))
    assert open(first, "rb").read() == open(second, "rb").read()
    heat = heatmap_svg(str(tmp_path / "h.svg"), np.eye(3), [0, 1, 0, 1], "h", "x", "y")
    assert open(heat, encoding="utf-8").read().lstrip().startswith("<?xml")


def test_manifest_records_config_versions_and_outputs(tmp_path) -> None:
    path = write_manifest(str(tmp_path), {"command": "spectrum", "base": 1j}, [str(tmp_path / "b.csv"), "x/a.csv"], {"disorder": 42})
    manifest = json.loads(open(path, encoding="utf-8").read())
    assert manifest["config"] == {"command": "spectrum", "base": "0.0+1.0i"}
    assert manifest["outputs"] == ["a.csv", "b.csv"]
    assert manifest["seeds"] == {"disorder": 42}
    assert {"python", "numpy", "scipy", "matplotlib"} <= set(manifest["versions"])


def test_complex_values_are_written_in_the_cli_notation(tmp_path) -> None:
    assert format_complex(0.3 - 2j) == "0.3-2.0i"
    assert format_complex(np.complex128(-1e-4 + 0.5j)) == "-0.0001+0.5i"
    for value in (0.3 - 2j, 1 / 3 + 1e-17j, complex(-2.5, -0.0), 1e300 - 1e-300j):
        assert run.parse_complex(format_complex(value)) == value

    config = {"omegas": [3 + 0j, np.complex128(2 + 1j)], "sizes": [np.int64(10)], "tol": np.float64(0.5)}
    path = write_manifest(str(tmp_path), config, [], {})
    recorded = json.loads(open(path, encoding="utf-8").read())["config"]
    assert recorded == {"omegas": ["3.0+0.0i", "2.0+1.0i"], "sizes": [10], "tol": 0.5}
