"""Writers for run artifacts: CSV tables, PGM rasters, SVG figures and the run manifest."""
from __future__ import annotations

import csv
import json
import os
import platform
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import scipy  # noqa: E402

from realspace import RealSpaceOperator  # noqa: E402

plt.rcParams["svg.hashsalt"] = "nhskin"


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Floats are written with repr so values round-trip exactly."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def write_matrix_csv(path: str, op: RealSpaceOperator) -> str:
    rows, cols = np.nonzero(op.matrix)
    values = op.matrix[rows, cols]
    return write_csv(path, ["row", "col", "re", "im"],
                     zip(rows, cols, values.real, values.imag))


def write_pgm(path: str, occupancy: np.ndarray) -> str:
    """Binary PGM, x to the right and y upward; occupied cells are white."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    image = (np.asarray(occupancy, dtype=bool).T[::-1] * 255).astype(np.uint8)
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(image.tobytes())
    return path


def _finish(fig, ax, path: str, title: str, xlabel: str, ylabel: str) -> str:
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, linestyle="--", alpha=0.3)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def scatter_svg(
    path: str,
    series: Mapping[str, Tuple[np.ndarray, np.ndarray]],
    title: str,
    xlabel: str = "Re E",
    ylabel: str = "Im E",
    line: Sequence[str] = (),
) -> str:
    """One scatter per labelled (x, y) series; labels listed in ``line`` are drawn as curves."""
    fig, ax = plt.subplots(figsize=(6, 5))
    for label, (x, y) in series.items():
        if label in line:
            ax.plot(x, y, linewidth=1.0, label=label)
        else:
            ax.scatter(x, y, s=6, label=label)
    if len(series) > 1:
        ax.legend()
    return _finish(fig, ax, path, title, xlabel, ylabel)


def heatmap_svg(path: str, grid: np.ndarray, extent: Sequence[float], title: str,
                xlabel: str, ylabel: str) -> str:
    """``grid[i, j]`` is drawn at x = column j, y = row i."""
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(grid, origin="lower", extent=extent, aspect="auto", interpolation="nearest", cmap="viridis")
    fig.colorbar(image, ax=ax)
    return _finish(fig, ax, path, title, xlabel, ylabel)


def format_complex(value: complex) -> str:
    """``a+bi`` text that ``run.parse_complex`` reads back exactly."""
    value = complex(value)
    sign = "-" if np.copysign(1.0, value.imag) < 0 else "+"
    return f"{value.real!r}{sign}{abs(value.imag)!r}i"


def _json_default(value):
    if isinstance(value, (complex, np.complexfloating)):
        return format_complex(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_manifest(out_dir: str, config: Mapping, outputs: List[str], seeds: Mapping[str, int] | None = None) -> str:
    """Echo of the run configuration, library versions, seeds and produced files."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "manifest.json")
    manifest = {
        "config": dict(config),
        "versions": versions(),
        "seeds": dict(seeds or {}),
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=_json_default)
    return path
