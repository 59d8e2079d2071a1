from __future__ import annotations

import argparse
import logging
import os
from typing import Callable, Dict, List

import matplotlib.pyplot as plt
import numpy as np

from exports import write_csv, write_manifest, write_pgm
from localization import ProfileKind, biorthogonal_density, density_profile
from model import builtin_2d, builtin_hatano_nelson, builtin_nh_ssh
from nonbloch import AmoebaSampling, amoeba_points, has_hole
from realspace import BoundarySpec, build
from spectral import eig_biorthogonal, eigenvalues

logger = logging.getLogger(__name__)


def scenario_fig1(out_dir: str) -> List[str]:
    """Hatano-Nelson chain: PBC ellipse against the real OBC spectrum, and skin profiles."""
    model = builtin_hatano_nelson(0.5, 1.0)
    obc = build(model, 40, BoundarySpec.obc())
    system = eig_biorthogonal(obc)
    pbc = eigenvalues(build(model, 40, BoundarySpec.pbc()))
    profiles = np.array([density_profile(system.right[:, i], obc).weights for i in range(len(system))])

    spectra_csv = write_csv(os.path.join(out_dir, "fig1_spectra.csv"), ["boundary", "re", "im"],
                            [["pbc", e.real, e.imag] for e in pbc] + [["obc", e.real, e.imag] for e in system.eigenvalues])
    profiles_csv = write_csv(os.path.join(out_dir, "fig1_profiles.csv"), ["state", "site", "weight"],
                             ([i, n, w] for i, row in enumerate(profiles) for n, w in enumerate(row)))

    plt.figure(figsize=(8, 6))
    ax1 = plt.subplot(2, 1, 1)
    ax2 = plt.subplot(2, 1, 2)
    ax1.scatter(pbc.real, pbc.imag, s=8, label="PBC")
    ax1.scatter(system.eigenvalues.real, system.eigenvalues.imag, s=8, label="OBC")
    ax1.set_xlabel("Re E")
    ax1.set_ylabel("Im E")
    for i in range(0, len(system), 8):
        ax2.plot(profiles[i], label=f"E = {system.eigenvalues[i].real:.2f}")
    ax2.set_xlabel("site")
    ax2.set_ylabel("|psi_R|^2")
    return [spectra_csv, profiles_csv, _save(os.path.join(out_dir, "fig1.svg"), (ax1, ax2))]


def scenario_fig2(out_dir: str) -> List[str]:
    """Anisotropic SSH chain: right, left and biorthogonal profiles of the end state and a bulk state."""
    model = builtin_nh_ssh(0.6, 1.0, 0.3)
    op = build(model, 40, BoundarySpec.obc())
    system = eig_biorthogonal(op)
    end = system.nearest(0.0)
    bulk = int(np.argmax(system.eigenvalues.real))
    rows = []
    curves = {}
    for name, index in (("end", end), ("bulk", bulk)):
        _, L, R = system.pair(index)
        for profile in (density_profile(R, op), density_profile(L, op, ProfileKind.LEFT), biorthogonal_density(L, R, op)):
            curves[(name, profile.kind.value)] = profile.weights
            rows.extend([name, profile.kind.value, n, complex(w).real, complex(w).imag]
                        for n, w in enumerate(profile.weights))
    data_csv = write_csv(os.path.join(out_dir, "fig2_profiles.csv"), ["state", "kind", "cell", "re", "im"], rows)

    plt.figure(figsize=(8, 6))
    ax1 = plt.subplot(2, 1, 1)
    ax2 = plt.subplot(2, 1, 2, sharex=ax1)
    for (name, kind), weights in curves.items():
        ax = ax1 if name == "end" else ax2
        ax.plot(np.abs(weights), marker="o", markersize=3, label=kind)
        ax.set_ylabel(f"{name} state weight")
    ax2.set_xlabel("cell")
    return [data_csv, _save(os.path.join(out_dir, "fig2.svg"), (ax1, ax2))]


def scenario_fig3(out_dir: str) -> List[str]:
    """2D model: amoeba of an energy inside the OBC spectrum and of one outside it."""
    model = builtin_2d(0.5, 1.0, 0.2)
    spectrum = eigenvalues(build(model, (20, 20), BoundarySpec.obc(2)))
    inside = complex(spectrum[len(spectrum) // 2])
    outside = complex(spectrum.real.max() + 1.0)
    sampling = AmoebaSampling()
    outputs, rows, rasters = [], [], {}
    for name, energy in (("inside", inside), ("outside", outside)):
        raster = amoeba_points(model, energy, sampling)
        hole = has_hole(raster)
        rasters[name] = (energy, raster, hole)
        rows.append([name, energy.real, energy.imag, hole])
        outputs.append(write_pgm(os.path.join(out_dir, f"fig3_{name}.pgm"), raster.occupancy))
        logger.info("fig3 %s: E=%s hole=%s", name, energy, hole)
    outputs.append(write_csv(os.path.join(out_dir, "fig3_holes.csv"), ["case", "re_E", "im_E", "hole"], rows))

    plt.figure(figsize=(10, 4.5))
    axes = []
    for k, (name, (energy, raster, hole)) in enumerate(rasters.items()):
        ax = plt.subplot(1, 2, k + 1)
        ax.imshow(raster.occupancy.T, origin="lower", extent=raster.window, cmap="Greys", interpolation="nearest")
        ax.set_title(f"E = {energy.real:.3f}{energy.imag:+.3f}i, hole: {str(hole).lower()}")
        ax.set_xlabel("log|beta_x|")
        ax.set_ylabel("log|beta_y|")
        axes.append(ax)
    outputs.append(_save(os.path.join(out_dir, "fig3.svg"), axes, legend=False))
    return outputs


def _save(output_path: str, axes, legend: bool = True) -> str:
    for ax in axes:
        if legend:
            ax.legend(fontsize=7)
        ax.grid(True, linestyle="--", alpha=0.3)
    os.makedirs(os.path.dirname(output_path), exist_ok=True)
    plt.tight_layout()
    plt.savefig(output_path, format="svg", metadata={"Date": None})
    plt.close()
    return output_path


DEFAULT_SCENARIOS: Dict[str, Callable[[str], List[str]]] = {
    "fig1": scenario_fig1,
    "fig2": scenario_fig2,
    "fig3": scenario_fig3,
}


def main(argv: List[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="Reproduce the spectrum, end-state and amoeba figures.")
    parser.add_argument(
        "--scenarios",
        type=str,
        default="fig1,fig2,fig3",
        help="Comma-separated scenario keys to run. Available: fig1, fig2, fig3.",
    )
    parser.add_argument("--output-dir", type=str, default="exp/figures", dest="output_dir",
                        help="Directory for CSV and SVG outputs.")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

    selected = [name.strip() for name in args.scenarios.split(",") if name.strip()]
    outputs: List[str] = []
    for label in selected:
        if label not in DEFAULT_SCENARIOS:
            raise ValueError(f"Unknown scenario '{label}'. Available keys: {', '.join(DEFAULT_SCENARIOS)}")
        logger.info("Running scenario %s", label)
        outputs.extend(DEFAULT_SCENARIOS[label](args.output_dir))

    write_manifest(args.output_dir, vars(args), outputs)
    for path in outputs:
        print(f"Saved {path}")


if __name__ == "__main__":
    main()
