from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Callable, Dict, List

import numpy as np

from errors import NHSkinError
from exports import heatmap_svg, scatter_svg, write_csv, write_manifest, write_matrix_csv, write_pgm
from localization import ClassifierThresholds, ProfileKind, biorthogonal_density, classify_state, density_profile
from model import BUILTINS, LatticeModel, bloch_stack, load_model, make_builtin
from nonbloch import GBZ_TOL, AmoebaSampling, amoeba_points, gbz_curve, has_hole
from realspace import BoundarySpec, add_onsite_disorder, build
from response import (
    boundary_crossover,
    crossover_epsilon,
    funnel_model,
    reciprocity_test,
    sensor_slope,
    sensor_sweep,
    susceptibility,
    time_evolve,
)
from spectral import TOL_BIORTH, eig_biorthogonal, eigenvalues
from topology import GAP_TOL, predict_skin_side, winding_map, winding_number

logger = logging.getLogger(__name__)

FORMATS = ("csv", "svg", "pgm")


def parse_complex(text: str) -> complex:
    """Accept ``a+bi`` (or Python's ``a+bj``)."""
    try:
        return complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: '{text}'") from exc


def parse_complex_list(text: str) -> List[complex]:
    return [parse_complex(item) for item in text.split(",") if item.strip()]


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of integers: '{text}'") from exc


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: '{text}'") from exc


def parse_formats(text: str) -> List[str]:
    formats = [item.strip().lower() for item in text.split(",") if item.strip()]
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown format(s) {', '.join(unknown)}; choose from {', '.join(FORMATS)}")
    return formats


class Run:
    """Output bookkeeping for one command invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out_dir = args.out or os.path.join("exp", args.command)
        self.outputs: List[str] = []
        self.seeds: Dict[str, int] = {}

    def wants(self, fmt: str) -> bool:
        return fmt in self.args.formats

    def path(self, name: str) -> str:
        path = os.path.join(self.out_dir, name)
        self.outputs.append(path)
        return path

    def finish(self) -> None:
        write_manifest(self.out_dir, vars(self.args), self.outputs, self.seeds)
        logger.info("Wrote %d file(s) and manifest.json to %s", len(self.outputs), self.out_dir)


def resolve_model(args: argparse.Namespace, parser: argparse.ArgumentParser) -> LatticeModel:
    if args.model and args.builtin:
        parser.error("use either --model or --builtin, not both")
    if args.model:
        return load_model(args.model)
    if not args.builtin:
        parser.error("a model is required: --model FILE or --builtin NAME")
    _, names = BUILTINS[args.builtin]
    missing = [f"--{name}" for name in names if getattr(args, name) is None]
    if missing:
        parser.error(f"--builtin {args.builtin} needs {', '.join(missing)}")
    return make_builtin(args.builtin, {name: getattr(args, name) for name in names})


def _sizes(args: argparse.Namespace, model: LatticeModel, default_1d: int, default_2d: int = 20) -> List[int]:
    if args.sizes:
        sizes = list(args.sizes)
        return sizes * model.dimension if len(sizes) == 1 else sizes
    return [default_1d] if model.dimension == 1 else [default_2d] * model.dimension


def _spectrum_rows(values: np.ndarray, kappa: np.ndarray | None = None, states: np.ndarray | None = None):
    """``states`` holds one right eigenvector per column; its moduli become per-site columns."""
    for i, value in enumerate(values):
        row = [i, value.real, value.imag]
        if kappa is not None:
            row.append(kappa[i])
        if states is not None:
            row.extend(np.abs(states[:, i]))
        yield row


# ---------------- Commands ---------------- #
def cmd_spectrum(run: Run, model: LatticeModel) -> None:
    args = run.args
    boundary = BoundarySpec.parse(args.boundary, model.dimension)
    op = build(model, _sizes(args, model, 100), boundary)
    if args.disorder:
        op = add_onsite_disorder(op, args.disorder, args.seed)
        run.seeds["disorder"] = args.seed
    system = eig_biorthogonal(op, tol_biorth=args.biorth_tol)
    values = system.eigenvalues

    if model.dimension == 1:
        ks = np.linspace(-np.pi, np.pi, args.k_points, endpoint=False)
        bands = np.sort_complex(np.linalg.eigvals(bloch_stack(model, ks[:, None])))
        pbc = bands.ravel()
        pbc_rows = ([k, b, bands[i, b].real, bands[i, b].imag] for i, k in enumerate(ks) for b in range(model.bands))
        pbc_header = ["k", "band", "re", "im"]
    else:
        pbc = eigenvalues(build(model, op.sizes, BoundarySpec.pbc(model.dimension)))
        pbc_rows = _spectrum_rows(pbc)
        pbc_header = ["index", "re", "im"]

    label = boundary.describe()
    if run.wants("csv"):
        write_csv(run.path("pbc_curve.csv"), pbc_header, pbc_rows)
        header = ["index", "re", "im", "kappa"]
        states = system.right if args.states else None
        if args.states:
            header += [f"abs_psi_{site}" for site in range(op.n_sites)]
        write_csv(run.path("spectrum.csv"), header, _spectrum_rows(values, system.kappa_per_state, states))
    if args.matrix:
        run.outputs.append(write_matrix_csv(args.matrix, op))
    if run.wants("svg"):
        scatter_svg(run.path("spectrum.svg"),
                    {"PBC": (pbc.real, pbc.imag), label.upper(): (values.real, values.imag)},
                    f"{model.label()}, sizes {op.sizes}")
    print(f"{label}: {len(values)} states, max |Im E| = {np.abs(values.imag).max():.3e}, "
          f"condition = {system.condition:.3e}, ep_flag = {str(system.ep_flag).lower()}")
    print(f"pbc semiaxes: re {np.abs(pbc.real).max():.6g}, im {np.abs(pbc.imag).max():.6g}")


def cmd_winding(run: Run, model: LatticeModel) -> None:
    args = run.args
    result = winding_number(model, args.base, form=args.form, gap_tol=args.gap_tol)
    side = predict_skin_side(result)
    print(f"w = {result.w}")
    print(f"raw integral = {result.raw_integral.real:.8f}{result.raw_integral.imag:+.2e}i "
          f"({result.k_samples_used} k samples)")
    print(f"predicted skin side: {side.value if side else 'none'}")
    if args.grid:
        re_min, re_max, im_min, im_max, count = args.grid
        re_values = np.linspace(re_min, re_max, int(count))
        im_values = np.linspace(im_min, im_max, int(count))
        grid = winding_map(model, re_values, im_values, form=args.form, gap_tol=args.gap_tol)
        if run.wants("csv"):
            rows = ([re, im, "" if np.isnan(grid[i, j]) else int(grid[i, j])]
                    for i, im in enumerate(im_values) for j, re in enumerate(re_values))
            write_csv(run.path("winding_map.csv"), ["re_EB", "im_EB", "w"], rows)
        if run.wants("svg"):
            heatmap_svg(run.path("winding_map.svg"), grid, [re_min, re_max, im_min, im_max],
                        f"w(E_B), {model.label()}", "Re E_B", "Im E_B")


def cmd_gbz(run: Run, model: LatticeModel) -> None:
    args = run.args
    samples = gbz_curve(model, n_seed=args.n_seed, refine_tol=args.refine_tol, gbz_tol=args.gbz_tol)
    moduli = np.array([abs(s.beta) for s in samples])
    if run.wants("csv"):
        rows = ([s.beta.real, s.beta.imag, s.energy.real, s.energy.imag, s.modulus_residual, s.side.value]
                for s in samples)
        write_csv(run.path("gbz.csv"), ["re_beta", "im_beta", "re_E", "im_E", "residual", "side"], rows)
    if run.wants("svg"):
        circle = np.exp(1j * np.linspace(0, 2 * np.pi, 361))
        betas = np.array([s.beta for s in samples])
        scatter_svg(run.path("gbz.svg"),
                    {"GBZ": (betas.real, betas.imag), "|beta| = 1": (circle.real, circle.imag)},
                    f"GBZ, {model.label()}", "Re beta", "Im beta", line=("|beta| = 1",))
    sides = sorted({s.side.value for s in samples})
    print(f"samples: {len(samples)}")
    print(f"|beta| range: [{moduli.min():.9f}, {moduli.max():.9f}]")
    print(f"max ||beta| - 1| = {np.abs(moduli - 1).max():.3e}")
    print(f"sides: {', '.join(sides)}")


def cmd_amoeba(run: Run, model: LatticeModel) -> None:
    args = run.args
    sampling = AmoebaSampling(
        window=tuple(args.window),
        resolution=args.resolution,
        r_x_samples=args.r_samples or args.resolution,
        phase_samples=args.phase_samples,
        per_branch=args.per_branch,
        keep_points=run.wants("csv"),
    )
    raster = amoeba_points(model, args.energy, sampling)
    hole = has_hole(raster, args.min_hole_cells)
    if run.wants("pgm"):
        write_pgm(run.path("amoeba.pgm"), raster.occupancy)
        if raster.branches is not None:
            for a, branch in enumerate(raster.branches):
                write_pgm(run.path(f"amoeba_branch{a}.pgm"), branch)
    if run.wants("csv"):
        write_csv(run.path("amoeba_points.csv"), ["log_abs_beta_x", "log_abs_beta_y"], raster.points)
    if run.wants("svg"):
        x_min, x_max, y_min, y_max = raster.window
        heatmap_svg(run.path("amoeba.svg"), raster.occupancy.T.astype(float), [x_min, x_max, y_min, y_max],
                    f"amoeba at E = {args.energy}", "log|beta_x|", "log|beta_y|")
    print(f"hole: {str(hole).lower()}")
    print(f"obc member: {str(not hole).lower()}")
    print(f"failed samples: {raster.failed_samples} of {raster.total_samples}")


def cmd_localize(run: Run, model: LatticeModel) -> None:
    args = run.args
    boundary = BoundarySpec.parse(args.boundary, model.dimension)
    op = build(model, _sizes(args, model, 50), boundary)
    system = eig_biorthogonal(op, tol_biorth=args.biorth_tol)
    thresholds = ClassifierThresholds(args.edge_fraction, args.participation, args.edge_region)
    classes, profile_rows = [], []
    for i in range(len(system)):
        E, L, R = system.pair(i)
        state = classify_state(L, R, op, thresholds)
        classes.append([i, E.real, E.imag, state.label.value, state.side.value if state.side else "none",
                        state.metrics["right_edge_fraction"], state.metrics["biorthogonal_participation_ratio_scaled"]])
        profiles = [density_profile(R, op), density_profile(L, op, ProfileKind.LEFT), biorthogonal_density(L, R, op)]
        for profile in profiles:
            for site, weight in enumerate(np.ravel(profile.weights)):
                profile_rows.append([i, site, complex(weight).real, complex(weight).imag, profile.kind.value])
    if run.wants("csv"):
        write_csv(run.path("classes.csv"),
                  ["index", "re_E", "im_E", "label", "side", "right_edge_fraction", "pr_scaled"], classes)
        write_csv(run.path("profiles.csv"), ["state", "site", "re", "im", "kind"], profile_rows)
    counts: Dict[str, int] = {}
    for row in classes:
        key = row[3] if row[4] == "none" else f"{row[3]}/{row[4]}"
        counts[key] = counts.get(key, 0) + 1
    for key in sorted(counts):
        print(f"{key}: {counts[key]}")


def cmd_funnel(run: Run, model: LatticeModel | None) -> None:
    args = run.args
    op = funnel_model(args.jl, args.jr, args.n_half)
    psi0 = np.zeros(op.n_sites, dtype=complex)
    psi0[args.start] = 1.0
    trajectory = time_evolve(op, psi0, args.t_max, args.dt)
    final = trajectory.densities[-1]
    centre = args.n_half - 0.5
    near = np.abs(np.arange(op.n_sites) - centre) <= args.window
    if run.wants("csv"):
        rows = ([t, site, density]
                for t, snapshot in zip(trajectory.times[::args.stride], trajectory.densities[::args.stride])
                for site, density in enumerate(snapshot))
        write_csv(run.path("trajectory.csv"), ["t", "site", "density"], rows)
    if run.wants("svg"):
        heatmap_svg(run.path("trajectory.svg"), trajectory.densities[::args.stride],
                    [0, op.n_sites - 1, 0, trajectory.times[-1]], "funnel density", "site", "t")
    print(f"final density within {args.window} sites of the interface: {final[near].sum():.4f}")
    print(f"total log growth: {trajectory.log_growth.sum():.6g}")


def cmd_sensor(run: Run, model: LatticeModel) -> None:
    args = run.args
    points = sensor_sweep(model, args.epsilon, args.n_list, args.reference)
    if run.wants("csv"):
        write_csv(run.path("sensor.csv"), ["N", "delta_E"], ([p.N, p.delta_E] for p in points))
    if run.wants("svg"):
        scatter_svg(run.path("sensor.svg"),
                    {"ln dE": (np.array([p.N for p in points]), np.log([max(p.delta_E, 1e-300) for p in points]))},
                    f"sensor, epsilon = {args.epsilon}", "N", "ln delta_E")
    for p in points:
        print(f"N = {p.N}: delta_E = {p.delta_E:.6e}")
    if all(p.delta_E > 0 for p in points) and len(points) > 1:
        print(f"slope = {sensor_slope(points):.6g}")


def cmd_crossover(run: Run, model: LatticeModel) -> None:
    args = run.args
    N = args.sizes[0] if args.sizes else 40
    epsilons = args.epsilons or list(np.logspace(-16, 0, 17))
    points = boundary_crossover(model, N, epsilons)
    # log axis and epsilon* only see positive couplings
    shown = [p for p in points if p.epsilon > 0]
    if run.wants("csv"):
        write_csv(run.path("crossover.csv"), ["epsilon", "spectral_distance", "max_imag"],
                  ([p.epsilon, p.spectral_distance, p.max_imag] for p in points))
    if run.wants("svg") and shown:
        scatter_svg(run.path("crossover.svg"),
                    {"distance": (np.log10([p.epsilon for p in shown]), [p.spectral_distance for p in shown])},
                    f"boundary crossover, N = {N}", "log10 epsilon", "Hausdorff distance to OBC")
    if shown:
        print(f"epsilon* = {crossover_epsilon(shown):.6e}")
    else:
        print("epsilon* = n/a (no epsilon > 0 sampled)")


def cmd_reciprocity(run: Run, model: LatticeModel) -> None:
    args = run.args
    boundary = BoundarySpec.parse(args.boundary, model.dimension)
    op = build(model, _sizes(args, model, 20, 6), boundary)
    result = reciprocity_test(op, args.omegas, tol=args.tol)
    if run.wants("csv"):
        rows = ([w.real, w.imag, susceptibility(op, w).asymmetry] for w in args.omegas)
        write_csv(run.path("reciprocity.csv"), ["re_omega", "im_omega", "asymmetry"], rows)
    print(f"reciprocal: {str(result.reciprocal).lower()}")
    print(f"max asymmetry = {result.max_asymmetry:.6e}")


COMMANDS: Dict[str, Callable] = {
    "spectrum": cmd_spectrum,
    "winding": cmd_winding,
    "gbz": cmd_gbz,
    "amoeba": cmd_amoeba,
    "localize": cmd_localize,
    "funnel": cmd_funnel,
    "sensor": cmd_sensor,
    "crossover": cmd_crossover,
    "reciprocity": cmd_reciprocity,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    model = common.add_argument_group("model")
    model.add_argument('--model', type=str, default=None, help='JSON model file.')
    model.add_argument('--builtin', choices=sorted(BUILTINS), default=None, help='Built-in model name.')
    model.add_argument('--jl', type=float, default=None, help='Hopping J_L (hatano-nelson, asym2d, funnel).')
    model.add_argument('--jr', type=float, default=None, help='Hopping J_R (hatano-nelson, asym2d, funnel).')
    model.add_argument('--t1', type=float, default=None, help='Intra-cell hopping t1 (nh-ssh).')
    model.add_argument('--t2', type=float, default=None, help='Inter-cell hopping t2 (nh-ssh).')
    model.add_argument('--gamma', type=float, default=None, help='Intra-cell asymmetry gamma (nh-ssh).')
    model.add_argument('--tp', type=float, default=None, help="Diagonal hopping t' (asym2d).")
    common.add_argument('-N', '--sizes', type=int, nargs='+', default=None, help='Cells per axis.')
    common.add_argument('--out', type=str, default=None, help='Output directory (default exp/<command>).')
    common.add_argument('--format', type=parse_formats, default=list(FORMATS), dest='formats',
                        help='Comma-separated output formats: csv,svg,pgm.')
    common.add_argument('--gap-tol', type=float, default=GAP_TOL, dest='gap_tol', help='Point-gap tolerance.')
    common.add_argument('--gbz-tol', type=float, default=GBZ_TOL, dest='gbz_tol', help='GBZ modulus tolerance.')
    common.add_argument('--biorth-tol', type=float, default=TOL_BIORTH, dest='biorth_tol',
                        help='Biorthogonality tolerance for the EP flag.')
    common.add_argument('--quiet', action='store_true', help='Only log warnings.')

    parser = argparse.ArgumentParser(description='Non-Hermitian skin-effect analysis toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('spectrum', parents=[common], help='OBC/PBC/coupled spectra with the Bloch curve.')
    p.add_argument('--boundary', type=str, default='obc', help='obc, pbc or coupled:EPS.')
    p.add_argument('--k-points', type=int, default=512, dest='k_points', help='k samples of the Bloch curve.')
    p.add_argument('--disorder', type=float, default=0.0, help='Uniform on-site disorder strength.')
    p.add_argument('--seed', type=int, default=42, help='Disorder seed.')
    p.add_argument('--matrix', type=str, default=None, help='Also write the nonzero matrix entries to this CSV.')
    p.add_argument('--states', action='store_true', help='Add per-site |psi| columns of the right eigenvectors.')

    p = sub.add_parser('winding', parents=[common], help='Spectral winding number around a base point.')
    p.add_argument('--base', type=parse_complex, default=0j, help='Base point E_B, e.g. 0+0i.')
    p.add_argument('--form', choices=['printed', 'shifted'], default='printed',
                   help='Loop det H(k) - E_B (printed) or det[H(k) - E_B] (shifted).')
    p.add_argument('--grid', type=float, nargs=5, default=None, metavar=('RE_MIN', 'RE_MAX', 'IM_MIN', 'IM_MAX', 'N'),
                   help='Also write the winding map over an N x N base-point grid.')

    p = sub.add_parser('gbz', parents=[common], help='Generalized Brillouin zone of a 1D model.')
    p.add_argument('--n-seed', type=int, default=400, dest='n_seed', help='OBC size used for seeds.')
    p.add_argument('--refine-tol', type=float, default=1e-8, dest='refine_tol', help='Refinement tolerance.')

    p = sub.add_parser('amoeba', parents=[common], help='Amoeba hole test for a 2D model.')
    p.add_argument('--energy', type=parse_complex, required=True, help='Energy E, e.g. 0.3+0i.')
    p.add_argument('--window', type=float, nargs=4, default=[-3.0, 3.0, -3.0, 3.0],
                   metavar=('X_MIN', 'X_MAX', 'Y_MIN', 'Y_MAX'), help='Log-modulus window.')
    p.add_argument('--resolution', type=int, default=300, help='Raster cells per axis.')
    p.add_argument('--r-samples', type=int, default=None, dest='r_samples', help='log|beta_x| samples.')
    p.add_argument('--phase-samples', type=int, default=600, dest='phase_samples', help='arg(beta_x) samples.')
    p.add_argument('--min-hole-cells', type=int, default=4, dest='min_hole_cells', help='Smallest hole counted.')
    p.add_argument('--per-branch', action='store_true', dest='per_branch', help='Also write one raster per branch.')

    p = sub.add_parser('localize', parents=[common], help='Profiles and skin/topological classification.')
    p.add_argument('--boundary', type=str, default='obc', help='obc, pbc or coupled:EPS.')
    p.add_argument('--edge-fraction', type=float, default=0.5, dest='edge_fraction', help='Edge weight threshold.')
    p.add_argument('--participation', type=float, default=0.2, help='Biorthogonal PR threshold / N.')
    p.add_argument('--edge-region', type=float, default=0.1, dest='edge_region', help='Edge share of cells per side.')

    p = sub.add_parser('funnel', parents=[common], help='Time evolution in the funnel chain.')
    p.add_argument('--n-half', type=int, default=30, dest='n_half', help='Sites per half chain.')
    p.add_argument('--start', type=int, default=5, help='Initially excited site.')
    p.add_argument('--t-max', type=float, default=40.0, dest='t_max', help='Final time.')
    p.add_argument('--dt', type=float, default=0.05, help='Time step.')
    p.add_argument('--stride', type=int, default=10, help='Write every n-th time step.')
    p.add_argument('--window', type=int, default=5, help='Sites around the interface counted as accumulated.')

    p = sub.add_parser('sensor', parents=[common], help='End-coupling sensitivity sweep.')
    p.add_argument('--epsilon', type=parse_complex, default=1e-6, help='End coupling.')
    p.add_argument('--n-list', type=parse_int_list, default=[10, 14, 18, 22], dest='n_list', help='Sizes, e.g. 10,14.')
    p.add_argument('--reference', type=parse_complex, default=0j, help='Reference energy of the tracked state.')

    p = sub.add_parser('crossover', parents=[common], help='OBC to PBC spectral crossover.')
    p.add_argument('--epsilons', type=parse_float_list, default=None, help='Comma-separated couplings.')

    p = sub.add_parser('reciprocity', parents=[common], help='Susceptibility non-reciprocity test.')
    p.add_argument('--boundary', type=str, default='obc', help='obc, pbc or coupled:EPS.')
    p.add_argument('--omegas', type=parse_complex_list, default=[3 + 0j, 2 + 1j], help='Frequencies, e.g. 3,2+1i.')
    p.add_argument('--tol', type=float, default=1e-10, help='Asymmetry tolerance.')
    return parser


def main(argv: List[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    run = Run(args)
    try:
        model = None if args.command == "funnel" else resolve_model(args, parser)
        if args.command == "funnel":
            if args.jl is None or args.jr is None:
                parser.error("funnel needs --jl and --jr")
            if not 0 <= args.start < 2 * args.n_half:
                parser.error(f"--start must lie in [0, {2 * args.n_half})")
        COMMANDS[args.command](run, model)
        run.finish()
    except NHSkinError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
