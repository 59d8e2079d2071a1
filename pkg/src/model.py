"""Lattice models as Laurent-polynomial matrix functions.

A hopping term with offset ``delta`` is the coefficient of
``c_n^dagger c_{n+delta}``, so

    H(k)    = sum_delta A_delta exp(i k . delta)
    H(beta) = sum_delta A_delta prod_i beta_i ** delta_i

With this convention the Hatano-Nelson built-in has the dispersion
``E(k) = (J_L + J_R) cos k + i (J_L - J_R) sin k``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Sequence, Tuple

import numpy as np

from errors import ModelError

logger = logging.getLogger(__name__)

# Coefficients of det[E - H(beta)] below this fraction of the largest one
# are FFT round-off and are stored as exact zeros.
_COEFF_CUTOFF = 1e-13


@dataclass(frozen=True, eq=False)
class HoppingTerm:
    offset: Tuple[int, ...]
    amplitude: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "offset", tuple(int(x) for x in self.offset))
        amplitude = np.atleast_2d(np.asarray(self.amplitude, dtype=complex))
        amplitude.setflags(write=False)
        object.__setattr__(self, "amplitude", amplitude)


@dataclass(frozen=True, eq=False)
class LatticeModel:
    """Unit cell with ``bands`` orbitals and a finite set of hopping terms.

    Terms sharing an offset are summed at construction, so a Hamiltonian can
    be written down term by term.
    """

    dimension: int
    bands: int
    terms: Tuple[HoppingTerm, ...]
    name: str | None = None

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ModelError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.bands < 1:
            raise ModelError(f"bands must be >= 1, got {self.bands}")
        merged: Dict[Tuple[int, ...], np.ndarray] = {}
        for index, term in enumerate(self.terms):
            if not isinstance(term, HoppingTerm):
                term = HoppingTerm(*term)
            if len(term.offset) != self.dimension:
                raise ModelError(
                    f"offset {term.offset} has length {len(term.offset)}, expected {self.dimension}",
                    index,
                )
            if term.amplitude.shape != (self.bands, self.bands):
                raise ModelError(
                    f"amplitude shape {term.amplitude.shape}, expected {(self.bands, self.bands)}",
                    index,
                )
            if not np.all(np.isfinite(term.amplitude)):
                raise ModelError("amplitude has non-finite entries", index)
            if term.offset in merged:
                merged[term.offset] = merged[term.offset] + term.amplitude
            else:
                merged[term.offset] = np.array(term.amplitude)
        if not any(np.any(amplitude != 0) for amplitude in merged.values()):
            raise ModelError("model has no nonzero hopping amplitude")
        terms = tuple(HoppingTerm(offset, merged[offset]) for offset in sorted(merged))
        object.__setattr__(self, "terms", terms)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([term.offset for term in self.terms], dtype=int)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.stack([term.amplitude for term in self.terms])

    def hopping_range(self) -> np.ndarray:
        """Largest |delta_i| per axis."""
        return np.abs(self.offsets).max(axis=0)

    def scaled(self, factor: complex) -> "LatticeModel":
        return LatticeModel(
            self.dimension,
            self.bands,
            tuple(HoppingTerm(t.offset, factor * t.amplitude) for t in self.terms),
            self.name,
        )

    def label(self) -> str:
        return self.name or f"model(d={self.dimension}, B={self.bands})"


# ---------------- Built-in models ---------------- #
def builtin_hatano_nelson(J_L: float, J_R: float) -> LatticeModel:
    terms = (HoppingTerm((1,), [[J_L]]), HoppingTerm((-1,), [[J_R]]))
    return LatticeModel(1, 1, terms, f"hatano-nelson(J_L={J_L}, J_R={J_R})")


def builtin_nh_ssh(t1: float, t2: float, gamma: float) -> LatticeModel:
    """Anisotropic SSH chain; orbital 0 is A, orbital 1 is B.

    The inter-cell bond joins B_n and A_{n+1} symmetrically.
    """
    intra = np.array([[0.0, t1 + gamma], [t1 - gamma, 0.0]])
    to_previous = np.array([[0.0, t2], [0.0, 0.0]])
    to_next = np.array([[0.0, 0.0], [t2, 0.0]])
    terms = (
        HoppingTerm((0,), intra),
        HoppingTerm((-1,), to_previous),
        HoppingTerm((1,), to_next),
    )
    return LatticeModel(1, 2, terms, f"nh-ssh(t1={t1}, t2={t2}, gamma={gamma})")


def builtin_2d(J_L: float, J_R: float, tp: float) -> LatticeModel:
    terms = [
        HoppingTerm((1, 0), [[J_L]]),
        HoppingTerm((0, -1), [[J_L]]),
        HoppingTerm((-1, 0), [[J_R]]),
        HoppingTerm((0, 1), [[J_R]]),
    ]
    terms += [HoppingTerm(offset, [[tp]]) for offset in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
    return LatticeModel(2, 1, tuple(terms), f"asym2d(J_L={J_L}, J_R={J_R}, tp={tp})")


BUILTINS: Dict[str, Tuple[Callable[..., LatticeModel], Tuple[str, ...]]] = {
    "hatano-nelson": (builtin_hatano_nelson, ("jl", "jr")),
    "nh-ssh": (builtin_nh_ssh, ("t1", "t2", "gamma")),
    "asym2d": (builtin_2d, ("jl", "jr", "tp")),
}


def make_builtin(name: str, params: Dict[str, float]) -> LatticeModel:
    if name not in BUILTINS:
        raise ModelError(f"Unknown built-in '{name}'. Available: {', '.join(BUILTINS)}")
    builder, names = BUILTINS[name]
    missing = [p for p in names if params.get(p) is None]
    if missing:
        raise ModelError(f"built-in '{name}' needs parameters: {', '.join(missing)}")
    return builder(*(float(params[p]) for p in names))


# ---------------- Evaluation ---------------- #
def _check_vector(model: LatticeModel, values: Sequence, what: str) -> np.ndarray:
    values = np.atleast_1d(np.asarray(values))
    if values.shape[-1] != model.dimension:
        raise ModelError(f"{what} has {values.shape[-1]} components, model dimension is {model.dimension}")
    return values


def bloch(model: LatticeModel, k: Sequence[float]) -> np.ndarray:
    k = _check_vector(model, k, "k").astype(float)
    if not np.all(np.isfinite(k)):
        raise ModelError("k must be finite")
    return bloch_stack(model, k[None, :])[0]


def bloch_stack(model: LatticeModel, ks: np.ndarray) -> np.ndarray:
    """H(k) for a stack of momenta of shape (K, d); returns (K, B, B)."""
    ks = np.asarray(ks, dtype=float).reshape(-1, model.dimension)
    phases = np.exp(1j * ks @ model.offsets.T)
    return np.einsum("kt,tab->kab", phases, model.amplitudes)


def nonbloch(model: LatticeModel, beta: Sequence[complex]) -> np.ndarray:
    beta = _check_vector(model, beta, "beta").astype(complex)
    return nonbloch_stack(model, beta[None, :])[0]


def nonbloch_stack(model: LatticeModel, betas: np.ndarray) -> np.ndarray:
    betas = np.asarray(betas, dtype=complex).reshape(-1, model.dimension)
    if np.any(betas == 0):
        raise ModelError("beta = 0 is a pole of the non-Bloch Hamiltonian")
    weights = np.prod(betas[:, None, :] ** model.offsets[None, :, :], axis=-1)
    return np.einsum("st,tab->sab", weights, model.amplitudes)


# ---------------- Characteristic polynomial ---------------- #
@dataclass(frozen=True, eq=False)
class CharPoly:
    """Laurent coefficients of det[E - H(beta)] at a fixed energy.

    ``coeffs`` maps exponent tuples to coefficients over the full structural
    exponent box ``lower .. upper`` (zeros included), so vanishing leading or
    trailing coefficients stay visible to root finders.
    """

    energy: complex
    lower: Tuple[int, ...]
    upper: Tuple[int, ...]
    coeffs: Dict[Tuple[int, ...], complex] = field(repr=False)

    @property
    def nvars(self) -> int:
        return len(self.lower)

    @property
    def pole_order(self) -> Tuple[int, ...]:
        return tuple(max(0, -lo) for lo in self.lower)

    def as_array(self) -> np.ndarray:
        shape = tuple(hi - lo + 1 for lo, hi in zip(self.lower, self.upper))
        table = np.zeros(shape, dtype=complex)
        for exponent, value in self.coeffs.items():
            table[tuple(e - lo for e, lo in zip(exponent, self.lower))] = value
        return table

    def evaluate(self, beta: Sequence[complex]) -> complex:
        beta = np.atleast_1d(np.asarray(beta, dtype=complex))
        return complex(sum(c * np.prod(beta ** np.array(e)) for e, c in self.coeffs.items()))

    def scale(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    @property
    def leading(self) -> complex:
        """Coefficient of the highest power (1D)."""
        return self.coeffs.get(self.upper, 0j)

    @property
    def trailing(self) -> complex:
        """Coefficient of the lowest power (1D)."""
        return self.coeffs.get(self.lower, 0j)

    def polynomial(self) -> np.ndarray:
        """beta^q P(beta) as an ordinary polynomial, highest power first (1D)."""
        if self.nvars != 1:
            raise ModelError("polynomial() is defined for one variable only")
        return self.as_array()[::-1].copy()

    def in_beta_y(self, beta_x: np.ndarray) -> np.ndarray:
        """Coefficients in beta_y (lowest power first) for each beta_x (2D).

        Returns shape (S, upper_y - lower_y + 1).
        """
        if self.nvars != 2:
            raise ModelError("in_beta_y() is defined for two variables only")
        beta_x = np.atleast_1d(np.asarray(beta_x, dtype=complex))
        powers = beta_x[:, None] ** np.arange(self.lower[0], self.upper[0] + 1)[None, :]
        return powers @ self.as_array()


def _det_coefficients(model: LatticeModel, amplitudes: np.ndarray, energy: complex,
                      lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    sizes = upper - lower + 1
    grids = np.meshgrid(*[np.exp(2j * np.pi * np.arange(m) / m) for m in sizes], indexing="ij")
    betas = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(betas[:, None, :] ** model.offsets[None, :, :], axis=-1)
    hamiltonians = np.einsum("st,tab->sab", weights, amplitudes)
    values = np.linalg.det(energy * np.eye(model.bands) - hamiltonians)
    shift = np.prod(betas ** (-lower)[None, :], axis=-1)
    return np.fft.fftn((values * shift).reshape(tuple(sizes))) / np.prod(sizes)


def _structural_box(model: LatticeModel) -> Tuple[np.ndarray, np.ndarray]:
    """Exponent box of det[E - H] for generic amplitudes with this sparsity.

    An all-zero term counts as fully populated, so a switched-off hopping
    (e.g. J_L = 0) still shows up as a vanishing leading coefficient.
    """
    offsets = model.offsets
    lower = model.bands * np.minimum(offsets.min(axis=0), 0)
    upper = model.bands * np.maximum(offsets.max(axis=0), 0)
    if model.bands == 1:
        return lower, upper
    rng = np.random.default_rng(0)
    generic = []
    for term in model.terms:
        pattern = term.amplitude != 0
        if not pattern.any():
            pattern = np.ones_like(pattern)
        values = rng.normal(size=pattern.shape) + 1j * rng.normal(size=pattern.shape)
        generic.append(np.where(pattern, values, 0.0))
    table = _det_coefficients(model, np.stack(generic), 0.7071 + 0.3183j, lower, upper)
    present = np.argwhere(np.abs(table) > 1e-10 * np.abs(table).max())
    return lower + present.min(axis=0), lower + present.max(axis=0)


def char_poly(model: LatticeModel, E: complex) -> CharPoly:
    lower, upper = _structural_box(model)
    if model.bands == 1:
        coeffs = {tuple(int(x) for x in np.array(index) + lower): 0j
                  for index in np.ndindex(*(upper - lower + 1))}
        coeffs[(0,) * model.dimension] += complex(E)
        for term in model.terms:
            coeffs[term.offset] -= complex(term.amplitude[0, 0])
    else:
        box_lower = model.bands * np.minimum(model.offsets.min(axis=0), 0)
        box_upper = model.bands * np.maximum(model.offsets.max(axis=0), 0)
        table = _det_coefficients(model, model.amplitudes, complex(E), box_lower, box_upper)
        cutoff = _COEFF_CUTOFF * np.abs(table).max()
        table = np.where(np.abs(table) > cutoff, table, 0.0)
        coeffs = {}
        for index in np.ndindex(*(upper - lower + 1)):
            exponent = tuple(int(x) for x in np.array(index) + lower)
            coeffs[exponent] = complex(table[tuple(np.array(exponent) - box_lower)])
    return CharPoly(complex(E), tuple(int(x) for x in lower), tuple(int(x) for x in upper), coeffs)


# ---------------- JSON model files ---------------- #
def model_from_dict(data: dict) -> LatticeModel:
    for key in ("dimension", "bands", "terms"):
        if key not in data:
            raise ModelError(f"missing top-level key '{key}'")
    dimension, bands = data["dimension"], data["bands"]
    if not isinstance(dimension, int) or not isinstance(bands, int):
        raise ModelError("'dimension' and 'bands' must be integers")
    terms = []
    for index, entry in enumerate(data["terms"]):
        try:
            offset = [int(x) for x in entry["offset"]]
            rows = entry["amplitude"]
            amplitude = np.array([[complex(c.get("re", 0.0), c.get("im", 0.0)) for c in row] for row in rows])
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ModelError(f"malformed term ({exc})", index) from exc
        if len(offset) != dimension:
            raise ModelError(f"offset {offset} has length {len(offset)}, expected {dimension}", index)
        if amplitude.shape != (bands, bands):
            raise ModelError(f"amplitude shape {amplitude.shape}, expected {(bands, bands)}", index)
        terms.append(HoppingTerm(tuple(offset), amplitude))
    return LatticeModel(dimension, bands, tuple(terms), data.get("name"))


def model_to_dict(model: LatticeModel) -> dict:
    return {
        "dimension": model.dimension,
        "bands": model.bands,
        "terms": [
            {
                "offset": list(term.offset),
                "amplitude": [[{"re": float(z.real), "im": float(z.imag)} for z in row] for row in term.amplitude],
            }
            for term in model.terms
        ],
        "name": model.name,
    }


def load_model(path: str) -> LatticeModel:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path} is not valid JSON: {exc}") from exc
    model = model_from_dict(data)
    logger.info("Loaded %s from %s (%d terms).", model.label(), path, len(model.terms))
    return model


def save_model(model: LatticeModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f, indent=2)


def is_hermitian(model: LatticeModel, samples: Iterable[Sequence[float]], atol: float = 1e-12) -> bool:
    return all(np.allclose(h, h.conj().T, atol=atol) for h in bloch_stack(model, np.array(list(samples))))
