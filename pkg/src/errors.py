"""Exception hierarchy shared by every analysis module.

Input problems also derive from ``ValueError`` and numerical breakdowns from
``RuntimeError`` so callers may catch them either way.
"""
from __future__ import annotations


class NHSkinError(Exception):
    """Base class for all errors raised by the toolkit."""


class ModelError(NHSkinError, ValueError):
    def __init__(self, message: str, term_index: int | None = None) -> None:
        if term_index is not None:
            message = f"term {term_index}: {message}"
        super().__init__(message)
        self.term_index = term_index


class LatticeError(NHSkinError, ValueError):
    pass


class SpectralError(NHSkinError, RuntimeError):
    pass


class GapClosedError(NHSkinError, ValueError):
    pass


class DegeneratePolynomialError(NHSkinError, ValueError):
    pass


class GBZError(NHSkinError, RuntimeError):
    def __init__(self, message: str, seed_indices: list[int] | None = None) -> None:
        super().__init__(message)
        self.seed_indices = seed_indices or []


class AmoebaError(NHSkinError, RuntimeError):
    pass


class EPVicinityError(NHSkinError, ValueError):
    pass


class SingularProbeError(NHSkinError, ValueError):
    pass


class StepSizeError(NHSkinError, ValueError):
    pass


class TrackingError(NHSkinError, RuntimeError):
    pass


class ProfileError(NHSkinError, ValueError):
    pass
