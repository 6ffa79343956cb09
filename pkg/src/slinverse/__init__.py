"""Reconstruction of a potential from spectral data for a two-layer medium."""
from .errors import (DomainError, EigenvalueSearchError, NormingConstantWarning, ProfileError,
                     SingularSystemError)
from .forward import PotentialGrid, SpectralData, find_eigenvalues, forward_spectrum, norming_constant
from .geometry import MediumProfile
from .main_equation import InversionConfig, invert, reconstruct
from .unperturbed import UnperturbedData

__all__ = [
    "DomainError", "EigenvalueSearchError", "NormingConstantWarning", "ProfileError",
    "SingularSystemError", "PotentialGrid", "SpectralData", "find_eigenvalues",
    "forward_spectrum", "norming_constant", "MediumProfile", "InversionConfig", "invert",
    "reconstruct", "UnperturbedData",
]
