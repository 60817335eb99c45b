"""Explicit decay bounds for oscillatory integrals with singular amplitudes.

Modules:

* :mod:`corput.core`: domain types, assumption validators, small inequalities
* :mod:`corput.quadrature`: reference quadrature and the norms entering the constants
* :mod:`corput.certificates`: decay constants, envelope checks, decay fits
* :mod:`corput.dispersive`: Fourier-multiplier evolution and cone constants
* :mod:`corput.catalog`: named validated instances
* :mod:`corput.cli`: batch campaigns
"""

from .core import (
    NonFiniteError,
    PhaseDescriptor,
    PreconditionError,
    RealFunctionHandle,
    SingularAmplitude,
    SpaceTimeCone,
    SymbolDescriptor,
    ValidationError,
    reflect_band,
    validate_amplitude,
    validate_phase,
    validate_symbol,
)
from .quadrature import QuadratureResult, oscillatory_integral, oscillatory_integral_line
from .certificates import BoundCertificate, Theorem, certify, fit_decay, verify_envelope
from .catalog import instantiate, list_catalog

__version__ = "0.1.0"

__all__ = [
    "BoundCertificate",
    "NonFiniteError",
    "PhaseDescriptor",
    "PreconditionError",
    "QuadratureResult",
    "RealFunctionHandle",
    "SingularAmplitude",
    "SpaceTimeCone",
    "SymbolDescriptor",
    "Theorem",
    "ValidationError",
    "certify",
    "fit_decay",
    "instantiate",
    "list_catalog",
    "oscillatory_integral",
    "oscillatory_integral_line",
    "reflect_band",
    "validate_amplitude",
    "validate_phase",
    "validate_symbol",
    "verify_envelope",
]
