"""bflab: pseudo-spectral lab for Brinkman-Forchheimer flows on the torus."""

from .errors import ConfigError, ContractViolation, NumericalFailure
from .model import NonlinearityModel
from .spectral import Grid, PhysicalField, SpectralField

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractViolation",
    "Grid",
    "NonlinearityModel",
    "NumericalFailure",
    "PhysicalField",
    "SpectralField",
    "__version__",
]
