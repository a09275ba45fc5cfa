"""Coupled approximate message passing for multi-view stochastic block models."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DivergedRunError,
    MvampError,
    NumericalError,
    ParameterError,
)
from .models import Family, PriorSpec  # noqa: E402

__all__ = [
    "DivergedRunError",
    "Family",
    "MvampError",
    "NumericalError",
    "ParameterError",
    "PriorSpec",
    "__version__",
]
