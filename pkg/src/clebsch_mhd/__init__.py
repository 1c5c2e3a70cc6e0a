"""Ideal MHD in Clebsch variables and in Eulerian variables, with invariant and gauge diagnostics."""

from .clebsch import ClebschState, EquationOfState
from .noncanonical import PhysicalState
from .spectral import Grid

__all__ = ["ClebschState", "EquationOfState", "Grid", "PhysicalState"]
__version__ = "0.1.0"
