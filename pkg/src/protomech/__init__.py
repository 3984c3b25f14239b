"""Lie-Poisson systems, protomechanics on a periodic grid, functionals and fluids."""

from .algebra import AlgebraSpec, GridAlgebra
from .lie_poisson import LPSystem, rigid_body
from .proto import HamiltonianSpec, ProtoState, ShadowSpec

__all__ = ["AlgebraSpec", "GridAlgebra", "LPSystem", "rigid_body", "HamiltonianSpec", "ProtoState", "ShadowSpec"]
__version__ = "0.1.0"
