"""Decoherence and induced superselection for a particle coupled to a massless Bose field.

Two quadratic models are covered: velocity coupling (closed-form reduced
dynamics) and position coupling (Friedrichs-type energy operator), with a
finite-mode oracle that checks both against brute-force propagation.
"""
from .environment import VACUUM, EnvironmentState
from .errors import ModelError
from .phase_space import FieldVector, PhasePoint, WeylLabel
from .spectral import Boundedness, FormFactor, IRClass, Kernel

__version__ = "0.1.0"

__all__ = ["VACUUM", "Boundedness", "EnvironmentState", "FieldVector", "FormFactor",
           "IRClass", "Kernel", "ModelError", "PhasePoint", "WeylLabel", "__version__"]
