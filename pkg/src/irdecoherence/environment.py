"""Field-trace factor of the reduced dynamics for coherent and thermal states."""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BetaNonPositive, GridMismatch
from .phase_space import check_grids


class EnvKind(str, enum.Enum):
    VACUUM = "vacuum"
    THERMAL = "thermal"


@dataclass(frozen=True)
class EnvironmentState:
    """Reference state of the field: coherent (modulus = vacuum) or KMS at ``beta``."""

    kind: EnvKind = EnvKind.VACUUM
    beta: float = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EnvKind(self.kind))
        if self.kind is EnvKind.THERMAL:
            if self.beta is None or not self.beta > 0:
                raise BetaNonPositive(f"thermal state needs beta > 0, got {self.beta}")
        elif self.beta is not None:
            raise ValueError("vacuum state takes no beta")

    @classmethod
    def thermal(cls, beta):
        return cls(EnvKind.THERMAL, beta)

    @property
    def thermal_beta(self):
        return self.beta if self.kind is EnvKind.THERMAL else None

    def to_dict(self):
        return {"kind": self.kind.value, "beta": self.beta}


VACUUM = EnvironmentState()


def thermal_weight(omega, beta):
    """``coth(beta omega / 2)``."""
    if beta is None:
        return np.ones_like(omega, dtype=float)
    if not beta > 0:
        raise BetaNonPositive(f"beta must be positive, got {beta}")
    return 1.0 / np.tanh(0.5 * beta * np.asarray(omega, dtype=float))


def exponent(u, v, env=VACUUM):
    """``-log chi``: ``(1/4)(<u|coth u>_{-1} + <v|coth v>_{1})`` (coth = 1 in vacuum)."""
    check_grids(u, v)
    weight = thermal_weight(u.grid, env.thermal_beta)
    return 0.25 * (u.norm_sq(weight) + v.norm_sq(weight))


def thermal_excess(u, v, beta):
    """Thermal minus vacuum exponent, ``(1/4) <.|coth - 1|.>``, without cancellation.

    Uses ``coth(x) - 1 = 2 / expm1(2x)``, which stays positive in floating
    point long after ``coth`` itself has rounded to 1.
    """
    check_grids(u, v)
    if not beta > 0:
        raise BetaNonPositive(f"beta must be positive, got {beta}")
    with np.errstate(over="ignore"):
        extra = 2.0 / np.expm1(beta * np.asarray(u.grid, dtype=float))
    return 0.25 * (u.norm_sq(extra) + v.norm_sq(extra))


def abs_chi_coherent(u, v):
    """``exp(-||u||_{-1}^2/4 - ||v||_1^2/4)``."""
    return math.exp(-exponent(u, v))


def chi_thermal(u, v, beta):
    return math.exp(-exponent(u, v, EnvironmentState.thermal(beta)))


def coherent_phase(u, v, g):
    """Full ``chi`` for the coherent reference state with parameter ``g``.

    ``g`` is sampled (complex) on the grid of ``u``.  The phase is
    ``Im <M^(1/2) u + i M^(-1/2) v | g>`` with the inner product
    antilinear in its first slot.
    """
    check_grids(u, v)
    g = np.asarray(g, dtype=complex)
    if g.shape != u.grid.shape:
        raise GridMismatch("g must be sampled on the field grid")
    w = u.grid
    bra = np.sqrt(w) * u.values - 1j * v.values / np.sqrt(w)  # conjugated
    phase = float(np.sum(u.weights * bra * g).imag)
    return abs_chi_coherent(u, v) * complex(math.cos(phase), math.sin(phase))
