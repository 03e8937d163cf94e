"""Classical phase space of particle and field, and the free flows on it.

A particle Weyl label is ``(a, b)``.  Field labels ``u`` and ``v`` are
sampled on a frequency grid as radial amplitudes, so that with quadrature
weights ``w_i``

    ||u||_{-1}^2 = sum_i w_i u_i**2 omega_i,   ||v||_1^2 = sum_i w_i v_i**2 / omega_i.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch


class WeightRole(str, enum.Enum):
    MINUS_ONE = "minus_one"  # u in H_{-1}: weight omega
    PLUS_ONE = "plus_one"  # v in H_{+1}: weight 1/omega


@dataclass(frozen=True)
class WeylLabel:
    a: float
    b: float

    def as_tuple(self):
        return (self.a, self.b)


def _frozen(x):
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FieldVector:
    """Real field amplitude on a strictly increasing positive frequency grid.

    ``weights`` default to one, which makes the vector a set of discrete
    mode amplitudes.
    """

    grid: np.ndarray
    values: np.ndarray
    role: WeightRole
    weights: np.ndarray = None

    def __post_init__(self):
        grid = _frozen(self.grid)
        values = _frozen(self.values)
        weights = _frozen(np.ones_like(grid) if self.weights is None else self.weights)
        if grid.ndim != 1 or values.shape != grid.shape or weights.shape != grid.shape:
            raise GridMismatch("grid, values and weights must be 1-d of equal length")
        if len(grid) and not (grid[0] > 0 and np.all(np.diff(grid) > 0)):
            raise ValueError("grid must be positive and strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "role", WeightRole(self.role))

    @classmethod
    def zeros(cls, grid, role, weights=None):
        return cls(grid, np.zeros(len(grid)), role, weights)

    @property
    def norm_weight(self):
        return self.grid if self.role is WeightRole.MINUS_ONE else 1.0 / self.grid

    def norm_sq(self, extra=None):
        """Weighted squared norm, optionally with a pointwise factor ``extra``."""
        dens = self.values ** 2 * self.norm_weight
        if extra is not None:
            dens = dens * extra
        return float(np.sum(self.weights * dens))

    def same_grid(self, other):
        return (self.grid.shape == other.grid.shape
                and np.array_equal(self.grid, other.grid)
                and np.array_equal(self.weights, other.weights))

    def with_values(self, values, role=None):
        return FieldVector(self.grid, values, self.role if role is None else role, self.weights)

    def __eq__(self, other):
        if not isinstance(other, FieldVector):
            return NotImplemented
        return (self.role is other.role and self.same_grid(other)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.role, self.grid.tobytes(), self.values.tobytes()))


def check_grids(u, v):
    if not u.same_grid(v):
        raise GridMismatch("field vectors live on different grids")


@dataclass(frozen=True)
class PhasePoint:
    a: float
    u: FieldVector
    b: float
    v: FieldVector

    def __post_init__(self):
        check_grids(self.u, self.v)
        if self.u.role is not WeightRole.MINUS_ONE or self.v.role is not WeightRole.PLUS_ONE:
            raise ValueError("u must have role MINUS_ONE and v role PLUS_ONE")

    @classmethod
    def particle(cls, label, grid, weights=None):
        """The point ``(a, 0, b, 0)``."""
        return cls(label.a, FieldVector.zeros(grid, WeightRole.MINUS_ONE, weights),
                   label.b, FieldVector.zeros(grid, WeightRole.PLUS_ONE, weights))

    @property
    def label(self):
        return WeylLabel(self.a, self.b)

    def symplectic_form(self, other):
        """``a b' - b a' + <u, v'> - <v, u'>`` with the unweighted L2 pairing."""
        check_grids(self.u, other.u)
        w = self.u.weights
        return (self.a * other.b - self.b * other.a
                + float(np.sum(w * self.u.values * other.v.values))
                - float(np.sum(w * self.v.values * other.u.values)))

    def vacuum_form(self):
        return self.u.norm_sq() + self.v.norm_sq()


def particle_flow(label, omega0, t):
    """Rotate ``(a, b)`` under the oscillator of frequency ``omega0``.

    ``omega0 == 0`` is the free particle ``(a + b t, b)``.
    """
    a, b = label.a, label.b
    if omega0 == 0:
        return WeylLabel(a + b * t, b)
    if omega0 < 0:
        raise ValueError("omega0 must be >= 0")
    c, s = math.cos(omega0 * t), math.sin(omega0 * t)
    return WeylLabel(a * c + b * s / omega0, -a * omega0 * s + b * c)


def field_flow(u, v, t):
    """Pointwise rotation ``u -> u cos(wt) + v sin(wt)/w``, ``v -> -u w sin(wt) + v cos(wt)``."""
    check_grids(u, v)
    w = u.grid
    c, s = np.cos(w * t), np.sin(w * t)
    return (u.with_values(u.values * c + v.values * s / w),
            v.with_values(-u.values * w * s + v.values * c))


def product_flow(point, omega0, t):
    """Uncoupled flow: particle oscillator times free field."""
    lab = particle_flow(point.label, omega0, t)
    u, v = field_flow(point.u, point.v, t)
    return PhasePoint(lab.a, u, lab.b, v)
