"""Finite-mode oracle: the field truncated to N discrete modes.

The linear Heisenberg dynamics of a Weyl label is integrated as a matrix
exponential of the 2(N+1)-dimensional label generator, with no use of the
closed forms in :mod:`velocity` or the eigendecomposition in
:mod:`position`.  Label vectors are laid out as

    (a, u_1 .. u_N, b, v_1 .. v_N)

with mode amplitudes ``u_i = sqrt(dw_i) * u(w_i)``.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.stats
from scipy.sparse.linalg import expm_multiply

from .environment import VACUUM, thermal_weight
from .errors import Unbounded, WindowTooShort
from .phase_space import FieldVector, PhasePoint, WeightRole, WeylLabel
from .spectral import (CRITICAL_RTOL, Boundedness, Kernel, boundedness_check, mode_grid,
                       oscillatory_integral)

DENSE_LIMIT = 600


@dataclass(frozen=True, eq=False)
class ModeSystem:
    form_factor: object
    kind: str
    omegas: np.ndarray
    widths: np.ndarray
    couplings: np.ndarray
    omega0: float = None
    generator: object = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.omegas)

    @property
    def dim(self):
        return 2 * (self.n + 1)

    def dense_generator(self):
        return self.generator.toarray()

    def canonical_form(self):
        """Matrix of ``a b' - b a' + <u, v'> - <v, u'>`` in the label layout."""
        m = self.n + 1
        om = np.zeros((self.dim, self.dim))
        om[:m, m:] = np.eye(m)
        om[m:, :m] = -np.eye(m)
        return om

    @property
    def discrete_norm_sq(self):
        """``sum g_i^2 / w_i^2``, the discretized ``||M^-1 h||^2``."""
        return float(np.sum(self.couplings ** 2 / self.omegas ** 2))


def _generator(kind, omegas, g, omega0):
    # label flow d(l_p)/dt = -Hpq l_p + Hpp l_q,  d(l_q)/dt = -Hqq l_p + Hqp l_q
    n = len(omegas)
    m = n + 1
    idx = np.arange(1, m)
    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.extend(np.atleast_1d(r))
        cols.extend(np.atleast_1d(c))
        vals.extend(np.broadcast_to(v, np.shape(np.atleast_1d(r))))

    put(np.arange(m), m + np.arange(m), 1.0)  # Hpp = I
    put(m + idx, idx, -omegas ** 2)  # -Hqq, field diagonal
    if kind == "velocity":
        # H contains P * sum g_j phi_j: Hqp[j, 0] = g_j, Hpq[0, j] = g_j
        put(np.zeros(n, dtype=int), idx, -g)
        put(m + idx, np.full(n, m), g)
    elif kind == "position":
        put(m, 0, -omega0 ** 2)
        put(np.full(n, m), idx, -g)
        put(m + idx, np.zeros(n, dtype=int), -g)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * m, 2 * m))


def build(J, kind="velocity", n=1024, grid_scheme="midpoint", omega0=None,
          omega_min=None, omega_max=None, allow_supercritical=False):
    """Discretize ``J`` into ``n`` modes with couplings ``g_i^2 = J(w_i) dw_i``."""
    if n < 2:
        raise ValueError("need N >= 2 modes")
    if kind == "position" and (omega0 is None or not omega0 > 0):
        raise ValueError("position kind needs omega0 > 0")
    omegas, widths = mode_grid(J, n, grid_scheme, omega_min, omega_max)
    g = discrete_couplings(J, omegas, widths, kind, omega0)
    sys_ = ModeSystem(J, kind, omegas, widths, g, omega0, _generator(kind, omegas, g, omega0))
    bound = 1.0 if kind == "velocity" else omega0 ** 2
    if not allow_supercritical and sys_.discrete_norm_sq > bound * (1 + CRITICAL_RTOL):
        raise Unbounded(f"discretized coupling norm {sys_.discrete_norm_sq:.17g} exceeds {bound:g}")
    return sys_


def discrete_couplings(J, omegas, widths, kind, omega0=None):
    """``g_i = sqrt(J(w_i) dw_i)``; a critical profile stays exactly critical.

    At criticality the midpoint sum misses the continuum norm by the
    discretization error, which could push the truncated system over the
    boundedness edge.  The couplings are then rescaled so that
    ``sum g_i^2 / w_i^2`` equals the bound.
    """
    g = np.sqrt(J(omegas) * widths)
    model = "velocity" if kind == "velocity" else "position"
    if not J.is_zero and boundedness_check(J, model, omega0) is Boundedness.CRITICAL:
        bound = 1.0 if kind == "velocity" else omega0 ** 2
        g = g * math.sqrt(bound / float(np.sum(g ** 2 / omegas ** 2)))
    return g


def to_vector(sys_, point):
    s = np.sqrt(sys_.widths)
    return np.concatenate([[point.a], point.u.values * s, [point.b], point.v.values * s])


def from_vector(sys_, vec):
    m = sys_.n + 1
    s = np.sqrt(sys_.widths)
    return PhasePoint(vec[0], FieldVector(sys_.omegas, vec[1:m] / s, WeightRole.MINUS_ONE, sys_.widths),
                      vec[m], FieldVector(sys_.omegas, vec[m + 1:] / s, WeightRole.PLUS_ONE, sys_.widths))


def initial_vector(sys_, label):
    vec = np.zeros(sys_.dim)
    vec[0] = label.a
    vec[sys_.n + 1] = label.b
    return vec


def propagator(sys_, t):
    """Dense ``exp(G t)`` (scaling and squaring)."""
    return scipy.linalg.expm(sys_.dense_generator() * t)


def propagate(sys_, vec, t):
    """Label vector at time ``t``."""
    vec = np.asarray(vec, dtype=float)
    if t == 0:
        return vec.copy()
    if sys_.dim <= DENSE_LIMIT:
        return propagator(sys_, t) @ vec
    return expm_multiply(sys_.generator * t, vec, traceA=0.0)


def propagate_grid(sys_, vec, t_start, t_stop, num):
    """Label vectors on ``linspace(t_start, t_stop, num)``, shape (num, dim)."""
    return expm_multiply(sys_.generator, np.asarray(vec, dtype=float), start=t_start,
                         stop=t_stop, num=num, endpoint=True, traceA=0.0)


def oracle_exponent(sys_, vec, env=VACUUM):
    """``sum_i (u_i^2 w_i + v_i^2 / w_i) coth(beta w_i / 2) / 4`` on mode amplitudes."""
    m = sys_.n + 1
    u, v = vec[1:m], vec[m + 1:]
    w = sys_.omegas
    weight = thermal_weight(w, env.thermal_beta)
    return 0.25 * float(np.sum((u * u * w + v * v / w) * weight))


@dataclass(frozen=True)
class OracleComparison:
    quantity: str
    analytic: float
    oracle: float
    abs_diff: float
    n: int
    convergence_order_estimate: float = None

    def to_dict(self):
        return {"quantity": self.quantity, "analytic": self.analytic, "oracle": self.oracle,
                "abs_diff": self.abs_diff, "N": self.n,
                "convergence_order_estimate": self.convergence_order_estimate}


def _analytic_abs_chi(sys_, label, t, env):
    if sys_.kind == "velocity":
        from . import velocity
        model = velocity.VelocityModel.build(sys_.form_factor)
        return velocity.reduced_weyl(model, label, t, env)[1]
    from . import position
    op = position.FriedrichsOperator.from_modes(sys_.form_factor, sys_.omega0,
                                                sys_.omegas, sys_.widths)
    return math.exp(-position.exponent(op, label, t, env))


def oracle_chi(sys_, label, t, env=VACUUM):
    """Oracle ``|chi|`` at ``t`` compared with the analytic module."""
    vec = propagate(sys_, initial_vector(sys_, label), t)
    oracle = math.exp(-oracle_exponent(sys_, vec, env))
    analytic = _analytic_abs_chi(sys_, label, t, env)
    return OracleComparison("abs_chi", analytic, oracle, abs(analytic - oracle), sys_.n)


@dataclass(frozen=True)
class DriftFit:
    """Fitted drift coefficient with a confidence interval.

    The half-width is the Student-t interval of the least-squares slope
    plus ``discretization_error``, the change of the fitted slope when the
    mode count is halved.
    """

    alpha_sq: float
    stderr: float
    discretization_error: float
    ci_low: float
    ci_high: float
    n_samples: int
    hypothesis: float  # 1 - sum g^2 / w^2 of the discretized system

    def contains(self, value):
        return self.ci_low <= value <= self.ci_high


def _drift_slope(sys_, b, t0, t1, num):
    times = np.linspace(t0, t1, num)
    vecs = propagate_grid(sys_, initial_vector(sys_, WeylLabel(0.0, b)), t0, t1, num)
    drift = np.array([oscillatory_integral(sys_.form_factor, -3, t, Kernel.SIN).value
                      for t in times])
    y = (vecs[:, 0] - b * drift) / b
    return _ols_slope(times, y)


def fit_drift(sys_, b=1.0, t_window=(20.0, 60.0), num=41, confidence=0.95,
              discretization_check=True):
    """Least-squares slope of ``(a(t) - a - b int J sin(wt) w^-3 dw) / b`` against ``t``."""
    if sys_.kind != "velocity":
        raise ValueError("drift fit applies to the velocity model only")
    t0, t1 = map(float, t_window)
    if not (t1 > t0 >= 0) or num < 8:
        raise WindowTooShort(f"window {t_window} with {num} samples is too short for a slope fit")
    recurrence = 2 * math.pi / float(np.max(sys_.widths))
    if t1 >= 0.5 * recurrence:
        raise WindowTooShort(f"window end {t1:g} beyond half the recurrence time {recurrence:g}")
    slope, stderr = _drift_slope(sys_, b, t0, t1, num)
    disc = 0.0
    if discretization_check:
        coarse = build(sys_.form_factor, "velocity", sys_.n // 2,
                       omega_min=float(sys_.omegas[0] - sys_.widths[0] / 2),
                       omega_max=float(sys_.omegas[-1] + sys_.widths[-1] / 2))
        if t1 < 0.5 * 2 * math.pi / float(np.max(coarse.widths)):
            disc = abs(slope - _drift_slope(coarse, b, t0, t1, num)[0])
    half = scipy.stats.t.ppf(0.5 + confidence / 2, num - 2) * stderr + disc
    return DriftFit(slope, stderr, disc, slope - half, slope + half, num,
                    1.0 - sys_.discrete_norm_sq)


def _ols_slope(x, y):
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xc
    s2 = float(resid @ resid) / (len(x) - 2)
    return slope, math.sqrt(s2 / sxx)


def convergence_order(ns, errors):
    """Least-squares order ``p`` in ``error ~ N**-p``."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    return float(-np.polyfit(np.log(ns), np.log(errors), 1)[0])
