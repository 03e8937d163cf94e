"""Velocity coupling ``H = P^2/2 + P Phi(h) + H_F``: closed-form reduced dynamics.

Starting from ``(a, 0, b, 0)`` the flow is

    a(t) = a + b int J sin(wt) w^-3 dw + alpha^2 b t,     b(t) = b,
    u(t) = b (1 - cos wt) w^-2 sqrt(J),                    v(t) = b sin(wt) w^-1 sqrt(J),

with ``alpha^2 = 1 - int J w^-2`` (the drift left after the field cloud
renormalizes the particle velocity).  The decoherence exponent is
``(b^2 / 2) int J w^-3 (1 - cos wt) [coth(beta w / 2)] dw``.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .curves import DecoherenceCurve
from .environment import VACUUM
from .errors import Unbounded
from .phase_space import FieldVector, PhasePoint, WeightRole, WeylLabel
from .spectral import (Boundedness, Kernel, boundedness_check, coupling_norm_sq,
                       field_quadrature, ir_classify, oscillatory_integral)

# decade-increment slope above which an envelope is reported as diverging
DIVERGENCE_SLOPE_THRESHOLD = -0.1


@dataclass(frozen=True)
class VelocityModel:
    form_factor: object
    alpha_sq: float
    boundedness: Boundedness
    coupling_norm: float
    alpha_sq_source: str = "1 - ||M^-1 h||^2"

    @classmethod
    def build(cls, J, alpha_sq=None):
        """Validate boundedness and fix the drift coefficient.

        ``alpha_sq`` defaults to ``1 - ||M^-1 h||^2`` (0 at criticality).
        """
        bd = boundedness_check(J, "velocity")
        norm = coupling_norm_sq(J)
        if bd is Boundedness.SUPERCRITICAL:
            raise Unbounded(f"||M^-1 h||^2 = {norm:.17g} > 1: Hamiltonian unbounded below")
        source = "1 - ||M^-1 h||^2"
        if alpha_sq is None:
            alpha_sq = 0.0 if bd is Boundedness.CRITICAL else 1.0 - norm
        else:
            source = "override"
        if not 0.0 <= alpha_sq <= 1.0:
            raise ValueError(f"alpha_sq must lie in [0, 1], got {alpha_sq}")
        return cls(J, float(alpha_sq), bd, float(norm), source)

    def metadata(self):
        J = self.form_factor
        return {
            "model": "velocity",
            "sigma": J.sigma,
            "cutoff": J.cutoff,
            "amplitude": J.amplitude,
            "tabulated": J.tabulated,
            "coupling_norm_sq": self.coupling_norm,
            "alpha_sq": self.alpha_sq,
            "alpha_sq_rule": self.alpha_sq_source,
            "boundedness": self.boundedness.value,
            "drift_frozen": self.boundedness is Boundedness.CRITICAL,
        }


def drift_integral(model, t):
    """``int J(w) sin(wt) w^-3 dw``."""
    return oscillatory_integral(model.form_factor, -3, t, Kernel.SIN).value


def flow(model, label, t, grid=None):
    """Phase point at time ``t`` starting from ``(a, 0, b, 0)``.

    ``grid`` is an optional ``(nodes, weights)`` pair for the field
    components; by default a quadrature grid resolving ``cos(w t)`` is used.
    """
    J = model.form_factor
    if grid is None:
        grid = field_quadrature(J, t_max=abs(t))
    nodes, weights = grid
    nodes = np.asarray(nodes, dtype=float)
    a, b = label.a, label.b
    if b == 0.0:
        return PhasePoint.particle(WeylLabel(a, 0.0), nodes, weights)
    a_t = a + b * drift_integral(model, t) + model.alpha_sq * b * t
    amp = np.sqrt(J(nodes))
    wt = nodes * t
    u = b * 2.0 * np.sin(0.5 * wt) ** 2 / nodes ** 2 * amp
    v = b * np.sin(wt) / nodes * amp
    return PhasePoint(a_t, FieldVector(nodes, u, WeightRole.MINUS_ONE, weights),
                      b, FieldVector(nodes, v, WeightRole.PLUS_ONE, weights))


def phi(model, t, env=VACUUM):
    """Exponent per unit ``b^2``: ``(1/2) int J w^-3 (1 - cos wt) [coth] dw``."""
    return 0.5 * oscillatory_integral(model.form_factor, -3, t, Kernel.ONE_MINUS_COS,
                                      beta=env.thermal_beta).value


def exponent(model, b, t, env=VACUUM):
    """``-log|chi|`` for the label ``(a, b)``; independent of ``a``."""
    if b == 0.0:
        return 0.0
    return b * b * phi(model, t, env)


def phi_curve(model, times, env=VACUUM):
    return np.array([phi(model, t, env) for t in np.asarray(times, dtype=float)])


def envelope_from_samples(phi_values):
    """Running minimum from the right: the largest non-decreasing minorant on the grid."""
    vals = np.asarray(phi_values, dtype=float)
    return np.minimum.accumulate(vals[::-1])[::-1]


def phi_envelope(model, times, env=VACUUM):
    """Non-decreasing envelope ``min_{s >= t} phi(s)`` over a sorted time grid."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("time grid must be sorted")
    return envelope_from_samples(phi_curve(model, times, env))


@dataclass(frozen=True)
class EnvelopeTrend:
    diverging: bool
    tail_slope: float  # log-log slope of d(envelope)/d(log t)
    last_value: float


def envelope_trend(times, envelope, decades=2.0):
    """Decide from the tail of a log-spaced grid whether the envelope diverges.

    The increment per unit ``log t`` behaves like ``t**s``; the envelope
    diverges iff ``s >= 0``.  ``s`` is fitted over the last ``decades``
    decades and compared with :data:`DIVERGENCE_SLOPE_THRESHOLD`.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(envelope, dtype=float)
    mask = t >= t[-1] * 10.0 ** (-decades)
    mask &= t > 0
    lt, ly = np.log(t[mask]), y[mask]
    if len(lt) < 4:
        raise ValueError("need at least four positive grid points in the tail window")
    inc = np.diff(ly) / np.diff(lt)
    mid = 0.5 * (lt[1:] + lt[:-1])
    scale = max(abs(ly[-1]), 1e-300)
    good = inc > 1e-13 * scale
    # mostly flat running minimum: saturated on the grid
    if good.sum() < max(3, len(inc) // 2):
        return EnvelopeTrend(False, -math.inf, float(y[-1]))
    slope = float(np.polyfit(mid[good], np.log(inc[good]), 1)[0])
    return EnvelopeTrend(slope > DIVERGENCE_SLOPE_THRESHOLD, slope, float(y[-1]))


def reduced_weyl(model, label, t, env=VACUUM):
    """``Phi_t[W_S(a, b)] = W_S(a(t), b(t)) chi``: returns the label and ``|chi|``."""
    if label.b == 0.0:
        return WeylLabel(label.a, 0.0), 1.0
    a_t = label.a + label.b * drift_integral(model, t) + model.alpha_sq * label.b * t
    return WeylLabel(a_t, label.b), math.exp(-exponent(model, label.b, t, env))


def decoherence_curve(model, label, times, env=VACUUM, workers=None):
    """Sample the reduced dynamics of ``W_S(a, b)`` over ``times``."""
    times = np.asarray(times, dtype=float)
    phis = _map(lambda t: phi(model, t, env), times, workers)
    drift = _map(lambda t: drift_integral(model, t), times, workers)
    b = label.b
    expo = b * b * phis
    a_t = label.a + b * drift + model.alpha_sq * b * times
    if b == 0.0:
        a_t = np.full_like(times, label.a)
        expo = np.zeros_like(times)
    meta = dict(model.metadata())
    meta.update({"environment": env.to_dict(), "label": {"a": label.a, "b": label.b},
                 "ir_class": ir_classify(model.form_factor).value})
    return DecoherenceCurve(times, a_t, np.full_like(times, b), np.exp(-expo), expo,
                            envelope_from_samples(phis), meta)


def _map(fn, xs, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(fn, xs)))
    return np.array([fn(x) for x in xs])
