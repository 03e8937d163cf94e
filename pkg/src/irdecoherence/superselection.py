"""Momentum-interval projections and decay of off-diagonal blocks.

A Weyl operator ``W_S(a, b)`` shifts momentum by ``b``, so between the
spectral projections ``P(I2)`` and ``P(I1)`` it vanishes unless ``b``
lies in the Minkowski difference ``I2 - I1``.  Under the reduced
dynamics each surviving term is damped by ``|chi| = exp(-b^2 phi(t))``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import velocity
from .environment import VACUUM
from .errors import IntervalsOverlap
from .io import csv_text, json_text
from .phase_space import WeylLabel
from .spectral import IRClass, Kernel, ir_classify, weighted_norm_sq

# look-ahead used to approximate inf_{s >= t} phi(s) at a single time
ENVELOPE_LOOKAHEAD = np.geomspace(1.0, 1.0e3, 31)


@dataclass(frozen=True)
class MomentumInterval:
    """Closed interval ``[lo, hi]`` of particle momenta."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"degenerate momentum interval [{self.lo}, {self.hi}]")

    def distance(self, other):
        return max(0.0, other.lo - self.hi, self.lo - other.hi)


@dataclass(frozen=True)
class WeylCombination:
    """Finite linear combination ``sum_j c_j W_S(a_j, b_j)``."""

    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple((complex(c), lab if isinstance(lab, WeylLabel) else WeylLabel(*lab))
                      for c, lab in self.terms)
        object.__setattr__(self, "terms", terms)

    @property
    def c_total(self):
        """``C_A = sum |c_j|``."""
        return float(sum(abs(c) for c, _ in self.terms))


def offdiag_is_zero(label, I1, I2):
    """True iff ``b`` lies outside the closed difference ``[I2.lo - I1.hi, I2.hi - I1.lo]``."""
    b = label.b
    return not (I2.lo - I1.hi <= b <= I2.hi - I1.lo)


def _is_velocity(model):
    return isinstance(model, velocity.VelocityModel)


def _phi_limit(model, env):
    """``lim phi(t)`` for a regular velocity model (the cosine term averages out)."""
    J = model.form_factor
    if ir_classify(J) is IRClass.IR_DIVERGENT:
        return math.inf
    if env.thermal_beta is None:
        return 0.5 * weighted_norm_sq(J, -3).value
    from .spectral import oscillatory_integral
    # the t -> inf limit of the thermal cosine term also vanishes; sample far out
    return 0.5 * oscillatory_integral(J, -3, 1e6, Kernel.ONE_MINUS_COS, beta=env.thermal_beta).value


def phi_envelope_at(model, t, env=VACUUM):
    """``inf_{s >= t} phi(s)`` approximated on ``t * geomspace(1, 1e3)``."""
    if t == 0:
        return 0.0
    samples = velocity.phi_curve(model, t * ENVELOPE_LOOKAHEAD, env)
    return float(min(samples.min(), _phi_limit(model, env)))


def _term_exponents(model, A, t, env, label_envelope):
    """Per-term exponents ``b_j^2 phi~(t)`` (velocity) or measured envelopes (position)."""
    if _is_velocity(model):
        ph = phi_envelope_at(model, t, env) if label_envelope is None else label_envelope
        return [lab.b ** 2 * ph for _, lab in A.terms], ph
    from . import position
    out = []
    for _, lab in A.terms:
        grid = t * ENVELOPE_LOOKAHEAD if t > 0 else np.array([0.0])
        out.append(float(position.exponent_curve(model, lab, grid, env).min()))
    return out, None


def offdiag_bound(A, I1, I2, model, t, env=VACUUM, phi_tilde=None):
    """Bounds on ``||P(I2) Phi_t[A] P(I1)||``.

    Returns ``(per_term, uniform)``: the per-term sum
    ``sum |c_j| exp(-b_j^2 phi~(t))`` over contributing terms and the
    coarser ``C_A exp(-delta^2 phi~(t))``.  For the position model the
    per-term sum uses each label's own exponent envelope and the uniform
    bound is not available (``uniform`` is ``nan``).
    """
    delta = I1.distance(I2)
    if delta == 0.0:
        raise IntervalsOverlap(f"intervals {I1} and {I2} overlap or touch (delta = 0)")
    if not A.terms:
        return 0.0, 0.0
    live = [not offdiag_is_zero(lab, I1, I2) for _, lab in A.terms]
    if t == 0:
        per = float(sum(abs(c) for (c, _), keep in zip(A.terms, live) if keep))
        return per, A.c_total
    expos, ph = _term_exponents(model, A, t, env, phi_tilde)
    per = 0.0
    for (c, _), keep, e in zip(A.terms, live, expos):
        if keep:
            per += abs(c) * math.exp(-e)
    uniform = A.c_total * math.exp(-delta ** 2 * ph) if ph is not None else math.nan
    return float(per), float(uniform)


@dataclass(frozen=True, eq=False)
class DecayTable:
    """Bounds over a time grid with a log-log tail fit."""

    times: np.ndarray
    per_term_bound: np.ndarray
    uniform_bound: np.ndarray
    slope_fit: np.ndarray  # running local slope d log(bound) / d log t
    tail_slope: float
    decays_to_zero: bool
    metadata: dict = field(default_factory=dict)

    def columns(self):
        return {"t": self.times, "per_term_bound": self.per_term_bound,
                "uniform_bound": self.uniform_bound, "slope_fit": self.slope_fit}

    def to_csv(self):
        return csv_text(self.columns())

    def to_json(self):
        return json_text({"metadata": self.metadata, "tail_slope": self.tail_slope,
                          "decays_to_zero": self.decays_to_zero, **self.columns()})


def _local_slopes(t, y):
    out = np.full(len(t), np.nan)
    ok = (t > 0) & (y > 0)
    if ok.sum() >= 2:
        out[ok] = np.gradient(np.log(y[ok]), np.log(t[ok]))
    return out


def tail_fit(times, bound, decades=2.0):
    """Least-squares slope of ``log bound`` against ``log t`` over the last ``decades``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(bound, dtype=float)
    mask = (t > 0) & (y > 0) & (t >= t[-1] * 10.0 ** (-decades))
    if mask.sum() < 3:
        return math.nan
    return float(np.polyfit(np.log(t[mask]), np.log(y[mask]), 1)[0])


def superselection_sweep(A, I1, I2, model, times, env=VACUUM, fit_decades=2.0):
    """Decay table of :func:`offdiag_bound` over ``times`` plus a tail fit.

    For the velocity model the envelope ``phi~`` is the running minimum of
    ``phi`` over the grid, clipped by the ``t -> inf`` limit for regular
    profiles.  ``decays_to_zero`` follows the infrared class of the form
    factor and is cross-checked by the fitted tail slope.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("time grid must be sorted")
    delta = I1.distance(I2)
    if delta == 0.0:
        raise IntervalsOverlap(f"intervals {I1} and {I2} overlap or touch (delta = 0)")
    meta = {"I1": [I1.lo, I1.hi], "I2": [I2.lo, I2.hi], "delta": delta,
            "C_A": A.c_total, "environment": env.to_dict()}
    if not A.terms:
        z = np.zeros(len(times))
        meta["uniform"] = _is_velocity(model)
        return DecayTable(times, z, z, np.full(len(times), np.nan), math.nan, True, meta)
    if _is_velocity(model):
        phis = velocity.phi_curve(model, times, env)
        env_phi = np.minimum(velocity.envelope_from_samples(phis), _phi_limit(model, env))
        env_phi[times == 0] = 0.0
        rows = [offdiag_bound(A, I1, I2, model, t, env, phi_tilde=p)
                for t, p in zip(times, env_phi)]
        meta.update({"uniform": True, "model": "velocity",
                     "ir_class": ir_classify(model.form_factor).value})
        decays = ir_classify(model.form_factor) is IRClass.IR_DIVERGENT
    else:
        from . import position
        curves = [position.exponent_curve(model, lab, times, env) for _, lab in A.terms]
        envs = [np.minimum.accumulate(c[::-1])[::-1] for c in curves]
        live = [not offdiag_is_zero(lab, I1, I2) for _, lab in A.terms]
        per = np.zeros(len(times))
        for (c, _), keep, e in zip(A.terms, live, envs):
            if keep:
                per += abs(c) * np.exp(-e)
        rows = [(p, math.nan) for p in per]
        meta.update({"uniform": False, "model": "position", "superselection": "non-uniform"})
        decays = None
    per = np.array([r[0] for r in rows])
    uniform = np.array([r[1] for r in rows])
    fit_target = uniform if _is_velocity(model) else per
    slope = tail_fit(times, fit_target, fit_decades)
    if decays is None:
        # position model: judged from the growth of -log(bound) on the grid
        try:
            with np.errstate(divide="ignore"):
                decays = velocity.envelope_trend(times, -np.log(per), fit_decades).diverging
        except ValueError:
            decays = False
    return DecayTable(times, per, uniform, _local_slopes(times, fit_target), slope, bool(decays), meta)
