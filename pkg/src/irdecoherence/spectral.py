"""Coupling form factor and the weighted spectral integrals built on it.

Every quantity in both models depends on the field coupling only through
the radial density ``J(w) = c**2 * w**(2*sigma) * exp(-2*w/cutoff)`` (or a
tabulated profile).  This module evaluates

    int_0^inf J(w) w**p k(w t) [coth(beta w / 2)] dw

for the kernels ``k`` needed by the decoherence exponents, and classifies
infrared behaviour and boundedness of the Hamiltonian.
"""
import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma

from . import quadrature as quad
from .errors import (CutoffMissing, IRDivergent, Indeterminate,
                     InadmissibleFormFactor, OscillationOverflow)

T_MAX = 1.0e6
CRITICAL_RTOL = 1e-12


class Kernel(str, enum.Enum):
    ONE_MINUS_COS = "one_minus_cos"
    SIN = "sin"
    COS_SQ = "cos_sq"
    SIN_SQ = "sin_sq"


# small-argument order of each kernel
_KERNEL_ORDER = {None: 0, Kernel.ONE_MINUS_COS: 2, Kernel.SIN: 1,
                 Kernel.COS_SQ: 4, Kernel.SIN_SQ: 2}


class IRClass(str, enum.Enum):
    REGULAR = "Regular"
    IR_DIVERGENT = "IRDivergent"


class Boundedness(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class WeightedIntegral:
    value: float
    abs_error_estimate: float
    converged: bool = True

    def __float__(self):
        return float(self.value)


def _fit_small_omega_slope(omega, values, n_fit=6):
    mask = (omega > 0) & (values > 0)
    x = np.log(omega[mask][:n_fit])
    y = np.log(values[mask][:n_fit])
    if len(x) < 3:
        return None, math.inf
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof
    sxx = float(((x - x.mean()) ** 2).sum())
    return float(coef[0]), math.sqrt(s2 / sxx) if sxx > 0 else math.inf


@dataclass(frozen=True)
class FormFactor:
    """Radial coupling density ``J(w)``.

    The default family is ``amplitude**2 * w**(2 sigma) * exp(-2 w / cutoff)``.
    Use :meth:`from_table` for a tabulated profile; its ``sigma`` is then
    half the fitted small-``w`` log-log slope (``None`` when it cannot be
    estimated).
    """

    sigma: float
    cutoff: float = 1.0
    amplitude: float = 1.0
    table_omega: tuple = None
    table_values: tuple = None
    slope_stderr: float = 0.0
    _interp: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.table_omega is None:
            if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
                raise InadmissibleFormFactor(f"amplitude must be finite and >= 0, got {self.amplitude}")
            if not (self.cutoff > 0):
                raise InadmissibleFormFactor(f"cutoff must be positive, got {self.cutoff}")
            if not math.isfinite(self.cutoff):
                raise CutoffMissing("cutoff must be finite for integrable decay")
            if not self.sigma > 0.5:
                raise InadmissibleFormFactor(
                    f"sigma={self.sigma}: need sigma > 1/2 for a finite coupling norm")
            return
        w = np.asarray(self.table_omega, dtype=float)
        j = np.asarray(self.table_values, dtype=float)
        if self.sigma is not None and not self.sigma > 0.5:
            raise InadmissibleFormFactor(
                f"tabulated profile has small-omega slope {2 * self.sigma:.3g} <= 1; "
                "the coupling norm diverges")
        if np.all(j > 0):
            interp = PchipInterpolator(np.log(w), np.log(j), extrapolate=False)
            log_space = True
        else:
            interp = PchipInterpolator(w, j, extrapolate=False)
            log_space = False
        object.__setattr__(self, "_interp", (interp, log_space))

    # construction -----------------------------------------------------
    @classmethod
    def from_table(cls, omega, values):
        w = np.asarray(omega, dtype=float)
        j = np.asarray(values, dtype=float)
        if w.ndim != 1 or w.shape != j.shape or len(w) < 2:
            raise InadmissibleFormFactor("table needs two equal-length columns with >= 2 rows")
        if not (np.all(np.diff(w) > 0) and w[0] > 0):
            raise InadmissibleFormFactor("table omega must be positive and strictly increasing")
        if np.any(j < 0) or not np.all(np.isfinite(j)):
            raise InadmissibleFormFactor("table values must be finite and non-negative")
        if not np.all(np.isfinite(w)):
            raise CutoffMissing("table omega must be finite")
        slope, stderr = _fit_small_omega_slope(w, j)
        sigma = None if slope is None or stderr > 0.05 else slope / 2.0
        return cls(sigma=sigma, cutoff=float(w[-1]), amplitude=1.0,
                   table_omega=tuple(w), table_values=tuple(j),
                   slope_stderr=stderr)

    @classmethod
    def from_csv(cls, path):
        """Read a two-column ``omega,J`` CSV (an optional header row is skipped)."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise
        if not rows:
            raise InadmissibleFormFactor(f"no numeric rows in {path}")
        arr = np.array(rows, dtype=float)
        return cls.from_table(arr[:, 0], arr[:, 1])

    @property
    def tabulated(self):
        return self.table_omega is not None

    def scaled(self, factor):
        """Return ``factor * J`` (amplitude scaled by ``sqrt(factor)``)."""
        if self.tabulated:
            return FormFactor.from_table(self.table_omega, np.asarray(self.table_values) * factor)
        return replace(self, amplitude=self.amplitude * math.sqrt(factor))

    def with_norm(self, target, power=-2):
        """Rescale so that ``int J w**power dw == target``."""
        current = self.moment(power) if not self.tabulated else weighted_norm_sq(self, power).value
        if current == 0:
            if target == 0:
                return self
            raise InadmissibleFormFactor("cannot rescale a zero profile to a non-zero norm")
        return self.scaled(target / current)

    # evaluation -------------------------------------------------------
    @property
    def is_zero(self):
        if self.tabulated:
            return not any(self.table_values)
        return self.amplitude == 0.0

    @property
    def leading_power(self):
        """Exponent ``2 sigma`` of the small-frequency power law."""
        if self.sigma is None:
            raise Indeterminate(
                f"small-omega slope of tabulated profile not estimable (stderr={self.slope_stderr:.3g})")
        return 2.0 * self.sigma

    @property
    def decay_rate(self):
        return 2.0 / self.cutoff

    @property
    def panel_scale(self):
        if self.tabulated:
            return (self.table_omega[-1] - self.table_omega[0]) / 16.0
        return 0.5 * self.cutoff

    @property
    def breakpoints(self):
        return self.table_omega if self.tabulated else ()

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if not self.tabulated:
            c2 = self.amplitude ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                out = c2 * np.power(w, 2.0 * self.sigma) * np.exp(-self.decay_rate * w)
            return np.where(w > 0, out, 0.0)
        interp, log_space = self._interp
        w0, j0 = self.table_omega[0], self.table_values[0]
        out = np.zeros_like(w)
        inside = (w >= w0) & (w <= self.table_omega[-1])
        if log_space:
            out[inside] = np.exp(interp(np.log(w[inside])))
        else:
            out[inside] = interp(w[inside])
        below = (w > 0) & (w < w0)
        if np.any(below):
            slope = 2.0 * self.sigma if self.sigma is not None else 0.0
            out[below] = j0 * (w[below] / w0) ** slope
        return out

    def moment(self, power):
        """Closed form ``int_0^inf J(w) w**power dw`` for the default family."""
        if self.tabulated:
            raise TypeError("closed form available only for the default family")
        s = 2.0 * self.sigma + power + 1.0
        if s <= 0:
            raise IRDivergent(f"int J w^{power} diverges at 0 (2 sigma + p = {s - 1:g} <= -1)")
        return self.amplitude ** 2 * gamma(s) * (0.5 * self.cutoff) ** s

    def omega_max(self, power=0.0, rtol=1e-17):
        """Frequency beyond which ``J w**power`` carries < ``rtol`` of its scale mass."""
        if self.tabulated:
            return float(self.table_omega[-1])
        a = self.decay_rate
        q = 2.0 * self.sigma + power
        ref = max((1.0 / a) ** q * math.exp(-1.0) / a, 1e-300)
        W = (max(q, 0.0) + 1.0) / a
        while True:
            denom = a - q / W if q > 0 else a
            if denom > 0 and W ** q * math.exp(-a * W) / denom <= rtol * ref:
                return W
            W += 0.5 / a


# ---------------------------------------------------------------------------
# integration engine

def _kernel_values(kernel, x):
    if kernel is Kernel.ONE_MINUS_COS:
        return 2.0 * np.sin(0.5 * x) ** 2
    if kernel is Kernel.SIN:
        return np.sin(x)
    if kernel is Kernel.COS_SQ:
        return 4.0 * np.sin(0.5 * x) ** 4
    if kernel is Kernel.SIN_SQ:
        return np.sin(x) ** 2
    return np.ones_like(x)


def _base_integrand(J, power, beta):
    def f(w):
        out = J(w) * np.power(w, float(power))
        if beta is not None:
            out = out / np.tanh(0.5 * beta * w)
        return out
    return f


def _engine(J, power, t, kernel, beta, n):
    f = _base_integrand(J, power, beta)
    lead = J.leading_power + power + _KERNEL_ORDER[kernel] - (1 if beta is not None else 0)
    W = J.omega_max(power=power)
    scale = min(J.panel_scale, W)
    bps = J.breakpoints
    w_lo = W if kernel is None else min(math.pi / t, W)

    # [0, w_lo]: kernel evaluated directly, at most half a period
    edges = quad.panel_edges(0.0, w_lo, scale, bps)
    nodes, weights = quad.panel_nodes(edges, n)
    integrand = lambda w: f(w) * _kernel_values(kernel, w * t)  # noqa: E731
    low = float((integrand(nodes) * weights).sum())
    x0 = edges[0]
    low += float(integrand(np.array([x0]))[0]) * x0 / (lead + 1.0)
    if w_lo >= W:
        return low

    edges = quad.panel_edges(w_lo, W, scale, bps)
    nodes, weights = quad.panel_nodes(edges, n)
    fv = f(nodes)
    i0 = float((fv * weights).sum())
    e1 = quad.fourier_panels(fv, edges, t, n).sum()
    if kernel is Kernel.ONE_MINUS_COS:
        high = i0 - e1.real
    elif kernel is Kernel.SIN:
        high = e1.imag
    else:
        c2 = quad.fourier_panels(fv, edges, 2.0 * t, n).sum().real
        if kernel is Kernel.COS_SQ:
            high = 1.5 * i0 - 2.0 * e1.real + 0.5 * c2
        else:
            high = 0.5 * i0 - 0.5 * c2
    return low + high


def _prescreen(J, power, kernel, beta):
    lead = J.leading_power + power + _KERNEL_ORDER[kernel] - (1 if beta is not None else 0)
    if lead <= -1.0:
        what = f"kernel {kernel.value}" if kernel is not None else "no kernel"
        raise IRDivergent(
            f"integrand ~ w^{lead:g} at w -> 0 ({what}, power {power}"
            f"{', thermal' if beta is not None else ''}) is not integrable")


def _integrate(J, power, t=0.0, kernel=None, beta=None, strict=True):
    if beta is not None and not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not math.isfinite(t):
        raise OscillationOverflow("t must be finite")
    if abs(t) > T_MAX:
        raise OscillationOverflow(f"|t|={abs(t):g} exceeds supported range {T_MAX:g}")
    sign = 1.0
    if t < 0:
        t = -t
        sign = -1.0 if kernel is Kernel.SIN else 1.0
    if kernel is not None and t == 0.0:
        return WeightedIntegral(0.0, 0.0, True)
    try:
        _prescreen(J, power, kernel, beta)
    except IRDivergent:
        if strict:
            raise
        return WeightedIntegral(math.inf, math.inf, False)
    if J.is_zero:
        return WeightedIntegral(0.0, 0.0, True)
    value = _engine(J, power, t, kernel, beta, quad.N_MAIN)
    check = _engine(J, power, t, kernel, beta, quad.N_CHECK)
    err = abs(value - check) + 4 * np.finfo(float).eps * abs(value)
    return WeightedIntegral(sign * value, err, True)


def weighted_norm_sq(J, power, strict=True):
    """``int_0^inf J(w) w**power dw``.

    For the radial reduction this is ``||M**(power/2) h||**2``.

    Raises
    ------
    IRDivergent
        If the integrand is not integrable at ``w = 0`` (unless
        ``strict=False``, in which case a non-converged result is returned).
    """
    return _integrate(J, power, strict=strict)


def oscillatory_integral(J, power, t, kernel, beta=None, strict=True):
    """``int_0^inf J(w) w**power k(w t) [coth(beta w/2)] dw`` for a kernel ``k``.

    Parameters
    ----------
    J : FormFactor
    power : float
        Extra power of ``w``.
    t : float
        Time, ``|t| <= 1e6``.
    kernel : Kernel or str
        One of ``one_minus_cos``, ``sin``, ``cos_sq`` (``(1 - cos)**2``) or
        ``sin_sq``.
    beta : float, optional
        Inverse temperature; inserts ``coth(beta w / 2)``.

    Returns
    -------
    WeightedIntegral
    """
    return _integrate(J, power, t=float(t), kernel=Kernel(kernel), beta=beta, strict=strict)


def ir_classify(J, confidence=2.0):
    """Regular iff ``int_0^1 J(w) w**-3 dw`` is finite, i.e. ``2 sigma > 2``.

    Tabulated profiles are classified from the fitted small-``w`` slope;
    :class:`Indeterminate` is raised when the slope is within
    ``confidence`` standard errors of the boundary.
    """
    if J.tabulated:
        slope = J.leading_power
        if abs(slope - 2.0) <= confidence * J.slope_stderr:
            raise Indeterminate(
                f"slope {slope:.4g} +/- {J.slope_stderr:.2g} too close to the boundary 2")
    return IRClass.REGULAR if J.leading_power - 3.0 > -1.0 else IRClass.IR_DIVERGENT


def coupling_norm_sq(J):
    """``||M^-1 h||^2 = int J w^-2``; closed form for the default family."""
    if J.tabulated:
        return weighted_norm_sq(J, -2).value
    return J.moment(-2)


def boundedness_check(J, model="velocity", omega0=None):
    """Compare ``||M^-1 h||^2`` against 1 (velocity) or ``omega0**2`` (position)."""
    if model == "velocity":
        bound = 1.0
    elif model == "position":
        if omega0 is None or not omega0 > 0:
            raise ValueError("position model needs omega0 > 0")
        bound = float(omega0) ** 2
    else:
        raise ValueError(f"unknown model {model!r}")
    norm = coupling_norm_sq(J)
    rel = (norm - bound) / bound
    if abs(rel) <= CRITICAL_RTOL:
        return Boundedness.CRITICAL
    return Boundedness.SUBCRITICAL if rel < 0 else Boundedness.SUPERCRITICAL


def mode_grid(J, n, scheme="midpoint", omega_min=None, omega_max=None):
    """Discrete modes (nodes, widths) for truncating the field to ``n`` modes.

    ``midpoint`` places nodes at cell centres of a uniform partition of
    ``[omega_min, omega_max]``; ``log`` uses geometric cells, which resolve
    the soft-mode region for infrared-divergent profiles.
    """
    if n < 2:
        raise ValueError("need at least two modes")
    scale = J.cutoff if not J.tabulated else J.table_omega[-1]
    lo = 1e-6 * scale if omega_min is None else omega_min
    if omega_max is None:
        omega_max = J.omega_max(power=0.0, rtol=1e-12) if not J.tabulated else J.table_omega[-1]
    if scheme == "midpoint":
        edges = np.linspace(lo, omega_max, n + 1)
        nodes = 0.5 * (edges[1:] + edges[:-1])
    elif scheme == "log":
        edges = np.geomspace(lo, omega_max, n + 1)
        nodes = np.sqrt(edges[1:] * edges[:-1])
    else:
        raise ValueError(f"unknown grid scheme {scheme!r}")
    return nodes, np.diff(edges)


def field_quadrature(J, t_max=0.0, n=quad.N_MAIN):
    """Nodes and weights for sampling field vectors up to time ``t_max``.

    Uses the same panel construction as the integrals above, with panels
    narrow enough to resolve ``cos(w t_max)``.
    """
    W = J.omega_max(power=0.0, rtol=1e-16)
    scale = min(J.panel_scale, W)
    if t_max > 0:
        scale = min(scale, 1.0 / t_max)
    edges = quad.panel_edges(0.0, W, scale, J.breakpoints, depth=40)
    nodes, weights = quad.panel_nodes(edges, n)
    return nodes.ravel(), weights.ravel()
