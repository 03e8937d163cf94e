"""Position coupling ``H = (P^2 + w0^2 Q^2)/2 + Q Phi(h) + H_F`` (Friedrichs model).

The phase-space flow is the rotation generated by the energy operator
``Mhat`` whose square is the bordered operator

    Mhat^2 = [[w0^2, <h|.>], [h, M^2]].

The computational path discretizes the field into modes and diagonalizes
the (N+1)x(N+1) bordered matrix.  The spectral density of the particle
row, obtained independently from the boundary values of the resolvent
``G(z) = 1 / (w0^2 - z - Sigma(z))``, serves as a cross-check.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg
from scipy.optimize import brentq

from . import quadrature as quad
from .curves import DecoherenceCurve
from .environment import VACUUM, exponent as env_exponent
from .errors import EigenFailure, OnCut, Unbounded
from .phase_space import FieldVector, PhasePoint, WeightRole
from .spectral import (Boundedness, boundedness_check, coupling_norm_sq, ir_classify,
                       mode_grid)

EIG_CLAMP_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class FriedrichsOperator:
    """Discretized ``Mhat^2`` with its cached eigendecomposition."""

    omega0: float
    form_factor: object
    nodes: np.ndarray
    widths: np.ndarray
    couplings: np.ndarray
    boundedness: Boundedness
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, J, omega0, n=2000, scheme="midpoint", omega_min=None, omega_max=None):
        nodes, widths = mode_grid(J, n, scheme, omega_min, omega_max)
        return cls.from_modes(J, omega0, nodes, widths)

    @classmethod
    def from_modes(cls, J, omega0, nodes, widths):
        from .oracle import discrete_couplings

        if not omega0 > 0:
            raise ValueError("omega0 must be positive")
        bd = boundedness_check(J, "position", omega0)
        if bd is Boundedness.SUPERCRITICAL:
            raise Unbounded(f"||M^-1 h||^2 = {coupling_norm_sq(J):.17g} > omega0^2 = {omega0 ** 2:g}")
        nodes = np.asarray(nodes, dtype=float)
        widths = np.asarray(widths, dtype=float)
        g = discrete_couplings(J, nodes, widths, "position", omega0)
        K = _bordered(omega0, nodes, g)
        try:
            lam, vec = scipy.linalg.eigh(K)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise EigenFailure(str(exc)) from exc
        if not np.all(np.isfinite(lam)):
            raise EigenFailure("non-finite eigenvalues")
        tol = EIG_CLAMP_RTOL * max(abs(lam[-1]), 1.0)
        if lam[0] < -tol:
            raise Unbounded(f"discretized Mhat^2 has negative eigenvalue {lam[0]:.3g}")
        lam = np.maximum(lam, 0.0)
        for arr in (nodes, widths, g, lam, vec):
            arr.setflags(write=False)
        return cls(float(omega0), J, nodes, widths, g, bd, lam, vec)

    @property
    def n(self):
        return len(self.nodes)

    def matrix(self):
        return _bordered(self.omega0, self.nodes, self.couplings)

    @property
    def frequencies(self):
        return np.sqrt(self.eigenvalues)

    @property
    def particle_weights(self):
        """``|<e0|k>|^2`` for every eigenvector."""
        return self.eigenvectors[0] ** 2

    def metadata(self):
        J = self.form_factor
        return {"model": "position", "omega0": self.omega0, "sigma": J.sigma,
                "cutoff": J.cutoff, "amplitude": J.amplitude, "tabulated": J.tabulated,
                "coupling_norm_sq": coupling_norm_sq(J), "boundedness": self.boundedness.value,
                "n_modes": self.n, "superselection": "non-uniform"}


def _bordered(omega0, nodes, g):
    n = len(nodes)
    K = np.zeros((n + 1, n + 1))
    K[0, 0] = omega0 ** 2
    K[0, 1:] = g
    K[1:, 0] = g
    K[np.arange(1, n + 1), np.arange(1, n + 1)] = nodes ** 2
    return K


def _sinc_t(nu, t):
    """``sin(nu t) / nu`` with the ``nu -> 0`` limit ``t``."""
    out = np.empty(np.broadcast(nu, t).shape)
    nu_b, t_b = np.broadcast_arrays(nu, t)
    small = nu_b * np.abs(t_b) < 1e-8
    out[~small] = np.sin(nu_b[~small] * t_b[~small]) / nu_b[~small]
    out[small] = t_b[small]
    return out


def flow_vectors(op, label, times):
    """Mode-amplitude vectors ``(a,u)(t)`` and ``(b,v)(t)``, each of shape (T, N+1)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    nu = op.frequencies
    V = op.eigenvectors
    A = label.a * V[0]
    B = label.b * V[0]
    c = np.cos(np.outer(times, nu))
    s = np.sin(np.outer(times, nu))
    sinc = _sinc_t(nu[None, :], times[:, None])
    first = (c * A + sinc * B) @ V.T
    second = (-nu * s * A + c * B) @ V.T
    return first, second


def _to_point(op, first, second):
    root = np.sqrt(op.widths)
    return PhasePoint(first[0], FieldVector(op.nodes, first[1:] / root, WeightRole.MINUS_ONE, op.widths),
                      second[0], FieldVector(op.nodes, second[1:] / root, WeightRole.PLUS_ONE, op.widths))


def flow(op, label, t):
    """Phase point at ``t`` from ``(a, 0, b, 0)``, by rotation in the eigenbasis."""
    first, second = flow_vectors(op, label, [t])
    return _to_point(op, first[0], second[0])


def exponent(op, label, t, env=VACUUM):
    """``-log|chi|`` from the flowed field components."""
    p = flow(op, label, t)
    return env_exponent(p.u, p.v, env)


def exponent_curve(op, label, times, env=VACUUM):
    first, second = flow_vectors(op, label, times)
    w = op.nodes
    weight = np.ones_like(w) if env.thermal_beta is None else 1.0 / np.tanh(0.5 * env.thermal_beta * w)
    u, v = first[:, 1:], second[:, 1:]
    return 0.25 * ((u * u * w + v * v / w) * weight).sum(axis=1)


def decoherence_curve(op, label, times, env=VACUUM):
    times = np.asarray(times, dtype=float)
    first, second = flow_vectors(op, label, times)
    expo = exponent_curve(op, label, times, env)
    meta = dict(op.metadata())
    meta.update({"environment": env.to_dict(), "label": {"a": label.a, "b": label.b},
                 "ir_class": ir_classify(op.form_factor).value})
    per_b2 = expo / label.b ** 2 if label.b != 0 else np.zeros_like(expo)
    envelope = np.minimum.accumulate(per_b2[::-1])[::-1]
    return DecoherenceCurve(times, first[:, 0], second[:, 0], np.exp(-expo), expo, envelope, meta)


def c00_diag(op, times):
    """``<e0|cos(Mhat t)|e0>`` from the eigendecomposition."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return np.cos(np.outer(times, op.frequencies)) @ op.particle_weights


def s00_diag(op, times):
    """``<e0|Mhat^-1 sin(Mhat t)|e0>`` from the eigendecomposition."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return _sinc_t(op.frequencies[None, :], times[:, None]) @ op.particle_weights


# ---------------------------------------------------------------------------
# resolvent route

def self_energy(op, z):
    """``Sigma(z) = int J(w) / (w^2 - z) dw`` of the continuum form factor.

    With ``r = sqrt(z)`` (``Im r > 0``) and ``g(w) = J(w) / (w + r)`` the
    near-singular factor ``1 / (w - r)`` is removed by subtracting
    ``g(Re r)``, whose integral against ``1 / (w - r)`` is a logarithm.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise OnCut(f"z = {z} lies on the spectrum [0, inf)")
    J = op.form_factor if isinstance(op, FriedrichsOperator) else op
    if J.is_zero:
        return 0j
    W = J.omega_max(power=0.0)
    r = np.sqrt(z)
    if r.imag < 0:
        r = -r
    x0 = min(max(r.real, 0.0), W)
    g0 = complex(J(x0)) / (x0 + r)

    def rem(w):
        return (J(w) / (w + r) - g0) / (w - r)

    # panels graded geometrically toward x0 down to a fraction of Im r
    delta = max(abs(r.imag), 1e-300)
    reach = max(x0, W - x0)
    offsets = delta * 2.0 ** np.arange(-10, 200)
    offsets = offsets[offsets < reach]
    uniform = np.arange(0.0, W, min(J.panel_scale, W) / 4)
    edges = np.concatenate([[0.0, W], x0 - offsets, x0 + offsets, [x0], uniform])
    edges = np.unique(edges[(edges >= 0.0) & (edges <= W)])
    nodes, wts = quad.panel_nodes(edges, quad.N_MAIN)
    total = complex(np.sum(rem(nodes) * wts))
    re, im = total.real, total.imag
    return complex(re, im) + g0 * (np.log(W - r) - np.log(-r))


def boundary_self_energy(J, omegas, n=quad.N_MAIN, power=0.0):
    """``int J(s) s**power / (s^2 - w^2 - i0) ds`` for every ``w``.

    Real part: the principal value, written as
    ``int (g(s) - g(w)) / (s - w) ds + g(w) log((W - w)/w)`` with
    ``g(s) = J(s) s**power / (s + w)``.  Imaginary part: ``pi g(w)``.
    ``power = 0`` gives ``Sigma(w^2 + i0)``.
    """

    def Jp(x):
        return J(x) * x ** power if power else J(x)

    omegas = np.asarray(omegas, dtype=float)
    W = J.omega_max(power=0.0)
    edges = quad.panel_edges(0.0, W, min(J.panel_scale, W), J.breakpoints)
    s, ws = quad.panel_nodes(edges, n)
    s, ws = s.ravel(), ws.ravel()
    Js = Jp(s)
    out = np.empty(len(omegas), dtype=complex)
    for lo in range(0, len(omegas), 512):
        w = omegas[lo:lo + 512]
        gs = Js[None, :] / (s[None, :] + w[:, None])
        gw = Jp(w) / (2 * w)
        diff = s[None, :] - w[:, None]
        hit = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = (gs - gw[:, None]) / diff
        if np.any(hit):
            # coincident node: the quotient tends to g'(w)
            rows = np.nonzero(hit)[0]
            wr = w[rows]
            h = 1e-5 * wr
            deriv = (Jp(wr + h) / (2 * wr + h) - Jp(wr - h) / (2 * wr - h)) / (2 * h)
            quotient[hit] = deriv
        re = quotient @ ws
        with np.errstate(divide="ignore", invalid="ignore"):
            re = re + np.where(w < W, gw * np.log((W - w) / w), 0.0)
        out[lo:lo + 512] = re + 1j * np.pi * gw
    return out


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Spectral measure of the particle row of ``Mhat^2``.

    ``rho00`` is tabulated against ``lambdas`` (eigenvalues of ``Mhat^2``);
    the moments are integrals over the full measure, point masses included.
    """

    lambdas: np.ndarray
    rho00: np.ndarray
    point_masses: tuple = ()
    mass: float = float("nan")
    first_moment: float = float("nan")
    second_moment: float = float("nan")
    extrapolation_error: float = float("nan")
    small_lambda_exponent: float = None
    boundedness: Boundedness = None
    _omega_panels: tuple = field(default=None, repr=False)

    @property
    def point_mass(self):
        return self.point_masses[0] if self.point_masses else None

    def cos_transform(self, times):
        """``int cos(sqrt(lambda) t) rho00(lambda) d lambda`` (point masses included)."""
        return self._transform(times, sine=False)

    def sin_transform(self, times):
        """``int sin(sqrt(lambda) t)/sqrt(lambda) rho00 d lambda``."""
        return self._transform(times, sine=True)

    def _transform(self, times, sine):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros(len(times))
        if self._omega_panels is not None:
            edges, nodes, rho_w = self._omega_panels
            f = rho_w / nodes if sine else rho_w
            for i, t in enumerate(times):
                val = quad.fourier_panels(f, edges, t).sum()
                out[i] = val.imag if sine else val.real
        for lam0, weight in self.point_masses:
            nu = math.sqrt(lam0)
            out += weight * (_sinc_t(np.array(nu), times) if sine else np.cos(nu * times))
        return out

    def to_csv(self):
        from .io import csv_text
        return csv_text({"lambda": self.lambdas, "rho00": self.rho00})

    def metadata(self):
        return {"point_masses": [{"lambda": l, "weight": w} for l, w in self.point_masses],
                "mass": self.mass, "first_moment": self.first_moment,
                "second_moment": self.second_moment,
                "extrapolation_error": self.extrapolation_error,
                "small_lambda_exponent": self.small_lambda_exponent,
                "boundedness": None if self.boundedness is None else self.boundedness.value}


def _density_w(op, nodes):
    """``rho_w(w) = J(w) / |w0^2 - w^2 - Sigma(w^2 + i0)|^2`` (density per unit ``w``).

    The denominator is evaluated as ``(w0^2 - Sigma(0)) - w^2 (1 + Sigma_2)``
    with ``Sigma_2 = int J s^-2 / (s^2 - w^2 - i0) ds``, which avoids the
    cancellation between ``w0^2`` and ``Sigma(0)`` near criticality.
    """
    J = op.form_factor
    sig2 = boundary_self_energy(J, nodes.ravel(), power=-2.0).reshape(nodes.shape)
    gap = 0.0 if op.boundedness is Boundedness.CRITICAL else op.omega0 ** 2 - coupling_norm_sq(J)
    D = gap - nodes ** 2 * (1.0 + sig2)
    return J(nodes) / np.abs(D) ** 2


def _refine(op, edges, rtol=1e-14, max_rounds=12):
    """Bisect panels until the density integral is resolved on each panel."""
    for _ in range(max_rounds):
        nodes, wts = quad.panel_nodes(edges, quad.N_MAIN)
        cn, cw = quad.panel_nodes(edges, quad.N_CHECK)
        fine = (_density_w(op, nodes) * wts).sum(axis=1)
        coarse = (_density_w(op, cn) * cw).sum(axis=1)
        total = abs(fine.sum())
        bad = np.abs(fine - coarse) > rtol * max(total, 1e-300)
        if not np.any(bad):
            break
        mids = 0.5 * (edges[:-1] + edges[1:])[bad]
        edges = np.unique(np.concatenate([edges, mids]))
    return edges


def _richardson_probe(op, omegas, eps_factors=(1e-4, 1e-5, 1e-6)):
    """Largest relative gap between the eps -> 0 extrapolated density and the boundary value."""
    w0sq = op.omega0 ** 2
    direct = _density_w(op, np.asarray(omegas)) / (2 * np.asarray(omegas))  # per unit lambda
    worst = 0.0
    for w, ref in zip(omegas, direct):
        lam = w * w
        eps = np.array(eps_factors) * w0sq
        vals = []
        for e in eps:
            G = 1.0 / (w0sq - (lam + 1j * e) - self_energy(op, lam + 1j * e))
            vals.append(G.imag / math.pi)
        # quadratic in eps through the three offsets, evaluated at eps = 0
        extrap = np.polyval(np.polyfit(eps / eps[0], vals, 2), 0.0)
        worst = max(worst, abs(extrap - ref) / max(abs(ref), 1e-300))
    return worst


def spectral_density(op, n_lambda=400, richardson_probes=5):
    """Spectral density of ``e0`` for ``Mhat^2`` from resolvent boundary values."""
    J = op.form_factor
    if op.boundedness is Boundedness.SUPERCRITICAL:
        raise Unbounded("supercritical coupling")
    w0sq = op.omega0 ** 2
    if J.is_zero:
        lam = np.linspace(0.0, 2 * w0sq, n_lambda)
        return SpectralDensity(lam, np.zeros_like(lam), ((w0sq, 1.0),), 1.0, w0sq, w0sq ** 2,
                               0.0, None, op.boundedness, None)
    W = J.omega_max(power=0.0)
    base = quad.panel_edges(0.0, W, min(J.panel_scale, W), J.breakpoints, depth=40)
    base = np.unique(np.concatenate([base, [op.omega0]]) if op.omega0 < W else base)
    edges = _refine(op, base)
    nodes, wts = quad.panel_nodes(edges, quad.N_MAIN)
    rho_w = _density_w(op, nodes)
    mass = float((rho_w * wts).sum())
    m1 = float((rho_w * nodes ** 2 * wts).sum())
    m2 = float((rho_w * nodes ** 4 * wts).sum())

    points = []
    if op.boundedness is Boundedness.CRITICAL:
        # zero mode (1, -M^-2 h) is normalizable iff int J w^-4 < inf
        if J.leading_power - 4.0 > -1.0:
            from .spectral import weighted_norm_sq
            points.append((0.0, 1.0 / (1.0 + weighted_norm_sq(J, -4).value)))
    bound_state = _upper_bound_state(op, W)
    if bound_state is not None:
        points.append(bound_state)
    for lam0, weight in points:
        mass += weight
        m1 += weight * lam0
        m2 += weight * lam0 ** 2

    w_grid = np.linspace(0.0, W, n_lambda + 1)[1:]
    rho_l = _density_w(op, w_grid) / (2 * w_grid)
    small_exp = None
    if op.boundedness is Boundedness.CRITICAL:
        probe = op.omega0 * np.geomspace(1e-5, 1e-4, 6)
        dens = _density_w(op, probe) / (2 * probe)
        small_exp = float(np.polyfit(np.log(probe ** 2), np.log(dens), 1)[0])
    extrap = float("nan")
    if richardson_probes:
        lo, hi = 0.25 * op.omega0, min(2.0 * op.omega0, 0.5 * W)
        extrap = _richardson_probe(op, np.linspace(lo, hi, richardson_probes))
    return SpectralDensity(w_grid ** 2, rho_l, tuple(points), mass, m1, m2, extrap, small_exp,
                           op.boundedness, (edges, nodes, rho_w))


def _upper_bound_state(op, W):
    """Isolated eigenvalue above the support of ``J`` (tabulated profiles only)."""
    J = op.form_factor
    if not J.tabulated:
        return None
    lam_edge = W * W

    def D_safe(lam):
        return op.omega0 ** 2 - lam - _real_sigma_above(J, lam)

    lo = lam_edge * (1 + 1e-9)
    if D_safe(lo) <= 0:
        return None
    hi = max(2 * lam_edge, 2 * op.omega0 ** 2 + 1.0)
    while D_safe(hi) > 0:
        hi *= 2
    lam0 = brentq(D_safe, lo, hi, xtol=1e-15, rtol=1e-14)
    deriv = scipy.integrate.quad(lambda s: J(s) / (s * s - lam0) ** 2, 0.0, W, limit=500)[0]
    return (lam0, 1.0 / (1.0 + deriv))


def _real_sigma_above(J, lam):
    W = J.omega_max(power=0.0)
    return scipy.integrate.quad(lambda s: J(s) / (s * s - lam), 0.0, W, limit=500)[0]
