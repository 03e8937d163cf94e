"""Composite Gauss-Legendre and Filon-Legendre quadrature on panel meshes.

Panels are graded geometrically toward the singular end of an integrand
(algebraic behaviour near zero frequency) and are uniform where the
integrand is smooth.  Oscillatory factors ``exp(i w t)`` are integrated
exactly against the Legendre interpolant of the smooth part, so the cost
of a panel does not depend on ``t``.
"""
from functools import lru_cache

import numpy as np
from scipy.special import eval_legendre, spherical_jn

N_MAIN = 20
N_CHECK = 12

# panels with kappa = half_width * t below this are integrated directly
_DIRECT_KAPPA = 6.0
_DEPTH = 60


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _legendre_projection(n):
    """Matrix T with c_k = sum_j T[k, j] f(x_j) for the interpolant at GL nodes."""
    x, w = gauss_legendre(n)
    k = np.arange(n)
    T = (2 * k[:, None] + 1) / 2.0 * w[None, :] * eval_legendre(k[:, None], x[None, :])
    T.setflags(write=False)
    return T


def panel_edges(lo, hi, scale, breakpoints=(), depth=_DEPTH):
    """Panel edges covering ``[lo, hi]``.

    Below ``scale`` the edges are geometric (ratio 2); above it they are
    spaced by ``scale``.  When ``lo == 0`` the geometric refinement stops
    at ``min(hi, scale) * 2**-depth`` and the returned first edge is that
    positive value; the caller owns the remaining sliver ``[0, edges[0]]``.
    """
    if not hi > lo:
        return np.array([lo, hi], dtype=float)
    g = min(hi, scale)
    pts = [hi]
    if lo == 0.0:
        pts.extend(g * 0.5 ** np.arange(depth + 1))
    elif lo < g:
        x = lo
        while x < g:
            pts.append(x)
            x *= 2.0
        pts.append(g)
    else:
        pts.append(lo)
    start = max(lo, g)
    if hi > start:
        n_uniform = int(np.ceil((hi - start) / scale))
        pts.extend(np.linspace(start, hi, n_uniform + 1))
    pts.extend(b for b in breakpoints if lo < b < hi)
    edges = np.unique(np.asarray(pts, dtype=float))
    if lo > 0.0:
        edges = edges[edges >= lo]
    edges = edges[edges <= hi]
    # drop slivers produced by merging breakpoints into the mesh
    keep = np.concatenate([[True], np.diff(edges) > 1e-14 * np.maximum(edges[1:], 1e-300)])
    return edges[keep]


def panel_nodes(edges, n=N_MAIN):
    """Nodes and weights of an ``n``-point rule on every panel, shape (P, n)."""
    x, w = gauss_legendre(n)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes, weights


def fourier_panels(f_values, edges, freq, n=N_MAIN):
    """Filon-Legendre approximation of ``int f(w) exp(i w freq) dw`` per panel.

    ``f_values`` are samples of ``f`` at :func:`panel_nodes` (shape (P, n)).
    Returns a complex array of panel contributions.
    """
    x, w = gauss_legendre(n)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    kappa = half * freq
    out = np.empty(len(mid), dtype=complex)
    direct = np.abs(kappa) <= _DIRECT_KAPPA
    if np.any(direct):
        phase = np.exp(1j * kappa[direct, None] * x[None, :])
        out[direct] = (phase * w[None, :] * f_values[direct]).sum(axis=1)
    far = ~direct
    if np.any(far):
        k = np.arange(n)
        # int_{-1}^{1} P_k(x) exp(i kappa x) dx = 2 i^k j_k(kappa)
        moments = 2.0 * (1j ** k)[None, :] * spherical_jn(k[None, :], kappa[far, None])
        coeffs = f_values[far] @ _legendre_projection(n).T
        out[far] = (moments * coeffs).sum(axis=1)
    return out * half * np.exp(1j * mid * freq)
