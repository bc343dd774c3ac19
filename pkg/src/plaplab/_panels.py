"""Gauss-Legendre panel rules with a spectral integration matrix.

Every integral in the package is computed panel by panel: the integrand is
sampled at the ``k`` Gauss nodes of each panel and the indefinite integral
at those same nodes is obtained by applying a fixed ``k x k`` matrix.  This
gives cumulative quadrature of order ``2k`` on each panel without nested
loops, so whole grids are processed as ``(n_panels, k)`` arrays.
"""

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as L


@lru_cache(maxsize=None)
def panel_rule(k):
    """Return ``(x, w, S)`` for the ``k``-point rule on [-1, 1].

    ``S[i, j]`` is the integral from -1 to ``x[i]`` of the ``j``-th Lagrange
    basis polynomial, so ``S @ f(x)`` approximates the running integral.
    """
    x, w = L.leggauss(k)
    V = L.legvander(x, k - 1)
    coef = np.linalg.inv(V)  # column j = Legendre coefficients of l_j
    S = np.empty((k, k))
    for j in range(k):
        antider = L.legint(coef[:, j], lbnd=-1.0)
        S[:, j] = L.legval(x, antider)
    x.setflags(write=False)
    w.setflags(write=False)
    S.setflags(write=False)
    return x, w, S


def panel_points(a, b, k):
    """Gauss nodes of every panel ``[a_i, b_i]`` as an ``(n, k)`` array."""
    x, _, _ = panel_rule(k)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid[:, None] + half[:, None] * x[None, :]


def integrate(vals, h):
    """Per-panel integrals of sampled values; ``h`` is the panel width."""
    _, w, _ = panel_rule(vals.shape[1])
    return 0.5 * h * (vals @ w)


def running(vals, h):
    """Integral from each panel's left end to each of its Gauss nodes."""
    _, _, S = panel_rule(vals.shape[1])
    return 0.5 * h[:, None] * (vals @ S.T)


def cumulative(vals, h, start=0.0):
    """Cumulative integral at panel ends and at Gauss nodes.

    Returns ``(ends, inner)`` where ``ends`` has one more entry than there
    are panels (``ends[0] == start``) and ``inner`` has the shape of
    ``vals``.
    """
    totals = integrate(vals, h)
    ends = np.empty(len(totals) + 1)
    ends[0] = start
    np.cumsum(totals, out=ends[1:])
    ends[1:] += start
    inner = ends[:-1, None] + running(vals, h)
    return ends, inner


def reverse_cumulative(vals, h, end=0.0):
    """Integral from each point to the right end of the grid (plus ``end``).

    Returns ``(ends, inner)`` like :func:`cumulative`.
    """
    totals = integrate(vals, h)
    ends = np.empty(len(totals) + 1)
    ends[-1] = end
    ends[:-1] = end + np.cumsum(totals[::-1])[::-1]
    inner = ends[:-1, None] - running(vals, h)
    return ends, inner
