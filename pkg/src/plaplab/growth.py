"""Growth and convexity diagnostics for g, and a pathological-growth constructor."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _panels
from .exceptions import HorizonTooSmall, InvalidDomain
from .nonlinearity import Nonlinearity, piecewise_linear

SUBLINEAR = "Sublinear"
LINEAR = "Linear"
SUPERLINEAR = "Superlinear"
EXPONENTIAL = "ExponentialType"
FINITE_LAMBDA = "FiniteLambda"

LINEAR_TOL = 0.05


def critical_exponents(p, N):
    """``(Q1, Qstar, p_star)``; all infinite when ``p == N``."""
    if p > N:
        raise InvalidDomain("need p <= N")
    if p == N:
        return np.inf, np.inf, np.inf
    Q1 = N * (p - 1) / (N - p)
    p_star = N * p / (N - p)
    return Q1, p_star - 1, p_star


@dataclass(frozen=True)
class GrowthReport:
    """Power-law growth of ``g^(p-1)`` at infinity.

    ``Q_estimate`` is the log-log slope over the top decade below the
    horizon and ``M_Q_estimate`` the largest ratio ``g^(p-1) / tau^Q`` on
    that decade.
    """

    Q_estimate: float
    M_Q_estimate: float
    growth_class: str
    Q1: float
    Qstar: float
    p_star: float
    slope_previous: float = np.nan

    @property
    def above_Q1(self):
        return bool(self.Q_estimate > self.Q1)

    @property
    def below_Qstar(self):
        return bool(self.Q_estimate < self.Qstar)


def _slope(x, y):
    return float(np.polyfit(np.log(x), y, 1)[0])


def classify_growth(g, p, N, horizon=1e6, samples_per_decade=20):
    """Classify ``g`` as sublinear, linear, superlinear or exponential type.

    Needs at least two decades below ``horizon`` (the top decade is compared
    with the one before it).
    """
    Q1, Qs, ps = critical_exponents(p, N)
    if np.isfinite(g.endpoint):
        return GrowthReport(np.inf, np.inf, FINITE_LAMBDA, Q1, Qs, ps)
    if not horizon >= 100:
        raise HorizonTooSmall(f"horizon {horizon:g} leaves fewer than two decades above 1")
    top = np.geomspace(horizon / 10, horizon, samples_per_decade + 1)
    prev = top / 10
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        gt = np.asarray(g(top), dtype=float)
        gp = np.asarray(g(prev), dtype=float)
        yt = (p - 1) * np.log(gt)
        yp = (p - 1) * np.log(gp)
    if not (np.all(np.isfinite(yt)) and np.all(np.isfinite(yp))):
        return GrowthReport(np.inf, np.inf, EXPONENTIAL, Q1, Qs, ps)
    Q = _slope(top, yt)
    Qp = _slope(prev, yp)
    M = float(np.max(np.exp(yt - Q * np.log(top))))
    pm1 = p - 1
    if Q - Qp > 0.5 or Q > 50:
        cls = EXPONENTIAL
    elif abs(Q - pm1) < LINEAR_TOL:
        # logarithmic corrections still show as a drift of g / tau
        ratio = gt / top
        drift = ratio[-1] / ratio[0] - 1
        cls = SUPERLINEAR if drift > LINEAR_TOL else LINEAR
    elif Q > pm1:
        cls = SUPERLINEAR
    else:
        cls = SUBLINEAR
    return GrowthReport(Q, M, cls, Q1, Qs, ps, Qp)


@dataclass(frozen=True)
class ConvexityReport:
    """Sampled convexity and superlinearity indicators.

    ``j = t g' - g``, ``J = t phi - p Phi`` with ``phi = (1+g)^(p-1)`` and
    ``Phi`` its primitive, ``h(t) = int_0^t g'(s) (g'(t) - g'(s)) ds`` and
    ``ar_ratio = t phi / Phi``.  ``beta_nondecreasing`` is judged from
    difference quotients of ``gamma`` against the quadrature of ``H``, so it
    is an independent check of ``g_convex``.
    """

    t: np.ndarray
    j: np.ndarray
    J_script: np.ndarray
    h: np.ndarray
    ar_ratio: np.ndarray
    phi: np.ndarray
    Phi: np.ndarray
    g_convex: bool
    beta_nondecreasing: bool


def _grid_integrals(f, t, k=8):
    # cumulative integral of f over the nodes t (t[0] = 0)
    a, b = t[:-1], t[1:]
    xq = _panels.panel_points(a, b, k)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(f(xq), dtype=float)
    return np.concatenate([[0.0], np.cumsum(_panels.integrate(vals, b - a))])


def convexity_diagnostics(g, p, t_grid, tol=1e-10):
    """Evaluate the convexity indicators of ``g`` on ``t_grid``."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise InvalidDomain("t_grid must be increasing and nonnegative")
    lead = t[0] > 0
    if lead:
        t = np.concatenate([[0.0], t])
    gv = np.asarray(g(t), dtype=float)
    dg = np.asarray(g.derivative(t), dtype=float) * np.ones_like(t)
    pm1 = p - 1
    phi = (1 + np.maximum(gv, 0)) ** pm1
    Phi = _grid_integrals(lambda s: (1 + np.maximum(g(s), 0)) ** pm1, t)
    sq = _grid_integrals(lambda s: np.asarray(g.derivative(s), dtype=float) ** 2, t)
    j = t * dg - gv
    J = t * phi - p * Phi
    h = dg * gv - sq
    with np.errstate(divide="ignore", invalid="ignore"):
        ar = np.where(Phi > 0, t * phi / np.where(Phi > 0, Phi, 1.0), np.nan)
    scale = tol * (1 + np.abs(dg[1:]))
    convex = bool(np.all(np.diff(dg) >= -scale))
    # beta on the u side: difference quotients of gamma against H
    dH = np.diff(_grid_integrals(lambda s: 1.0 / (1.0 + g(s)), t))
    dgam = np.diff(pm1 * np.log1p(gv))
    bq = dgam / dH
    bmono = bool(np.all(np.diff(bq) >= -tol * (1 + np.abs(bq[1:]))))
    sl = slice(1, None) if lead else slice(None)
    return ConvexityReport(t[sl], j[sl], J[sl], h[sl], ar[sl], phi[sl], Phi[sl], convex, bmono)


def _line_cuts(F, n, s0, y0, m):
    """Both intersections of ``y0 + m (s - s0)`` with ``n F`` to the right
    of ``s0``, or ``None`` when the line stays below the curve."""

    def d(s):
        with np.errstate(over="ignore"):
            return n * F(s) - (y0 + m * (s - s0))

    if not d(s0) > 0:
        return None
    hi = 2 * s0 + 1
    while d(hi) <= d(0.5 * (s0 + hi)) or d(hi) < 0:
        hi = 2 * hi
        if hi > 1e300:
            return None
    res = minimize_scalar(d, bounds=(s0, hi), method="bounded",
                          options={"xatol": 1e-12 * hi})
    smin = res.x
    if not d(smin) < 0:
        return None
    a = brentq(d, s0, smin, xtol=1e-14 * smin)
    b = brentq(d, smin, hi, xtol=1e-14 * hi)
    return a, b


def construct_counterexample_g(F, horizon=1e12, max_segments=64):
    """Convex piecewise-linear g whose ratio ``g / F`` is unbounded while
    ``int ds / (1 + g) = inf``.

    The first piece is ``g = 0`` on ``[0, 1]``; piece ``n`` has slope
    ``m_n`` (doubled plus one until its line cuts ``n F`` twice, at
    ``s_n' < s_n''``) and ends at
    ``s_n = max(2 s_{n-1}, s_n'' + 1, s_{n-1} + (1 + g(s_{n-1})) e^{m_n})``,
    so that each piece carries at least unit mass of ``1 / (1 + g)``.
    Pieces are added while ``s_n <= horizon``; the zero piece counts as
    one, and :class:`HorizonTooSmall` is raised if no other piece fits.
    """
    s_prev, g_prev, m = 1.0, 0.0, 1.0
    breaks, slopes = [0.0], [0.0]
    lo, hi, ends = [], [], [1.0]
    for n in range(1, max_segments + 1):
        m = 2 * m + 1
        cuts = _line_cuts(F, n, s_prev, g_prev, m)
        while cuts is None:
            m = 2 * m + 1
            if m > 700:  # e^m overflows; nothing further can fit
                break
            cuts = _line_cuts(F, n, s_prev, g_prev, m)
        if cuts is None:
            break
        with np.errstate(over="ignore"):
            s_n = max(2 * s_prev, cuts[1] + 1, s_prev + (1 + g_prev) * np.exp(m))
        if not s_n <= horizon:
            break
        breaks.append(s_prev)
        slopes.append(m)
        lo.append(cuts[0])
        hi.append(cuts[1])
        ends.append(s_n)
        g_prev = g_prev + m * (s_n - s_prev)
        s_prev = s_n
    if len(slopes) < 2:
        raise HorizonTooSmall(
            f"no increasing piece fits below horizon {horizon:g}; only g = 0 on [0, 1]"
        )
    base = piecewise_linear(breaks, slopes, name="counterexample")
    params = dict(base.params)
    params.update(window_lo=lo, window_hi=hi, ends=ends)
    return Nonlinearity(base.form, base.fn, dfn=base.dfn, kind=base.kind,
                        params=params, name=base.name)
