"""Numerical change of unknown between the gradient form and the source form.

Given beta on ``[0, L)`` the maps are

    gamma(t) = int_0^t beta,     Psi(t) = int_0^t exp(gamma / (p-1)),
    g(Psi(t)) = exp(gamma(t) / (p-1)) - 1,   H = Psi^{-1},

and conversely, given g on ``[0, Lambda)``,

    H(v) = int_0^v ds / (1 + g(s)),   beta(H(v)) = (p-1) g'(v).

Both directions are tabulated on graded grids with adaptive Gauss panels;
the inverse map is a monotone cubic Hermite interpolant whose slopes are the
exact derivatives ``1 / (1 + g)``.
"""

from dataclasses import dataclass, field
import csv

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _panels
from .exceptions import (
    DerivativeUnavailable,
    InvalidDomain,
    NonConvergentQuadrature,
    TransformDomainExceeded,
)
from .nonlinearity import BETA, G, Nonlinearity


@dataclass(frozen=True)
class GridSpec:
    """Discretisation controls shared by both directions of the transform.

    ``horizon`` truncates an infinite domain; ``cap`` stops tabulating once
    the transformed variable exceeds it; ``end_offset`` is the relative gap
    kept from a finite endpoint.
    """

    n: int = 10_000
    horizon: float = 1e3
    v_horizon: float = 1e13
    cap: float = 1e12
    end_offset: float = 1e-9
    rtol: float = 1e-10
    order: int = 10
    uniform_fraction: float = 0.1


def graded_grid(top, n, endpoint=np.inf, end_offset=1e-9, uniform_fraction=0.1):
    """Grid on ``[0, top]``: geometric toward a finite ``endpoint``,
    otherwise uniform on ``[0, 1]`` followed by a geometric stretch.

    Returns ``(x, origin)`` where ``origin`` is the index where the
    geometric part starts (used by the tail tests).
    """
    if np.isfinite(endpoint):
        gap0 = endpoint
        gap1 = max(endpoint - top, endpoint * end_offset)
        gaps = np.geomspace(gap0, gap1, n)
        x = endpoint - gaps
        x[0] = 0.0
        return x, 0
    if top <= 1.0:
        return np.linspace(0.0, top, n), n
    n1 = max(int(n * uniform_fraction), 2)
    head = np.linspace(0.0, 1.0, n1)
    tail = np.geomspace(1.0, top, n - n1 + 1)[1:]
    return np.concatenate([head, tail]), n1 - 1


def tail_limit(values, origin=0, window=None, ratio_tol=1e-3, power_min=1.2):
    """Decide whether an increasing sequence of partial integrals converges.

    Increments that decay geometrically (ratio below ``1 - ratio_tol`` and a
    remainder below 1% of the sum) or
    like a power of the index with exponent above ``power_min`` are summed
    in closed form.  Returns ``(limit, converged)``; the limit is ``inf``
    when divergence is detected.
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        return np.inf, False
    d = np.diff(values)
    m = window or max(8, len(d) // 10)
    d = d[-m:]
    last = values[-1]
    scale = max(abs(last), 1e-300)
    if d[-1] <= 1e-16 * scale:
        return last, True
    pos = d > 0
    if np.all(pos):
        rho = d[1:] / d[:-1]
        # node spacing near a finite endpoint is only resolved to ~1e-4
        # relative, so use a robust ratio
        recent = rho[-max(4, len(rho) // 2):]
        r = float(np.median(recent))
        rest = d[-1] * r / (1 - r) if r < 1 else np.inf
        # a slowly decaying (e.g. harmonic) tail also has ratios below one;
        # its extrapolated remainder is not small, so leave it to the power test
        if r < 1 - ratio_tol and np.quantile(recent, 0.9) < 1 and rest <= 1e-2 * scale:
            return last + rest, True
        idx = np.arange(len(values) - len(d), len(values), dtype=float) - origin
        keep = idx > 0
        if keep.sum() >= 4:
            slope = np.polyfit(np.log(idx[keep]), np.log(d[keep]), 1)[0]
            e = -slope
            if e > power_min:
                return last + d[-1] * idx[-1] / (e - 1), True
    return np.inf, False


def _monotone_slopes(x, y, dy):
    # Fritsch-Carlson limiter for increasing data
    dy = np.array(dy, dtype=float)
    delta = np.diff(y) / np.diff(x)
    a = dy[:-1] / np.where(delta > 0, delta, 1.0)
    b = dy[1:] / np.where(delta > 0, delta, 1.0)
    s = a * a + b * b
    bad = s > 9.0
    if np.any(bad):
        tau = np.where(bad, 3.0 / np.sqrt(np.where(bad, s, 1.0)), 1.0)
        left = np.where(bad, tau * a * delta, dy[:-1])
        right = np.where(bad, tau * b * delta, dy[1:])
        dy[:-1] = np.minimum(dy[:-1], left)
        dy[1:] = np.minimum(dy[1:], right)
    flat = delta <= 0
    if np.any(flat):
        dy[:-1][flat] = 0.0
        dy[1:][flat] = 0.0
    return dy


def _hermite(x, y, dy, monotone=True):
    dy = np.where(np.isfinite(dy), dy, 0.0)
    if monotone:
        dy = _monotone_slopes(x, y, dy)
    return CubicHermiteSpline(x, y, dy, extrapolate=False)


def _panel_step(f, a, b, k, with_exp):
    """Per-panel integral of ``f`` and, optionally, of ``exp(running int f)``
    (the latter relative to the panel's left end)."""
    xq = _panels.panel_points(a, b, k)
    h = b - a
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        fq = f(xq)
    fq = np.broadcast_to(np.asarray(fq, dtype=float), xq.shape)
    if not np.all(np.isfinite(fq)):
        where = a[~np.all(np.isfinite(fq), axis=1)][0]
        raise NonConvergentQuadrature(f"integrand is not finite near {where:.6g}")
    if np.any(fq < 0):
        raise InvalidDomain("beta takes negative values")
    total = _panels.integrate(fq, h)
    if not with_exp:
        return total, None
    return total, _panels.integrate(np.exp(_panels.running(fq, h)), h)


def _adaptive(f, a, b, k, rtol, with_exp, depth=0, max_depth=40):
    """Adaptive :func:`_panel_step`: panels whose value changes by more than
    ``rtol`` under bisection are split recursively."""
    g1, e1 = _panel_step(f, a, b, k, with_exp)
    m = 0.5 * (a + b)
    gl, el = _panel_step(f, a, m, k, with_exp)
    gr, er = _panel_step(f, m, b, k, with_exp)
    g2 = gl + gr
    bad = np.abs(g1 - g2) > rtol * np.abs(g2)
    if with_exp:
        with np.errstate(over="ignore"):
            e2 = el + np.exp(gl) * er
        bad |= np.abs(e1 - e2) > rtol * np.abs(e2)
    else:
        e2 = None
    bad &= (b - a) > 1e-15 * np.maximum(np.abs(a), 1e-300)
    if np.any(bad) and depth < max_depth:
        idx = np.flatnonzero(bad)
        gL, eL = _adaptive(f, a[idx], m[idx], k, rtol, with_exp, depth + 1, max_depth)
        gR, eR = _adaptive(f, m[idx], b[idx], k, rtol, with_exp, depth + 1, max_depth)
        g2 = g2.copy()
        g2[idx] = gL + gR
        if with_exp:
            e2 = e2.copy()
            with np.errstate(over="ignore"):
                e2[idx] = eL + np.exp(gL) * eR
    elif np.any(bad):
        ref = e2 if with_exp else g2
        other = e1 if with_exp else g1
        worst = np.max(np.abs(other - ref)[bad] / np.abs(ref)[bad])
        if not worst < 1e-6:
            raise NonConvergentQuadrature(f"panel refinement stalled (relative change {worst:.2e})")
    return g2, e2


def _cumulate(f, x, k, rtol, scale=None):
    """Running ``F = int f`` at the nodes and, if ``scale`` is given,
    ``P = int exp(scale * F)``.  Returns ``(F, P)``."""
    a, b = x[:-1], x[1:]
    if scale is None:
        d, _ = _adaptive(f, a, b, k, rtol, False)
        return np.concatenate([[0.0], np.cumsum(d)]), None
    fs = lambda s: scale * f(s)
    d, e = _adaptive(fs, a, b, k, rtol, True)
    F = np.concatenate([[0.0], np.cumsum(d)])
    with np.errstate(over="ignore"):
        P = np.concatenate([[0.0], np.cumsum(np.exp(F[:-1]) * e)])
    return F / scale, P


@dataclass(frozen=True)
class TransformTables:
    """Tabulated gamma, Psi and g at the nodes ``t`` (with ``v = psi``).

    ``L`` and ``Lambda`` are the endpoints of the u- and v-domains, with
    ``*_converged`` flags from the tail test; ``gamma_limit`` is
    ``gamma(L)`` (infinite when g is unbounded).  ``truncated`` is true
    when the table stops before the end of the domain because of the
    horizon or the cap.
    """

    t: np.ndarray
    gamma: np.ndarray
    psi: np.ndarray
    g: np.ndarray
    beta: np.ndarray
    p: float
    L: float
    Lambda: float
    L_converged: bool
    Lambda_converged: bool
    gamma_limit: float
    gamma_converged: bool
    truncated: bool
    source: Nonlinearity = field(repr=False, default=None)
    _splines: dict = field(repr=False, default_factory=dict, compare=False)

    @property
    def g_bounded(self):
        return bool(np.isfinite(self.gamma_limit))

    @property
    def g_limit(self):
        return float(np.expm1(self.gamma_limit / (self.p - 1)))

    def _spline(self, name):
        s = self._splines.get(name)
        if s is None:
            pm1 = self.p - 1
            if name == "psi":
                s = _hermite(self.t, self.psi, 1 + self.g)
            elif name == "H":
                s = _hermite(self.psi, self.t, 1 / (1 + self.g))
            elif name == "g":
                s = _hermite(self.psi, self.g, self.beta / pm1)
            self._splines[name] = s
        return s

    @property
    def v_max(self):
        return float(self.psi[-1])

    @property
    def t_max(self):
        return float(self.t[-1])

    def psi_at(self, t):
        """Psi(t) for ``0 <= t <= t_max``; beyond the table raises."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_max * (1 + 1e-14)):
            raise TransformDomainExceeded(f"t outside tabulated range [0, {self.t_max:.6g}]")
        return self._spline("psi")(np.clip(t, 0, self.t_max))

    def H(self, v):
        """u = H(v); beyond the table H continues with its last slope
        (only when the u-domain is unbounded)."""
        v = np.asarray(v, dtype=float)
        if np.any(v < 0):
            raise TransformDomainExceeded("negative argument to H")
        out = self._spline("H")(np.minimum(v, self.v_max))
        over = v > self.v_max
        if np.any(over):
            if np.isfinite(self.L) and not self.truncated:
                if np.isfinite(self.Lambda) and np.any(v[over] > self.Lambda):
                    raise TransformDomainExceeded(f"v beyond Lambda={self.Lambda:.6g}")
                # the remaining piece up to L is tiny; interpolate linearly to (Lambda, L)
                if np.isfinite(self.Lambda):
                    w = (v[over] - self.v_max) / (self.Lambda - self.v_max)
                    out = np.where(over, self.t_max + w * (self.L - self.t_max), out)
                else:
                    out = np.where(over, self.t_max + (v - self.v_max) / (1 + self.g[-1]), out)
                    out = np.minimum(out, self.L)
            else:
                out = np.where(over, self.t_max + (v - self.v_max) / (1 + self.g[-1]), out)
        return out

    def g_at(self, v):
        """g(v) from the table; bounded g is continued by its limit,
        otherwise linearly with the last slope."""
        v = np.asarray(v, dtype=float)
        out = self._spline("g")(np.clip(v, 0, self.v_max))
        over = v > self.v_max
        if np.any(over):
            if np.isfinite(self.Lambda) and np.any(v[over] >= self.Lambda):
                raise TransformDomainExceeded(f"v beyond Lambda={self.Lambda:.6g}")
            if self.g_bounded and not self.truncated:
                ext = np.full_like(v, self.g_limit)
            else:
                ext = self.g[-1] + (v - self.v_max) * self.beta[-1] / (self.p - 1)
            out = np.where(over, ext, out)
        return out

    def gprime_at(self, v):
        """g'(v) = beta(H(v)) / (p-1)."""
        return self.beta_at(self.H(v)) / (self.p - 1)

    def beta_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.source is not None and self.source.is_beta:
            return self.source(t)
        if self.source is not None and self.source.dfn is not None:
            return (self.p - 1) * self.source.derivative(self.psi_at(t))
        return (self.p - 1) * self._spline("g").derivative()(self.psi_at(t))

    def as_g_nonlinearity(self):
        if self.source is not None and not self.source.is_beta:
            return self.source
        return Nonlinearity(G, self.g_at, endpoint=self.Lambda, dfn=self.gprime_at,
                            kind="sampled", name="tabulated g")

    def as_beta_nonlinearity(self):
        if self.source is not None and self.source.is_beta:
            return self.source
        return Nonlinearity(BETA, self.beta_at, endpoint=self.L, kind="sampled",
                            name="tabulated beta")

    def roundtrip_error(self, t=None):
        """max |H(Psi(t)) - t| at the given points (default: midpoints)."""
        if t is None:
            t = 0.5 * (self.t[1:] + self.t[:-1])
        return float(np.max(np.abs(self.H(self.psi_at(t)) - t)))

    def relation_error(self):
        """max relative defect of (1+g(Psi))^(p-1) = exp(gamma) on the nodes."""
        lhs = (self.p - 1) * np.log1p(self.g)
        return float(np.max(np.abs(np.expm1(lhs - self.gamma))))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "gamma", "psi", "g", "beta"])
            for row in zip(self.t, self.gamma, self.psi, self.g, self.beta):
                w.writerow([repr(float(x)) for x in row])


def _check_p(p):
    if not p > 1:
        raise InvalidDomain(f"p>1 required, got p={p}")


def build_transform(beta, p, grid=GridSpec()):
    """Tabulate gamma, Psi and g from a beta-form nonlinearity."""
    _check_p(p)
    if not isinstance(beta, Nonlinearity) or not beta.is_beta:
        raise InvalidDomain("build_transform expects a beta-form nonlinearity")
    L = float(beta.endpoint)
    pm1 = p - 1.0
    k = grid.order
    top = L * (1 - grid.end_offset) if np.isfinite(L) else grid.horizon

    # coarse pass to locate where Psi passes the cap
    xc, _ = graded_grid(top, 400, L, grid.end_offset, grid.uniform_fraction)
    pc = _rough_psi(beta, xc, k, 1.0 / pm1)
    truncated = not np.isfinite(L)
    hit = np.flatnonzero(~(pc <= grid.cap))
    if hit.size:
        top = xc[hit[0]]
        truncated = True

    x, origin = graded_grid(top, grid.n, L, grid.end_offset, grid.uniform_fraction)
    gam, psi = _cumulate(beta, x, k, grid.rtol, 1.0 / pm1)
    if not np.all(np.isfinite(psi)):
        raise NonConvergentQuadrature("Psi overflowed inside the table")
    g = np.expm1(gam / pm1)
    b = np.asarray(beta(x), dtype=float) * np.ones_like(x)

    gam_lim, gam_conv = tail_limit(gam, origin)
    if not np.isfinite(L):
        gam_lim, gam_conv = _infinite_tail_gamma(beta, gam, x, gam_lim, gam_conv)
        Lam, Lam_conv = np.inf, True  # Psi(t) >= t
    elif hit.size:
        Lam, Lam_conv = np.inf, False
    else:
        Lam, Lam_conv = tail_limit(psi, origin)
    return TransformTables(
        t=x, gamma=gam, psi=psi, g=g, beta=b, p=float(p), L=L, Lambda=float(Lam),
        L_converged=True, Lambda_converged=bool(Lam_conv),
        gamma_limit=float(gam_lim), gamma_converged=bool(gam_conv),
        truncated=bool(truncated), source=beta,
    )


def _rough_psi(f, x, k, scale):
    # fixed-rule pass used only to locate the cap; overflow propagates as inf
    a, b = x[:-1], x[1:]
    h = b - a
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        fq = scale * np.asarray(f(_panels.panel_points(a, b, k)), dtype=float)
        fq = np.where(np.isnan(fq), np.inf, fq)
        F = np.concatenate([[0.0], np.cumsum(_panels.integrate(fq, h))])
        inc = np.exp(F[:-1]) * _panels.integrate(np.exp(_panels.running(fq, h)), h)
        return np.concatenate([[0.0], np.cumsum(inc)])


def _infinite_tail_gamma(beta, gam, x, lim, conv):
    # on an unbounded u-domain the graded tail test sees increments per
    # geometric step; beta * t decaying is the signature of convergence
    if conv:
        return lim, conv
    tail = x[-max(8, len(x) // 20):]
    bt = np.asarray(beta(tail), dtype=float) * tail
    if bt[-1] > 0 and np.all(np.diff(bt) < 0):
        # decay exponent of beta*t per unit log t
        e = -np.polyfit(np.log(tail), np.log(np.maximum(bt, 1e-300)), 1)[0]
        if e > 0.2:
            return gam[-1] + bt[-1] / e, True
    if bt[-1] == 0:
        return gam[-1], True
    return np.inf, False


def g_to_beta(g, p, grid=GridSpec()):
    """Tabulate H, L and beta from a g-form nonlinearity.

    The returned tables use the same layout as :func:`build_transform`, with
    ``psi`` holding the v-grid and ``t = H(v)``.
    """
    _check_p(p)
    if not isinstance(g, Nonlinearity) or g.is_beta:
        raise InvalidDomain("g_to_beta expects a g-form nonlinearity")
    if g.dfn is None:
        raise DerivativeUnavailable(f"{g.name or g.kind} has no differentiable reconstruction")
    Lam = float(g.endpoint)
    pm1 = p - 1.0
    k = grid.order
    top = Lam * (1 - grid.end_offset) if np.isfinite(Lam) else grid.v_horizon

    xc, _ = graded_grid(top, 400, Lam, grid.end_offset, grid.uniform_fraction)
    gc = g(xc)
    if np.any(gc[np.isfinite(gc)] < -1e-14):
        raise InvalidDomain("g takes negative values")
    hit = np.flatnonzero(~(np.abs(gc) < 1e300))
    truncated = not np.isfinite(Lam)
    if hit.size:
        top = xc[max(hit[0] - 1, 1)]
        truncated = True

    v, origin = graded_grid(top, grid.n, Lam, grid.end_offset, grid.uniform_fraction)
    inv = lambda s: 1.0 / (1.0 + g(s))
    H, _ = _cumulate(inv, v, k, grid.rtol)
    with np.errstate(over="ignore"):
        gv = np.asarray(g(v), dtype=float)
        dg = np.asarray(g.derivative(v), dtype=float) * np.ones_like(v)
    gam = pm1 * np.log1p(gv)
    beta = pm1 * dg
    L, L_conv = tail_limit(H, origin)
    if not np.isfinite(Lam) and not L_conv:
        L = np.inf
    gam_lim, gam_conv = tail_limit(gam, origin)
    if not gam_conv and not np.isfinite(Lam):
        # bounded g reveals itself through a vanishing log-slope of g
        gtail = gv[-max(8, len(gv) // 20):]
        if np.all(np.diff(gtail) >= 0) and (gtail[-1] - gtail[0]) <= 1e-6 * (1 + gtail[-1]):
            gam_lim, gam_conv = gam[-1], True
    return TransformTables(
        t=H, gamma=gam, psi=v, g=gv, beta=beta, p=float(p), L=float(L), Lambda=Lam,
        L_converged=bool(L_conv), Lambda_converged=True,
        gamma_limit=float(gam_lim), gamma_converged=bool(gam_conv),
        truncated=bool(truncated), source=g,
    )
