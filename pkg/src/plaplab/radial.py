"""Radial p-Laplacian on the unit ball.

A radial solution of ``-Delta_p u = F`` with ``u(1) = 0`` and an optional
Dirac mass ``a`` at the origin is written through its flux

    flux(r) = -r^(N-1) phi_p(u'(r)) = a / omega + int_0^r t^(N-1) F(t) dt,

so that ``u(r) = int_r^1 phi_p^{-1}(flux(s) / s^(N-1)) ds``.  Both integrals
are evaluated with Gauss panels on a grid that is geometric toward the
origin; every solution therefore carries values at the grid nodes and at
the Gauss points of every panel.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union
import csv

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from . import _panels
from .exceptions import (
    BlowUpBeforeBoundary,
    InvalidDomain,
    NonIntegrableSource,
    StiffnessFailure,
)
from .nonlinearity import Nonlinearity


def phi_p(s, p):
    """``|s|^(p-2) s``."""
    s = np.asarray(s, dtype=float)
    return np.sign(s) * np.abs(s) ** (p - 1)


def phi_p_inv(y, p):
    """``|y|^(1/(p-1)) sign(y)``, the inverse of :func:`phi_p`."""
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.abs(y) ** (1.0 / (p - 1))


def sphere_area(N):
    """Area of the unit sphere in R^N."""
    return 2 * np.pi ** (N / 2) / gamma_fn(N / 2)


@dataclass(frozen=True)
class RadialGrid:
    """Nodes ``eps0 = r_0 < ... < r_M = 1`` and ``order`` Gauss points per panel."""

    nodes: np.ndarray
    order: int = 8
    law: str = "geometric"

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or len(r) < 3 or np.any(np.diff(r) <= 0):
            raise InvalidDomain("grid nodes must be strictly increasing")
        if r[-1] != 1.0 or r[0] <= 0:
            raise InvalidDomain("grid must run from a positive eps0 to exactly 1")
        object.__setattr__(self, "nodes", r)

    @classmethod
    def geometric(cls, M=4096, eps0=1e-9, order=8, grade_to_one=False):
        """Geometric toward 0; with ``grade_to_one`` also refined toward 1."""
        if M < 3:
            raise InvalidDomain("need at least 3 nodes")
        if not grade_to_one:
            r = np.geomspace(eps0, 1.0, M)
        else:
            m1 = M // 2
            left = np.geomspace(eps0, 0.5, m1 + 1)
            right = 1 - np.geomspace(0.5, 1e-6, M - m1 - 1)[1:]
            r = np.concatenate([left, right, [1.0]])
        r[-1] = 1.0
        return cls(r, order, "geometric-both" if grade_to_one else "geometric")

    @property
    def M(self):
        return len(self.nodes)

    @property
    def eps0(self):
        return float(self.nodes[0])

    @property
    def h(self):
        return np.diff(self.nodes)

    @property
    def rq(self):
        """Gauss points, shape ``(M-1, order)``."""
        cache = self.__dict__.setdefault("_rq", None)
        if cache is None:
            cache = _panels.panel_points(self.nodes[:-1], self.nodes[1:], self.order)
            cache.setflags(write=False)
            self.__dict__["_rq"] = cache
        return cache

    def integrate(self, vals):
        """Integral over ``[eps0, 1]`` of values sampled at :attr:`rq`."""
        return float(np.sum(_panels.integrate(vals, self.h)))

    def refined(self, factor=2):
        return RadialGrid.geometric((self.M - 1) * factor + 1, self.eps0, self.order,
                                    self.law == "geometric-both")


@dataclass(frozen=True)
class Weight:
    """Nonnegative radial weight ``f``.

    ``const`` is ``f = c``, ``power`` is ``f = r^(-s)`` and ``sampled``
    interpolates a table monotonically.
    """

    kind: str = "const"
    param: Union[float, tuple] = 1.0

    def __post_init__(self):
        if self.kind == "const" and not float(self.param) >= 0:
            raise InvalidDomain("weight must be nonnegative")
        if self.kind not in ("const", "power", "sampled"):
            raise InvalidDomain(f"unknown weight kind {self.kind!r}")

    @classmethod
    def const(cls, c=1.0):
        return cls("const", float(c))

    @classmethod
    def power(cls, s):
        return cls("power", float(s))

    @classmethod
    def sampled(cls, r, f):
        r = tuple(float(x) for x in r)
        f = tuple(float(x) for x in f)
        if min(f) < 0:
            raise InvalidDomain("weight must be nonnegative")
        return cls("sampled", (r, f))

    @property
    def singular_exponent(self):
        return float(self.param) if self.kind == "power" else 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "const":
            return np.full_like(r, float(self.param))
        if self.kind == "power":
            return r ** (-float(self.param))
        tr, tf = self.param
        return PchipInterpolator(tr, tf, extrapolate=True)(r)

    def scaled(self, c):
        if self.kind == "const":
            return Weight.const(c * float(self.param))
        if self.kind == "sampled":
            tr, tf = self.param
            return Weight.sampled(tr, [c * x for x in tf])
        raise InvalidDomain("only const and sampled weights can be rescaled")


@dataclass(frozen=True)
class FixedRHS:
    """Right-hand side ``lambda f(r) F(r)`` independent of the solution."""

    F: Union[Callable, float] = 1.0


@dataclass(frozen=True)
class OrderZero:
    """Right-hand side ``lambda f (1 + g(v+))^(p-1)``."""

    g: Nonlinearity


@dataclass(frozen=True)
class GradientForm:
    """Right-hand side ``beta(u+) |u'|^p + lambda f``."""

    beta: Nonlinearity


Source = Union[FixedRHS, OrderZero, GradientForm]


@dataclass(frozen=True)
class RadialProblem:
    """One radial boundary value problem on the unit ball."""

    p: float
    N: int
    lam: float = 1.0
    weight: Weight = field(default_factory=Weight.const)
    atom_mass: float = 0.0
    source: Source = field(default_factory=FixedRHS)
    grid: RadialGrid = None

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidDomain(f"p>1 required, got p={self.p}")
        if not self.N >= 1:
            raise InvalidDomain("N must be at least 1")
        if self.p > self.N:
            raise InvalidDomain(f"p<=N required, got p={self.p}, N={self.N}")
        if not self.lam >= 0:
            raise InvalidDomain("lambda must be nonnegative")
        if not self.atom_mass >= 0:
            raise InvalidDomain("atom mass must be nonnegative")
        if not self.weight.singular_exponent < self.N:
            raise InvalidDomain("weight r^-s needs s < N to be integrable")
        if self.grid is None:
            object.__setattr__(self, "grid", RadialGrid.geometric())

    @property
    def omega(self):
        return sphere_area(self.N)

    @property
    def log_branch(self):
        """True when an atom is present with ``p == N`` (logarithmic profile)."""
        return self.atom_mass > 0 and self.p == self.N

    def with_(self, **changes):
        return replace(self, **changes)

    def rhs(self, r, u, du):
        """Right-hand side F(r, u, u') of ``-Delta_p u = F``."""
        r = np.asarray(r, dtype=float)
        src = self.source
        f = self.weight(r)
        with np.errstate(over="ignore", invalid="ignore"):
            if isinstance(src, FixedRHS):
                F = src.F(r) if callable(src.F) else src.F
                return self.lam * f * F
            up = np.maximum(u, 0.0)
            if isinstance(src, OrderZero):
                return self.lam * f * (1 + src.g(up)) ** (self.p - 1)
            grad = np.abs(du) ** self.p
            b = src.beta(up)
            # beta may be infinite where the gradient vanishes
            term = np.where(grad > 0, b * grad, 0.0)
            return term + self.lam * f


@dataclass
class RadialSolution:
    """Values, derivatives and flux at the nodes (and at the Gauss points)."""

    grid: RadialGrid
    p: float
    N: int
    u: np.ndarray
    du: np.ndarray
    flux: np.ndarray
    uq: np.ndarray
    duq: np.ndarray
    fluxq: np.ndarray
    converged: bool = True
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def r(self):
        return self.grid.nodes

    @property
    def central_value(self):
        return float(self.u[0])

    @property
    def sup(self):
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.uq))))

    @classmethod
    def from_profile(cls, grid, u, du, p, N, **meta):
        """Sample closed-form ``u`` and ``u'`` on the grid."""
        r, rq = grid.nodes, grid.rq
        with np.errstate(all="ignore"):
            un, dun = np.asarray(u(r), float), np.asarray(du(r), float)
            uq, duq = np.asarray(u(rq), float), np.asarray(du(rq), float)
        return cls(grid, p, N, un, dun, -r ** (N - 1) * phi_p(dun, p),
                   uq, duq, -rq ** (N - 1) * phi_p(duq, p), meta=dict(meta))

    @classmethod
    def zero(cls, grid, p, N):
        z, zq = np.zeros(grid.M), np.zeros(grid.rq.shape)
        return cls(grid, p, N, z, z.copy(), z.copy(), zq, zq.copy(), zq.copy())

    def at(self, r):
        """Monotone interpolation of ``u`` (for plotting and comparisons)."""
        x = np.concatenate([self.r, self.grid.rq.ravel()])
        y = np.concatenate([self.u, self.uq.ravel()])
        order = np.argsort(x)
        return PchipInterpolator(x[order], y[order])(r)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "u", "u_prime", "flux"])
            for row in zip(self.r, self.u, self.du, self.flux):
                w.writerow([repr(float(x)) for x in row])


def _origin_integral(problem, r0, F0):
    # int_0^{r0} t^(N-1) F dt with F ~ F0 (t/r0)^(-s)
    s = problem.weight.singular_exponent
    return r0 ** problem.N * F0 / (problem.N - s)


def green_from_rhs(grid, p, N, Fq, F0, atom=0.0):
    """Solve ``-Delta_p u = F`` given samples ``Fq`` at the Gauss points and
    the origin contribution ``F0 = int_0^{eps0} t^(N-1) F``."""
    if not np.all(np.isfinite(Fq)) or not np.isfinite(F0):
        raise NonIntegrableSource("source is not finite on the grid")
    r, rq, h = grid.nodes, grid.rq, grid.h
    omega = sphere_area(N)
    base = atom / omega + F0
    ends, inner = _panels.cumulative(rq ** (N - 1) * Fq, h, start=base)
    if not (np.all(np.isfinite(ends)) and np.all(np.isfinite(inner))):
        raise NonIntegrableSource("integral of the source diverges")
    G = phi_p_inv(ends / r ** (N - 1), p)
    Gq = phi_p_inv(inner / rq ** (N - 1), p)
    un, uq = _panels.reverse_cumulative(Gq, h)
    return RadialSolution(grid, p, N, un, -G, ends, uq, -Gq, inner)


def green_apply(problem, rhs=None, atom=None):
    """Solve the problem's equation with the right-hand side frozen.

    ``rhs`` may be a callable ``F(r)`` or ``None`` (use the problem's own
    right-hand side evaluated at ``u = 0``).  ``atom`` overrides the
    problem's atom mass.
    """
    grid = problem.grid
    a = problem.atom_mass if atom is None else atom
    if rhs is None:
        F = lambda r: problem.rhs(r, np.zeros_like(r), np.zeros_like(r))
    else:
        F = rhs
    Fq = np.asarray(F(grid.rq), dtype=float) * np.ones(grid.rq.shape)
    F0 = _origin_integral(problem, grid.eps0, float(np.asarray(F(np.array([grid.eps0])))[0]))
    sol = green_from_rhs(grid, problem.p, problem.N, Fq, F0, a)
    if problem.log_branch:
        sol.meta["log_branch"] = True
    return sol


def residual(sol, problem, exclude=None, per_panel=False, endpoint_gap=1e-8):
    """Largest normalized defect of the flux balance over the panels.

    On each panel the change of flux is compared with the integral of
    ``r^(N-1) F(r, u, u')``; the defect is divided by the local scale
    ``max(|change|, |integral|, |flux| h / r)``.  Panels with ``r < exclude``
    are skipped (default ``10 eps0`` when there is an atom or a singular
    weight).  For the gradient form with a finite endpoint ``L``, panels
    where ``u`` comes within ``endpoint_gap * L`` of ``L`` are skipped too.
    """
    grid = problem.grid if sol.grid is None else sol.grid
    r, rq, h = grid.nodes, grid.rq, grid.h
    N = problem.N
    if exclude is None:
        singular = problem.atom_mass > 0 or problem.weight.singular_exponent > 0
        exclude = 10 * grid.eps0 if singular else 0.0
    Fq = problem.rhs(rq, sol.uq, sol.duq)
    integral = _panels.integrate(rq ** (N - 1) * Fq, h)
    change = np.diff(sol.flux)
    mid = 0.5 * (r[1:] + r[:-1])
    scale = np.maximum.reduce([
        np.abs(change), np.abs(integral),
        0.5 * np.abs(sol.flux[1:] + sol.flux[:-1]) * h / mid,
    ])
    with np.errstate(invalid="ignore", divide="ignore"):
        res = np.where(scale > 0, np.abs(change - integral) / np.where(scale > 0, scale, 1), 0.0)
    res = np.where(np.isfinite(res), res, np.inf)
    keep = r[:-1] >= exclude
    src = problem.source
    if isinstance(src, GradientForm) and np.isfinite(src.beta.endpoint):
        # within 1e-8 of a finite endpoint beta(u) is dominated by rounding of L - u
        L = src.beta.endpoint
        keep &= np.all(sol.uq < L - endpoint_gap * L, axis=1)
    if per_panel:
        return res
    return float(np.max(res[keep])) if np.any(keep) else 0.0


@dataclass
class ShotResult:
    """Outcome of one shot: boundary value ``B = u(1)`` and the profile."""

    B: float
    central_value: float
    solution: Optional[RadialSolution]
    nfev: int = 0


def _center_start(problem, c, rs):
    # regular center: flux ~ w_s (r/rs)^kappa, iterated to self-consistency
    N, p = problem.N, problem.p
    u_s, du_s = c, 0.0
    R = float(problem.rhs(np.array([rs]), np.array([c]), np.array([0.0]))[0])
    if not np.isfinite(R):
        # gradient term undefined at the center: start from the source alone
        R = float(problem.lam * problem.weight(np.array([rs]))[0])
    s = problem.weight.singular_exponent
    kappa = N - s
    for _ in range(200):
        w_s = rs ** N * R / kappa
        e = (kappa - N + 1) / (p - 1)
        coef = (w_s / rs ** kappa) ** (1 / (p - 1))
        du_new = -coef * rs ** e
        u_new = c - coef * rs ** (e + 1) / (e + 1)
        R_new = float(problem.rhs(np.array([rs]), np.array([u_new]), np.array([du_new]))[0])
        done = abs(R_new - R) <= 1e-14 * abs(R_new) or R_new == R
        R, u_s, du_s = R_new, u_new, du_new
        if done:
            break
    w_s = rs ** N * R / kappa
    return u_s, w_s, (w_s, kappa, e)


def shoot(problem, central_value, lam=None, r_start=1e-4, rtol=1e-11, record=True,
          cap=1e12):
    """Integrate outward from ``u(0) = central_value``, ``u'(0) = 0``.

    The state is ``(u, w)`` with ``w = r^(N-1) phi_p(-u')``, so the
    degenerate gradient at the center needs no special treatment.  Returns
    :class:`ShotResult` with ``B = u(1)``.
    """
    if lam is not None:
        problem = problem.with_(lam=lam)
    if problem.atom_mass > 0:
        raise InvalidDomain("shooting needs a regular center (atom_mass = 0)")
    c = float(central_value)
    if not c >= 0:
        raise InvalidDomain("central value must be nonnegative")
    src = problem.source
    top = np.inf
    if isinstance(src, OrderZero):
        top = src.g.endpoint
    elif isinstance(src, GradientForm):
        top = src.beta.endpoint
    if c > top or (c == top and not isinstance(src, GradientForm)):
        raise BlowUpBeforeBoundary(f"central value {c:g} is outside [0, {top:g})", 0.0)
    p, N = problem.p, problem.N
    grid = problem.grid
    if c == 0 and problem.lam == 0 and not isinstance(src, FixedRHS):
        sol = RadialSolution.zero(grid, p, N)
        return ShotResult(0.0, 0.0, sol)

    u_s, w_s, series = _center_start(problem, c, r_start)

    def f(r, y):
        u, w = y
        du = -phi_p_inv(max(w, 0.0) / r ** (N - 1), p)
        F = problem.rhs(np.array([r]), np.array([u]), np.array([du]))[0]
        return [du, r ** (N - 1) * F]

    def blow(r, y):
        return cap - abs(y[0]) if np.all(np.isfinite(y)) else -1.0

    blow.terminal = True
    events = [blow]
    if np.isfinite(top):
        def hit_top(r, y):
            return top * (1 - 1e-12) - y[0]
        hit_top.terminal = True
        events.append(hit_top)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = solve_ivp(f, (r_start, 1.0), [u_s, w_s], method="DOP853", rtol=rtol,
                        atol=[1e-14 * max(c, 1e-10), 1e-300], dense_output=record,
                        events=events)
    if out.status == 1:
        rb = float(out.t[-1])
        raise BlowUpBeforeBoundary(f"solution left the admissible range at r={rb:.6g}", rb)
    if out.status != 0 or not np.all(np.isfinite(out.y[:, -1])):
        raise StiffnessFailure(out.message)
    B = float(out.y[0, -1])
    sol = None
    if record:
        sol = _record(problem, out.sol, c, r_start, series)
        sol.meta["B"] = B
    return ShotResult(B, c, sol, int(out.nfev))


def _record(problem, dense, c, rs, series):
    grid = problem.grid
    p, N = problem.p, problem.N
    w_s, kappa, e = series

    def sample(r):
        r = np.asarray(r, dtype=float)
        u = np.empty_like(r)
        w = np.empty_like(r)
        inner = r < rs
        if np.any(~inner):
            yy = dense(r[~inner].ravel())
            u[~inner] = yy[0]
            w[~inner] = yy[1]
        if np.any(inner):
            ri = r[inner]
            coef = (w_s / rs ** kappa) ** (1 / (p - 1))
            u[inner] = c - coef * ri ** (e + 1) / (e + 1)
            w[inner] = w_s * (ri / rs) ** kappa
        du = -phi_p_inv(np.maximum(w, 0) / r ** (N - 1), p)
        return u, du, w

    un, dun, fn = sample(grid.nodes)
    uq, duq, fq = sample(grid.rq)
    return RadialSolution(grid, p, N, un, dun, fn, uq, duq, fq,
                          meta={"central_value": c})


@dataclass(frozen=True)
class NormReport:
    """Radial integrals multiplied by the sphere area.

    ``Lk[k] = omega int |u|^k r^(N-1)``, ``seminorm = omega int |u'|^p
    r^(N-1)``.  ``cutoff_slope`` is the growth rate of the seminorm
    integral restricted to ``[rho, 1]`` per decade of ``1/rho`` near the
    inner end of the grid; it tends to 0 for a finite integral.
    """

    sup: float
    Lk: dict
    seminorm: float
    cutoff_slope: float
    cutoffs: np.ndarray
    partial_seminorms: np.ndarray

    @property
    def seminorm_converged(self):
        return bool(self.cutoff_slope < 0.1)


def norms(sol, p=None, k_list=(1, 2), exclude_decades=1):
    """Sup, L^k and W^{1,p} seminorm of a radial solution."""
    p = sol.p if p is None else p
    grid, N = sol.grid, sol.N
    rq = grid.rq
    omega = sphere_area(N)
    w = rq ** (N - 1)
    Lk = {k: omega * grid.integrate(np.abs(sol.uq) ** k * w) for k in k_list}
    dens = np.abs(sol.duq) ** p * w
    per_panel = _panels.integrate(dens, grid.h)
    tail = omega * np.cumsum(per_panel[::-1])[::-1]  # integral from r_i to 1
    semi = float(tail[0])
    r = grid.nodes[:-1]
    lo = np.log10(grid.eps0) + exclude_decades
    decades = np.arange(np.ceil(lo), 0)
    cut = 10.0 ** decades
    idx = np.searchsorted(r, cut)
    part = tail[np.minimum(idx, len(tail) - 1)]
    slope = 0.0
    if len(part) >= 2 and part[1] > 0:
        slope = float(np.log10(part[0] / part[1])) if part[0] > 0 else 0.0
    return NormReport(sol.sup, Lk, semi, slope, cut, part)
