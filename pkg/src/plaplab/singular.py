"""The explicit singular family, Dirac coefficients, atom solves and the
pointwise correspondence check between the two formulations."""

from dataclasses import dataclass, field

import numpy as np

from . import _panels
from .branch import minimal_solution
from .exceptions import InvalidDomain, ParamOutOfRange, TransformDomainExceeded
from .radial import (
    GradientForm,
    OrderZero,
    RadialGrid,
    RadialSolution,
    residual,
    sphere_area,
)


@dataclass
class SingularFamily:
    """``u_m = ln((r^-k - m) / (1 - m))`` and ``v_m = e^{u_m} - 1`` with
    ``k = (N - p) / (p - 1)``.

    ``u_m`` solves ``-Delta_p u = (p - 1) |grad u|^p`` with no source and no
    atom, while ``v_m`` is a multiple of the fundamental solution:
    ``-Delta_p v_m = K delta_0``.
    """

    m: float
    p: float
    N: int
    k: float
    K_mN: float
    u_sol: RadialSolution = field(default=None, repr=False)
    v_sol: RadialSolution = field(default=None, repr=False)

    def u(self, r):
        r = np.asarray(r, dtype=float)
        return np.log((r ** -self.k - self.m) / (1 - self.m))

    def v(self, r):
        r = np.asarray(r, dtype=float)
        return (r ** -self.k - 1) / (1 - self.m)

    def du(self, r):
        r = np.asarray(r, dtype=float)
        return -self.k * r ** (-self.k - 1) / (r ** -self.k - self.m)

    def dv(self, r):
        r = np.asarray(r, dtype=float)
        return -self.k * r ** (-self.k - 1) / (1 - self.m)


def _check_family(m, p, N):
    if not 0 < m < 1:
        raise ParamOutOfRange("m must lie in (0, 1)")
    if not p > 1:
        raise ParamOutOfRange("p>1 required")
    if not p < N:
        raise ParamOutOfRange("the singular family needs p < N")


def um_family(m, p, N, grid=None):
    """Closed-form family sampled on ``grid`` (default geometric grid)."""
    _check_family(m, p, N)
    grid = RadialGrid.geometric() if grid is None else grid
    k = (N - p) / (p - 1)
    fam = SingularFamily(m, p, N, k, _closed_K(m, p, N))
    fam.u_sol = RadialSolution.from_profile(grid, fam.u, fam.du, p, N)
    fam.v_sol = RadialSolution.from_profile(grid, fam.v, fam.dv, p, N)
    return fam


def _closed_K(m, p, N):
    k = (N - p) / (p - 1)
    return sphere_area(N) * (k / (1 - m)) ** (p - 1)


@dataclass
class DiracCoefficient:
    """Closed form of ``K_{m,N}`` and its weak-form estimates.

    ``numerical[rho]`` is ``omega int_rho^1 |v_m'|^(p-1) r^(N-1) dr``, the
    pairing of ``-Delta_p v_m`` with the test function ``1 - r`` over the
    shell ``rho < r < 1``.  It equals ``K (1 - rho)`` up to quadrature
    error, so it approaches ``K`` as ``rho`` shrinks.
    """

    value: float
    numerical: dict
    rel_errors: dict

    @property
    def max_rel_error(self):
        return max(self.rel_errors.values())

    @property
    def monotone_decay(self):
        e = [self.rel_errors[r] for r in sorted(self.rel_errors, reverse=True)]
        return bool(all(b <= a for a, b in zip(e, e[1:])))


def dirac_coefficient(m, p, N, radii=(1e-4, 1e-5, 1e-6), panels_per_decade=8, order=12):
    """``K = omega (k / (1 - m))^(p - 1)`` with a weak-form cross-check."""
    _check_family(m, p, N)
    k = (N - p) / (p - 1)
    K = _closed_K(m, p, N)
    omega = sphere_area(N)
    num, err = {}, {}
    for rho in radii:
        nodes = np.geomspace(rho, 1.0, int(np.ceil(-np.log10(rho) * panels_per_decade)) + 1)
        h = np.diff(nodes)
        rq = _panels.panel_points(nodes[:-1], nodes[1:], order)
        dv = k * rq ** (-k - 1) / (1 - m)
        val = omega * float(np.sum(_panels.integrate(dv ** (p - 1) * rq ** (N - 1), h)))
        num[rho] = val
        err[rho] = abs(val - K) / K
    return DiracCoefficient(K, num, err)


def solve_with_atom(problem, lam=None, **kw):
    """Monotone iteration with the atom ``a delta_0`` kept in every step.

    With ``a = 0`` this is exactly :func:`branch.minimal_solution`.
    """
    if not isinstance(problem.source, OrderZero):
        raise InvalidDomain("atom solves need an order-zero source g")
    return minimal_solution(problem, lam, **kw)


@dataclass
class CorrespondenceReport:
    """Outcome of mapping a solution ``v`` to ``u = H(v)``.

    ``pu_residual`` is the flux-balance residual of ``u`` in the
    gradient-source form, ``alpha_num`` the origin flux of ``u`` (times the
    sphere area) and ``alpha_predicted`` the value implied by the atom of
    ``v``: ``(1 + g(inf))^(1-p) a`` for bounded g, else 0.
    ``roundtrip`` is ``max |Psi(u) - v| / (1 + |v|)``.
    """

    pu_residual: float
    alpha_num: float
    alpha_predicted: float
    roundtrip: float
    u: RadialSolution = field(repr=False, default=None)

    def as_dict(self):
        return {
            "pu_residual": self.pu_residual,
            "alpha_num": self.alpha_num,
            "alpha_predicted": self.alpha_predicted,
            "roundtrip": self.roundtrip,
        }


def _to_u(v, tables, g):
    p, N = v.p, v.N

    def side(vals, dv, flux):
        u = tables.H(vals)
        with np.errstate(over="ignore", invalid="ignore"):
            one_g = 1 + g(vals)
        return u, dv / one_g, flux / one_g ** (p - 1)

    u, du, fl = side(v.u, v.du, v.flux)
    uq, duq, flq = side(v.uq, v.duq, v.fluxq)
    return RadialSolution(v.grid, p, N, u, du, fl, uq, duq, flq, v.converged, v.iterations,
                          {"mapped_from": "v"})


def _origin_flux(sol, N, decade_start):
    # intercept of a straight-line fit of the flux over [r0, 10 r0]
    r = sol.grid.rq.ravel()
    fl = sol.fluxq.ravel()
    sel = (r >= decade_start) & (r <= 10 * decade_start)
    coef = np.polyfit(r[sel], fl[sel], 1)
    return sphere_area(N) * float(coef[1])


def correspondence_check(v, tables, problem, lam=None):
    """Map ``v`` to ``u = H(v)`` and test it against the gradient-source form.

    ``problem`` is the order-zero problem ``v`` solves; the gradient-source
    problem uses ``beta`` from ``tables`` with the same ``lambda`` and
    weight.  Raises :class:`TransformDomainExceeded` when ``v`` leaves
    ``[0, Lambda)``.
    """
    lam = problem.lam if lam is None else float(lam)
    g = problem.source.g if isinstance(problem.source, OrderZero) else tables.as_g_nonlinearity()
    vals = np.concatenate([v.u, v.uq.ravel()])
    if np.any(vals < -1e-12 * (1 + np.max(np.abs(vals)))):
        raise TransformDomainExceeded("v takes negative values")
    if np.isfinite(tables.Lambda) and np.any(vals >= tables.Lambda):
        raise TransformDomainExceeded(f"v reaches Lambda={tables.Lambda:.6g}")
    v = RadialSolution(v.grid, v.p, v.N, np.maximum(v.u, 0), v.du, v.flux,
                       np.maximum(v.uq, 0), v.duq, v.fluxq, v.converged, v.iterations,
                       dict(v.meta))
    u = _to_u(v, tables, g)
    pu = problem.with_(lam=lam, source=GradientForm(tables.as_beta_nonlinearity()))
    eps0 = v.grid.eps0
    exclude = 10 * eps0 if (problem.atom_mass > 0 or problem.weight.singular_exponent > 0) else None
    res = residual(u, pu, exclude=exclude)
    alpha = _origin_flux(u, v.N, 10 * eps0)
    if problem.atom_mass > 0 and tables.g_bounded:
        pred = (1 + tables.g_limit) ** (1 - v.p) * problem.atom_mass
    else:
        pred = 0.0
    uu = np.concatenate([u.u, u.uq.ravel()])
    inside = uu <= tables.t_max
    back = tables.psi_at(uu[inside])
    rt = float(np.max(np.abs(back - vals[inside]) / (1 + np.abs(vals[inside]))))
    return CorrespondenceReport(res, alpha, pred, rt, u)


def family_residual(fam, delta=1e-3):
    """Residuals of ``u_m`` in the gradient form (``beta = p - 1``, no
    source) and of ``v_m`` for the p-Laplace equation, on ``r > delta``."""
    from .catalog import lookup
    from .radial import FixedRHS, RadialProblem

    grid = fam.u_sol.grid
    beta = lookup("linear", fam.p).beta
    pu = RadialProblem(fam.p, fam.N, lam=0.0, source=GradientForm(beta), grid=grid)
    pv = RadialProblem(fam.p, fam.N, lam=0.0, source=FixedRHS(0.0), grid=grid)
    return residual(fam.u_sol, pu, exclude=delta), residual(fam.v_sol, pv, exclude=delta)


__all__ = [
    "SingularFamily",
    "um_family",
    "DiracCoefficient",
    "dirac_coefficient",
    "solve_with_atom",
    "CorrespondenceReport",
    "correspondence_check",
    "family_residual",
]
