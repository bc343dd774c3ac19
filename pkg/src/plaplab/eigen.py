"""First eigenpair of the weighted radial p-Laplacian by inverse power iteration."""

from dataclasses import dataclass, field

import numpy as np

from . import _panels
from .exceptions import InvalidDomain, ZeroDenominator
from .radial import (
    RadialGrid,
    RadialSolution,
    Weight,
    green_from_rhs,
    phi_p,
    sphere_area,
)


def rayleigh(w, f, p=None, N=None):
    """``int |w'|^p / int f |w|^p`` over the ball for a radial ``w``."""
    p = w.p if p is None else p
    N = w.N if N is None else N
    grid = w.grid
    rq = grid.rq
    jac = rq ** (N - 1)
    num = grid.integrate(np.abs(w.duq) ** p * jac)
    den = grid.integrate(f(rq) * np.abs(w.uq) ** p * jac)
    if not den > 0:
        raise ZeroDenominator("weighted L^p norm of the trial function vanishes")
    return num / den


@dataclass
class EigenResult:
    """``lambda1`` is the Rayleigh quotient of the returned eigenfunction,
    which is normalized so that ``omega int f phi^p r^(N-1) = 1``.

    ``attained`` is False when the iteration did not settle or when most of
    the weighted mass sits within ``r < 1e-4`` (the minimizing sequence
    escapes to the origin).
    """

    lambda1: float
    eigenfunction: RadialSolution
    attained: bool
    rayleigh_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    origin_mass: float = 0.0


def _profile(grid, u, du, p, N):
    return RadialSolution.from_profile(grid, u, du, p, N)


def first_eigenpair(f=None, p=2.0, N=3, grid=None, tol=1e-9, max_iter=10_000,
                    origin_radius=1e-4, mass_threshold=0.5):
    """Inverse power iteration ``w <- G(f phi_p(w))`` with sup normalization."""
    f = Weight.const(1.0) if f is None else f
    grid = RadialGrid.geometric() if grid is None else grid
    if not p > 1:
        raise InvalidDomain(f"p>1 required, got p={p}")
    if p > N:
        raise InvalidDomain("p<=N required")
    s = f.singular_exponent
    if not s < N:
        raise InvalidDomain("weight r^-s needs s < N")
    rq = grid.rq
    fq = f(rq)
    f0 = float(f(np.array([grid.eps0]))[0])
    if not np.any(fq > 0):
        raise InvalidDomain("weight vanishes identically")
    w = _profile(grid, lambda r: 1 - r, lambda r: -np.ones_like(r), p, N)
    history = []
    R_old = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        F0 = grid.eps0 ** N * f0 * phi_p(w.u[0], p) / (N - s)
        z = green_from_rhs(grid, p, N, fq * phi_p(w.uq, p), F0)
        scale = z.sup
        w = _scaled(z, 1.0 / scale)
        R = rayleigh(w, f, p, N)
        history.append(R)
        if abs(R - R_old) <= tol * abs(R):
            converged = True
            break
        R_old = R
    jac = rq ** (N - 1)
    dens = fq * np.abs(w.uq) ** p * jac
    per_panel = _panels.integrate(dens, grid.h)
    total = per_panel.sum()
    inner = per_panel[grid.nodes[1:] <= origin_radius].sum()
    origin_mass = float(inner / total)
    norm = (sphere_area(N) * total) ** (1.0 / p)
    w = _scaled(w, 1.0 / norm)
    lam = rayleigh(w, f, p, N)
    attained = converged and origin_mass <= mass_threshold
    return EigenResult(lam, w, bool(attained), history, it, converged, origin_mass)


def _scaled(sol, c):
    return RadialSolution(sol.grid, sol.p, sol.N, sol.u * c, sol.du * c,
                          sol.flux * abs(c) ** (sol.p - 1), sol.uq * c, sol.duq * c,
                          sol.fluxq * abs(c) ** (sol.p - 1), sol.converged,
                          sol.iterations, dict(sol.meta))


def hardy_constant(p, N):
    """``((N - p) / p)^p``, the best constant for the weight ``r^-p``."""
    return ((N - p) / p) ** p


def hardy_trial(grid, p, N, delta):
    """``r^(-(N-p)/p + delta) - 1``: its quotient for ``f = r^-p`` tends to
    the Hardy constant as ``delta -> 0``."""
    e = -(N - p) / p + delta
    return _profile(grid, lambda r: r ** e - 1, lambda r: e * r ** (e - 1), p, N)


def trial_battery(grid, p, N):
    """Fixed set of positive trial functions vanishing at ``r = 1``."""
    fns = [
        (lambda r: 1 - r, lambda r: -np.ones_like(r)),
        (lambda r: 1 - r * r, lambda r: -2 * r),
        (lambda r: (1 - r) ** 2, lambda r: -2 * (1 - r)),
        (lambda r: np.cos(np.pi * r / 2), lambda r: -np.pi / 2 * np.sin(np.pi * r / 2)),
        (lambda r: 1 - r ** 3, lambda r: -3 * r * r),
        (lambda r: np.sinc(r), lambda r: np.where(r > 1e-4, (np.cos(np.pi * r) - np.sinc(r)) / r,
                                                  -np.pi ** 2 * r / 3)),
        (lambda r: (1 - r) * (1 + 2 * r), lambda r: 1 - 4 * r),
    ]
    return [_profile(grid, u, du, p, N) for u, du in fns]
