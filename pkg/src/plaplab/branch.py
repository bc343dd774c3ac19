"""Minimal solutions, the extremal parameter, energy, stability and shooting sweeps."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import os

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.linalg import eigh
from scipy.optimize import brentq

from . import _panels
from .exceptions import (
    BlowUpBeforeBoundary,
    InvalidDomain,
    NonIntegrableSource,
    StiffnessFailure,
    UnsupportedP,
)
from .growth import EXPONENTIAL, FINITE_LAMBDA, critical_exponents
from .radial import (
    OrderZero,
    RadialProblem,
    RadialSolution,
    green_apply,
    green_from_rhs,
    norms,
    residual,
    shoot,
    sphere_area,
)

CAP = 1e12


@dataclass
class Diverged:
    """Returned instead of a solution when the monotone scheme does not settle.

    ``reason`` is one of ``cap`` (sup exceeded the cap), ``finite_lambda``
    (values approached the end of the domain of g), ``certificate`` (the
    increments grow pointwise, see :func:`minimal_solution`) or
    ``max_iter``.
    """

    lam: float
    reason: str
    iterations: int
    sup: float
    last: RadialSolution = field(default=None, repr=False)

    converged = False

    def __bool__(self):
        return False


def _g_of(problem):
    if not isinstance(problem.source, OrderZero):
        raise InvalidDomain("the monotone scheme needs an order-zero source g")
    return problem.source.g


def _scheme_rhs(problem, g, lam):
    grid, p, N = problem.grid, problem.p, problem.N
    fq = problem.weight(grid.rq)
    f0 = float(problem.weight(np.array([grid.eps0]))[0])
    s = problem.weight.singular_exponent
    pm1 = p - 1

    def step(v):
        with np.errstate(over="ignore", invalid="ignore"):
            Fq = lam * fq * (1 + g(np.maximum(v.uq, 0))) ** pm1
            F0 = grid.eps0 ** N * lam * f0 * (1 + g(max(v.u[0], 0.0))) ** pm1 / (N - s)
        return green_from_rhs(grid, p, N, Fq, float(F0), problem.atom_mass)

    return step


def _diff(a, b):
    return np.concatenate([(a.u - b.u), (a.uq - b.uq).ravel()])


def _vals(a):
    return np.concatenate([a.u, a.uq.ravel()])


def minimal_solution(problem, lam=None, tol=1e-9, max_iter=100_000, cap=CAP,
                     certify=False, callback=None):
    """Monotone iteration ``v_{n+1} = G(lambda f (1 + g(v_n))^(p-1))`` from 0.

    Converges when ``|v_{n+1} - v_n| < tol (1 + |v_{n+1}|)`` at every point,
    which implies the same bound with ``sup v_{n+1}`` on the right and stays
    meaningful when an atom makes ``v`` very large near the origin.  With
    ``certify`` the iteration may stop early: on convergence, once
    ``w = v_n + K (v_n - v_{n-1})`` with ``K`` from the observed
    contraction rate satisfies ``T(w) <= w``.  Then ``w`` is a discrete
    supersolution, so the scheme is bounded; the current iterate is returned
    unconverged with ``meta["bounded"] = True``.  On divergence, for ``p = 2`` and convex ``g`` only,
    once the increments grow by a factor above one at every point for three
    consecutive steps (the linearized operator then has spectral radius
    above one along the orbit, which rules out a minimal solution).
    ``callback(n, v_n)`` is called with every iterate.
    """
    lam = problem.lam if lam is None else float(lam)
    g = _g_of(problem)
    grid, p, N = problem.grid, problem.p, problem.N
    Lam = g.endpoint
    step = _scheme_rhs(problem, g, lam)
    v = RadialSolution.zero(grid, p, N)
    if lam == 0 and problem.atom_mass == 0:
        v.iterations = 1
        v.meta.update(lam=lam, contraction=0.0)
        return v
    convex = certify and p == 2 and _convex_g(g)
    prev_d = None
    grow = 0
    rho = np.nan
    prev_delta = None
    for n in range(1, max_iter + 1):
        try:
            w = step(v)
        except NonIntegrableSource:
            return Diverged(lam, "cap", n, np.inf, v)
        sup = w.sup
        if callback is not None:
            callback(n, w)
        if not np.isfinite(sup) or sup > cap:
            return Diverged(lam, "cap", n, sup, v)
        if np.isfinite(Lam) and np.max(_vals(w)) >= Lam * (1 - 1e-9):
            return Diverged(lam, "finite_lambda", n, sup, v)
        d = _diff(w, v)
        dmax = float(np.max(np.abs(d)))
        delta = float(np.max(np.abs(d) / (1 + np.abs(_vals(w)))))
        if prev_delta is not None and prev_delta > 0:
            rho = dmax / prev_delta
        prev_delta = dmax
        v = w
        if delta < tol:
            v.converged = True
            v.iterations = n
            v.meta.update(lam=lam, contraction=rho)
            return v
        if certify and n >= 5 and np.isfinite(rho) and rho < 1 and n % 5 == 0:
            K = 1.05 / (1 - rho)
            if _is_supersolution(step, v, d, K, Lam):
                v.iterations = n
                v.meta.update(lam=lam, contraction=rho, bounded=True)
                return v
        if convex and prev_d is not None:
            mask = prev_d > 1e-8 * np.max(prev_d)
            ratio = np.min(d[mask] / prev_d[mask]) if np.any(mask) else 0.0
            grow = grow + 1 if ratio > 1 + 1e-9 else 0
            if grow >= 3:
                return Diverged(lam, "certificate", n, sup, v)
        prev_d = d
    return Diverged(lam, "max_iter", max_iter, v.sup, v)


def _convex_g(g, upto=50.0, n=513):
    x = np.linspace(0, upto if not np.isfinite(g.endpoint) else g.endpoint * 0.99, n)
    try:
        d = np.asarray(g.derivative(x), dtype=float)
    except Exception:
        return False
    d = d[np.isfinite(d)]
    return bool(np.all(np.diff(d) >= -1e-12 * (1 + np.abs(d[1:]))))


def _is_supersolution(step, v, d, K, Lam):
    n = len(v.u)
    bump = K * d
    w = RadialSolution(v.grid, v.p, v.N, v.u + bump[:n], v.du, v.flux,
                       v.uq + bump[n:].reshape(v.uq.shape), v.duq, v.fluxq)
    if np.isfinite(Lam) and np.max(_vals(w)) >= Lam:
        return False
    Tw = step(w)
    return bool(np.all(_vals(Tw) <= _vals(w) * (1 + 1e-12) + 1e-14))


def lambda_small(problem, a_values=None):
    """Explicit lower bound for the extremal parameter.

    With ``w = G(f)`` and any ``a`` with ``a |w|_inf < Lambda``, ``a w`` is a
    supersolution for every ``lambda <= a^(p-1) / (1 + g(a |w|_inf))^(p-1)``;
    the bound is maximized over a log-spaced set of ``a``.
    """
    g = _g_of(problem)
    base = problem.with_(lam=1.0, atom_mass=0.0)
    w = green_apply(base, rhs=lambda r: problem.weight(r))
    W = w.sup
    if a_values is None:
        a_values = np.geomspace(1e-6, 1e6, 241)
    a = np.asarray(a_values, dtype=float)
    if np.isfinite(g.endpoint):
        a = a[a * W < g.endpoint]
    pm1 = problem.p - 1
    with np.errstate(over="ignore", invalid="ignore"):
        vals = a ** pm1 / (1 + g(a * W)) ** pm1
    vals = vals[np.isfinite(vals)]
    return float(np.max(vals)) if vals.size else 0.0


@dataclass
class LambdaStarResult:
    """Bracket ``lo < lambda* <= hi``; ``infinite`` when no divergence was
    found up to ``lambda_max``.  ``probes`` lists ``(lambda, converged)``."""

    lo: float
    hi: float
    infinite: bool = False
    probes: list = field(default_factory=list)
    lambda_small: float = 0.0

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi) if not self.infinite else np.inf


def find_lambda_star(problem, bracket_hint=1.0, rel_tol=1e-4, lambda_max=100.0,
                     max_iter=100_000, tol=1e-9):
    """Bisect on the convergence of the monotone scheme."""
    probes = []

    def ok(lam):
        res = minimal_solution(problem, lam, tol=tol, max_iter=max_iter, certify=True)
        good = bool(res) and (res.converged or res.meta.get("bounded", False))
        probes.append((float(lam), good))
        return good

    lo = lambda_small(problem)
    lsmall = lo
    hi = float(bracket_hint)
    if lo > 0 and lo >= hi:
        lo = 0.5 * hi
    while lo > 0 and not ok(lo):
        lo *= 0.5
        if lo < 1e-12:
            raise InvalidDomain("no convergent lambda found; is G(f) bounded?")
    while ok(hi):
        lo = hi
        if hi >= lambda_max:
            return LambdaStarResult(lo, np.inf, True, probes, lsmall)
        hi = min(hi * 10, lambda_max)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return LambdaStarResult(lo, hi, False, probes, lsmall)


@dataclass
class ExtremalReport:
    """Minimal solutions approaching the extremal parameter."""

    lambdas: np.ndarray
    sups: np.ndarray
    seminorms: np.ndarray
    central_values: np.ndarray
    solution: RadialSolution
    central_extrapolated: float
    bounded_trend: bool
    prediction: "RegularityPrediction" = None


def extremal_solution(problem, star=None, levels=8, r=np.inf, growth=None, **kw):
    """Minimal solutions at ``lambda_j = lo (1 - 2^-j)`` and at ``lo``.

    The central value at ``lambda*`` is also extrapolated with the fold law
    ``v(0) ~ s* - B sqrt(lambda* - lambda)``.
    """
    if star is None:
        star = find_lambda_star(problem, **kw)
    if star.infinite:
        raise InvalidDomain("extremal solution needs a finite lambda*")
    lams = [star.lo * (1 - 2.0 ** -j) for j in range(1, levels + 1)] + [star.lo]
    sols = []
    for lam in lams:
        s = minimal_solution(problem, lam)
        if not getattr(s, "converged", False):
            raise StiffnessFailure(f"minimal solution failed below lambda* at {lam:g}")
        sols.append(s)
    sups = np.array([s.sup for s in sols])
    semis = np.array([norms(s).seminorm for s in sols])
    cent = np.array([s.central_value for s in sols])
    lam_star = 0.5 * (star.lo + star.hi)
    x = np.sqrt(np.maximum(lam_star - np.array(lams), 0))
    use = slice(-3, None)
    A = np.vstack([np.ones(3), x[use]]).T
    s_star = float(np.linalg.lstsq(A, cent[use], rcond=None)[0][0])
    # bounded when the last increments shrink like a square-root law would
    inc = np.diff(sups[:-1])
    bounded = bool(np.all(np.isfinite(sups)) and (len(inc) < 2 or inc[-1] <= inc[-2] * 1.5))
    pred = None
    if growth is not None:
        pred = regularity_prediction(problem.p, problem.N, r, growth)
    return ExtremalReport(np.array(lams), sups, semis, cent, sols[-1], s_star, bounded, pred)


def _Phi(g, v, p, panels=8, k=10):
    # primitive of (1 + g(s+))^(p-1) from 0 to v, vectorized over v
    v = np.asarray(v, dtype=float)
    shape = v.shape
    flat = v.ravel()
    x, w, _ = _panels.panel_rule(k)
    edges = np.linspace(0, 1, panels + 1)
    total = np.zeros_like(flat)
    for a, b in zip(edges[:-1], edges[1:]):
        t = (0.5 * (a + b) + 0.5 * (b - a) * x)[None, :] * flat[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            vals = (1 + g(np.maximum(t, 0))) ** (p - 1)
        total += 0.5 * (b - a) * flat * (vals @ w)
    return total.reshape(shape)


def energy(v, lam, problem):
    """``J = (1/p) int |v'|^p - lambda int f Phi(v)`` over the ball."""
    g = _g_of(problem)
    grid, p, N = v.grid, problem.p, problem.N
    rq = grid.rq
    jac = sphere_area(N) * rq ** (N - 1)
    kin = grid.integrate(np.abs(v.duq) ** p * jac) / p
    pot = grid.integrate(problem.weight(rq) * _Phi(g, v.uq, p) * jac)
    return float(kin - lam * pot)


def stability_battery(v, g, n_modes=8):
    """``(1 - r) T_k(2r - 1)`` for ``k < n_modes`` plus ``g(v)``, as
    ``(values, derivatives)`` at the Gauss points."""
    r = v.grid.rq
    x = 2 * r - 1
    vals, ders = [], []
    for k in range(n_modes):
        c = np.zeros(k + 1)
        c[k] = 1
        T = C.chebval(x, c)
        dT = 2 * C.chebval(x, C.chebder(c)) if k > 0 else np.zeros_like(r)
        vals.append((1 - r) * T)
        ders.append(-T + (1 - r) * dT)
    vals.append(g(v.uq))
    ders.append(g.derivative(v.uq) * v.duq)
    return np.array(vals), np.array(ders)


def stability_check(v, lam, problem, battery=None, span=True):
    """Smallest normalized second variation of the energy over a battery.

    For radial functions the form is ``(p-1) int |v'|^(p-2) psi'^2 -
    (p-1) lambda int f (1+g(v))^(p-2) g'(v) psi^2`` divided by
    ``int psi^2``.  With ``span`` the minimum is taken over the linear span
    of the battery (a Rayleigh-Ritz eigenvalue), otherwise over its members.
    The integrals use the solution's own quadrature, so a sharp boundary
    layer of ``g(v)`` (bounded g at large ``lambda``) needs a grid graded
    toward ``r = 1``.
    """
    p, N = problem.p, problem.N
    if p < 2:
        raise UnsupportedP("the stability form needs p >= 2")
    g = _g_of(problem)
    grid = v.grid
    rq = grid.rq
    vals, ders = stability_battery(v, g) if battery is None else battery
    jac = rq ** (N - 1)
    wts = 0.5 * grid.h[:, None] * _panels.panel_rule(grid.order)[1][None, :]
    a = (p - 1) * np.abs(v.duq) ** (p - 2) * jac * wts
    with np.errstate(over="ignore", invalid="ignore"):
        b = ((p - 1) * lam * problem.weight(rq) * (1 + g(np.maximum(v.uq, 0))) ** (p - 2)
             * g.derivative(np.maximum(v.uq, 0)) * jac * wts)
    m = jac * wts
    D = ders.reshape(len(ders), -1)
    V = vals.reshape(len(vals), -1)
    A = (D * a.ravel()) @ D.T - (V * b.ravel()) @ V.T
    M = (V * m.ravel()) @ V.T
    if not span:
        return float(np.min(np.diag(A) / np.diag(M)))
    # drop numerically dependent directions before the generalized eigenproblem
    s, U = np.linalg.eigh(M)
    keep = s > 1e-12 * s.max()
    P = U[:, keep] / np.sqrt(s[keep])
    return float(eigh(P.T @ A @ P, eigvals_only=True)[0])


@dataclass
class ShootingCurve:
    """Boundary values ``B(a)`` over central values and their refined roots."""

    a: np.ndarray
    B: np.ndarray
    roots: list
    blowups: list = field(default_factory=list)
    root_B: list = field(default_factory=list)


def _threads():
    try:
        return max(1, int(os.environ.get("PLAPLAB_THREADS", "1")))
    except ValueError:
        return 1


def _B(problem, a):
    try:
        return shoot(problem, a, record=False).B
    except (BlowUpBeforeBoundary, StiffnessFailure):
        return np.nan


def shoot_sweep(problem, lam=None, a_max=10.0, count=64, a_min=1e-3, btol=1e-6,
                merge=1e-4):
    """Scan ``B(a)`` on ``{0} U geomspace(a_min, a_max)`` and refine sign changes."""
    if lam is not None:
        problem = problem.with_(lam=lam)
    top = np.inf
    if isinstance(problem.source, OrderZero):
        top = problem.source.g.endpoint
    if np.isfinite(top):
        a_max = min(a_max, top * (1 - 1e-9))
    a = np.concatenate([[0.0], np.geomspace(a_min, a_max, count - 1)])
    with ThreadPoolExecutor(_threads()) as ex:
        B = np.array(list(ex.map(lambda x: _B(problem, x), a)))
    blow = [float(x) for x, b in zip(a, B) if not np.isfinite(b)]
    roots, rootB = [], []
    if B[0] == 0:
        roots.append(0.0)
        rootB.append(0.0)
    for i in range(len(a) - 1):
        b0, b1 = B[i], B[i + 1]
        if not (np.isfinite(b0) and np.isfinite(b1)) or b0 == 0:
            continue
        if b1 == 0 or np.sign(b0) != np.sign(b1):
            if b1 == 0:
                x = a[i + 1]
            else:
                x = brentq(lambda s: _B(problem, s), a[i], a[i + 1], xtol=1e-14, rtol=1e-14,
                           maxiter=200)
            bx = _B(problem, x)
            if roots and abs(x - roots[-1]) < merge:
                continue
            roots.append(float(x))
            rootB.append(float(bx))
    return ShootingCurve(a, B, roots, blow, rootB)


@dataclass(frozen=True)
class RegularityPrediction:
    """Dimension thresholds and integrability exponents for ``v*``.

    ``N0`` bounds the dimension for boundedness and ``N1`` for finite energy
    under a weight in ``L^r``; ``sigma_bar`` and ``tau_bar`` are the
    integrability exponents above those thresholds.  ``boot`` holds the
    exponents for ``-Delta_p U = F`` with ``F`` in ``L^r``;
    ``growth_case`` names the applicable case of the growth-based
    regularity table and ``growth_verdict`` its conclusion.
    """

    p: float
    N: float
    r: float
    N0: float
    N1: float
    sigma_bar: float
    tau_bar: float
    boot: dict
    extremal_bounded: str
    extremal_in_W1p: str
    growth_case: str
    growth_verdict: str
    growth_bounded: bool
    Q1: float
    Qstar: float
    p_star: float


def _inv(x):
    return np.inf if x <= 0 else 1.0 / x


def regularity_prediction(p, N, r=np.inf, growth=None):
    """Pure arithmetic on ``(p, N, r)`` and an optional :class:`GrowthReport`."""
    if not r > 1:
        raise InvalidDomain("r > 1 required")
    if not 1 < p <= N:
        raise InvalidDomain("need 1 < p <= N")
    pp = p / (p - 1)
    inv_r = 0.0 if np.isinf(r) else 1.0 / r
    rp = 1.0 if np.isinf(r) else r / (r - 1)
    N0 = p * pp / (1 + inv_r / (p - 1))
    N1 = p * (1 + pp) / (1 + pp * inv_r)
    if not N0 < N1:
        raise AssertionError("threshold ordering N0 < N1 violated")
    sigma = _inv(1 - p * pp / N + inv_r / (p - 1))
    tau = _inv(1 + inv_r / (p - 1) - (pp + 1) / N)
    if N < N0:
        bounded = "bounded"
    elif N == N0:
        bounded = "L^k for every k"
    else:
        bounded = f"v*^(p-1) in L^k for k < {sigma:.6g}"
    if N < N1:
        w1p = "W0^{1,p}"
    elif N == N1:
        w1p = "gradient in L^s for s < p"
    else:
        w1p = f"|grad v*|^(p-1) in L^k for k < {tau:.6g}"
    m = r
    boot = {
        "m_bar": N * p / (N * p - N + p),
        "k_value": (N * m / (N - p * m)) if m < N / p else np.inf,
        "k_gradient": (N * m / (N - m)) if m < N else np.inf,
    }
    Q1, Qs, ps = critical_exponents(p, N)
    case, verdict, gbounded = "none", "no conclusion from growth", False
    if growth is not None and growth.growth_class not in (EXPONENTIAL, FINITE_LAMBDA):
        Q = growth.Q_estimate
        case, verdict = _growth_case(p, N, r, rp, Q, Q1, ps)
        gbounded = bool((Q < Q1 and Q * rp < Q1) or (Q < Qs and (Q + 1) * rp < ps))
    return RegularityPrediction(p, N, r, N0, N1, sigma, tau, boot, bounded, w1p,
                                case, verdict, gbounded, Q1, Qs, ps)


def _growth_case(p, N, r, rp, Q, Q1, ps):
    if p == N:
        return "p=N", "W0^{1,N} and bounded"
    if Q >= p - 1 and Q * rp < Q1:
        return "i", "W0^{1,p} and bounded"
    if Q > p - 1 and Q * rp == Q1:
        return "ii", "W0^{1,p} and in every L^k (given |U|^(p-1) in L^sigma, sigma > N/(N-p))"
    if Q >= p - 1 and (Q + 1) * rp <= ps:
        tail = "bounded" if (Q + 1) * rp < ps else "in every L^k"
        return "iii", f"{tail} provided U is in W0^{{1,p}}"
    if Q < p - 1 and r > N / p:
        return "iv", "W0^{1,p} and bounded"
    if Q < p - 1 and r == N / p:
        return "v", "W0^{1,p} and in every L^k"
    if Q < p - 1 and r < N / p and Q * rp < Q1:
        d = N * r * (p - 1 - Q) / (N - p * r)
        if (Q + 1) * rp < ps:
            return "vi", f"U^k integrable for k < {d:.6g}; W0^{{1,p}}"
        theta = N * r * (p - 1 - Q) / (N - (Q + 1) * r)
        return "vi", f"U^k integrable for k < {d:.6g}; |grad U|^t integrable for t < {theta:.6g}"
    return "none", "no conclusion from growth"


@dataclass
class BranchDiagram:
    """Minimal solutions sampled in ``lambda`` below the extremal bracket.

    ``rows`` holds ``(lambda, sup, seminorm, energy, margin)``; the margin is
    NaN when ``p < 2``.
    """

    lambda_samples: np.ndarray
    sup: np.ndarray
    seminorm: np.ndarray
    energy: np.ndarray
    margin: np.ndarray
    lambda_star: LambdaStarResult
    extremal: RadialSolution

    @property
    def rows(self):
        return np.column_stack([self.lambda_samples, self.sup, self.seminorm,
                                self.energy, self.margin])

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "sup", "seminorm", "energy", "margin"])
            for row in self.rows:
                w.writerow([repr(float(x)) for x in row])


def branch_diagram(problem, samples=16, star=None, **kw):
    """Sample the minimal branch on ``lambda = lo * k / samples``."""
    if star is None:
        star = find_lambda_star(problem, **kw)
    lams = star.lo * np.arange(1, samples + 1) / samples
    sups, semis, ens, margins = [], [], [], []
    last = None
    for lam in lams:
        v = minimal_solution(problem, lam)
        if not getattr(v, "converged", False):
            raise StiffnessFailure(f"minimal solution failed inside the bracket at {lam:g}")
        last = v
        sups.append(v.sup)
        semis.append(norms(v).seminorm)
        ens.append(energy(v, lam, problem))
        margins.append(stability_check(v, lam, problem) if problem.p >= 2 else np.nan)
    return BranchDiagram(lams, np.array(sups), np.array(semis), np.array(ens),
                         np.array(margins), star, last)
