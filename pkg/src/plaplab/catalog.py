"""Closed-form pairs (beta, g) linked by the change of unknown v = Psi(u).

Each entry is written with beta = (p-1) b(u) so that
``(1 + g)^(p-1) = exp(gamma)`` reduces to ``1 + g = exp(int_0^u b)``, which
is independent of ``p`` except through the exponents ``alpha = Q/(p-1)`` of
the power families.  Every entry carries the explicit ``psi`` (u -> v) and
``H`` (v -> u) maps, so it can serve as an oracle for the numerical
transform.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import exp1

from .exceptions import ParamOutOfRange, UnknownExample
from .nonlinearity import BETA, G, Nonlinearity


@dataclass(frozen=True)
class CatalogEntry:
    """Both forms of one nonlinearity plus the explicit maps between them."""

    ident: str
    p: float
    beta: Nonlinearity
    g: Nonlinearity
    psi: Callable
    H: Callable
    L: float
    Lambda: float
    params: Mapping = field(default_factory=dict)
    g_limit: float = np.inf


def _check(cond, msg):
    if not cond:
        raise ParamOutOfRange(msg)


def _entry(ident, p, params, b, db, g, dg, psi, H, L, Lam, g_limit=np.inf):
    pm1 = p - 1.0
    cfg = {"example": ident, **params}

    def beta(u):
        return pm1 * b(u)

    def dbeta(u):
        return pm1 * db(u)

    beta_nl = Nonlinearity(BETA, beta, endpoint=L, dfn=dbeta, kind="catalog",
                           params=cfg, name=f"catalog {ident} (beta)")
    g_nl = Nonlinearity(G, g, endpoint=Lam, dfn=dg, kind="catalog",
                        params=cfg, name=f"catalog {ident} (g)")
    return CatalogEntry(str(ident), p, beta_nl, g_nl, psi, H, L, Lam, dict(params), g_limit)


def _power(p, Q, ident):
    # (1+g)^(p-1) = (1+v)^Q, alpha != 1
    a = Q / (p - 1.0)
    if a < 1:
        L = np.inf
        Lam = np.inf
        b = lambda u: a / (1 + (1 - a) * u)
        db = lambda u: -a * (1 - a) / (1 + (1 - a) * u) ** 2
        psi = lambda t: (1 + (1 - a) * t) ** (1 / (1 - a)) - 1
        H = lambda v: ((1 + v) ** (1 - a) - 1) / (1 - a)
    else:
        L = 1.0 / (a - 1)
        Lam = np.inf
        b = lambda u: a / (1 - (a - 1) * u)
        db = lambda u: a * (a - 1) / (1 - (a - 1) * u) ** 2
        psi = lambda t: (1 - (a - 1) * t) ** (-1 / (a - 1)) - 1
        H = lambda v: (1 - (1 + v) ** (1 - a)) / (a - 1)
    g = lambda v: (1 + v) ** a - 1
    dg = lambda v: a * (1 + v) ** (a - 1)
    return _entry(ident, p, {"Q": Q}, b, db, g, dg, psi, H, L, Lam)


def _ex1(p):
    one = lambda x: np.ones_like(x)
    return _entry(1, p, {}, one, lambda x: np.zeros_like(x),
                  lambda v: v * 1.0, one, np.expm1, np.log1p, np.inf, np.inf)


def _ex2(p, Q=None):
    Q = (p - 1) / 2 if Q is None else Q
    _check(0 < Q < p - 1, "example 2 needs 0 < Q < p-1")
    return _power(p, Q, 2)


def _ex3(p, m=1.0, C=1.0):
    _check(m > 0 and C > 0, "example 3 needs m > 0 and C > 0")
    e = m / (m + 1)

    def w(v):
        return 1 + np.log1p(C * v)

    def g(v):
        return (1 + C * v) * w(v) ** e - 1

    def dg(v):
        return C * (w(v) ** e + e * w(v) ** (e - 1))

    def b(u):
        return C * ((1 + C * u / (m + 1)) ** m + m / (m + 1 + C * u))

    def db(u):
        return C * (C * m / (m + 1) * (1 + C * u / (m + 1)) ** (m - 1)
                    - C * m / (m + 1 + C * u) ** 2)

    def psi(t):
        return np.expm1((1 + C * t / (m + 1)) ** (m + 1) - 1) / C

    def H(v):
        return (m + 1) / C * (w(v) ** (1 / (m + 1)) - 1)

    return _entry(3, p, {"m": m, "C": C}, b, db, g, dg, psi, H, np.inf, np.inf)


def _ex4(p):
    return _entry(
        4, p, {},
        lambda u: np.exp(u) + 1, np.exp,
        lambda v: (1 + v) * (1 + np.log1p(v)) - 1,
        lambda v: 2 + np.log1p(v),
        lambda t: np.expm1(np.expm1(t)),
        lambda v: np.log1p(np.log1p(v)),
        np.inf, np.inf,
    )


def _ex5(p, Q=None):
    Q = 2 * (p - 1) if Q is None else Q
    _check(Q > p - 1, "example 5 needs Q > p-1")
    return _power(p, Q, 5)


def _ex6(p):
    return _entry(
        6, p, {},
        lambda u: 1 / (1 - u), lambda u: 1 / (1 - u) ** 2,
        np.expm1, np.exp,
        lambda t: -np.log1p(-t),
        lambda v: -np.expm1(-v),
        1.0, np.inf,
    )


def _ex7(p, k=1.0):
    _check(k > 0, "example 7 needs k > 0")

    def w(v):
        return 1 + np.log1p(k * v)

    def g(v):
        return (1 + k * v) * w(v) ** ((k + 1) / k) - 1

    def dg(v):
        return k * w(v) ** ((k + 1) / k) + (k + 1) * w(v) ** (1 / k)

    def b(u):
        return k / (1 - u) ** (k + 1) + (k + 1) / (1 - u)

    def db(u):
        return k * (k + 1) / (1 - u) ** (k + 2) + (k + 1) / (1 - u) ** 2

    def psi(t):
        return np.expm1((1 - t) ** (-k) - 1) / k

    def H(v):
        return 1 - w(v) ** (-1 / k)

    return _entry(7, p, {"k": k}, b, db, g, dg, psi, H, 1.0, np.inf)


def _ex8(p):
    def b(u):
        y = -np.log1p(-u)
        return (1 - 1 / (1 + y)) / (1 - u)

    def db(u):
        y = -np.log1p(-u)
        return (1 - 1 / (1 + y) + 1 / (1 + y) ** 2) / (1 - u) ** 2

    def g(v):
        return np.expm1(np.expm1(v) - v)

    def dg(v):
        return np.expm1(v) * np.exp(np.expm1(v) - v)

    return _entry(
        8, p, {}, b, db, g, dg,
        lambda t: np.log1p(-np.log1p(-t)),
        lambda v: -np.expm1(-np.expm1(v)),
        1.0, np.inf,
    )


def _ex9(p, Q=None):
    Q = p - 1 if Q is None else Q
    _check(Q > 0, "example 9 needs Q > 0")
    a = Q / (p - 1)
    return _entry(
        9, p, {"Q": Q},
        lambda u: a / (1 - (a + 1) * u),
        lambda u: a * (a + 1) / (1 - (a + 1) * u) ** 2,
        lambda v: (1 - v) ** (-a) - 1,
        lambda v: a * (1 - v) ** (-a - 1),
        lambda t: 1 - (1 - (a + 1) * t) ** (1 / (a + 1)),
        lambda v: (1 - (1 - v) ** (a + 1)) / (a + 1),
        1 / (a + 1), 1.0,
    )


def _ex10(p):
    return _entry(
        10, p, {},
        lambda u: u / (1 - u * u),
        lambda u: (1 + u * u) / (1 - u * u) ** 2,
        lambda v: 1 / np.cos(v) - 1,
        lambda v: np.sin(v) / np.cos(v) ** 2,
        np.arcsin, np.sin,
        1.0, np.pi / 2,
    )


def _zero(p):
    z = lambda x: np.zeros_like(x, dtype=float)
    ident = lambda x: x * 1.0
    return _entry("zero", p, {}, z, z, z, z, ident, ident, np.inf, np.inf, g_limit=0.0)


def _bounded(p, c=1.0):
    # beta = c e^{-t}: gamma -> c, g -> e^{c/(p-1)} - 1; Psi through E1
    _check(c > 0, "bounded family needs c > 0")
    a = c / (p - 1)

    def b(u):
        return a * np.exp(-u)

    def db(u):
        return -a * np.exp(-u)

    def psi(t):
        t = np.asarray(t, dtype=float)
        x = a * np.exp(-t)
        # E1(x) = -euler_gamma - ln x + x + O(x^2) once x underflows the series
        small = -np.euler_gamma - np.log(a) + t + x
        e1 = np.where(x > 1e-8, exp1(np.maximum(x, 1e-8)), small)
        return np.exp(a) * (e1 - exp1(a))

    def H(v):
        v = np.asarray(v, dtype=float)
        return _bisect_inverse(psi, v, v / np.exp(a), v)

    def g(v):
        return np.exp(a * -np.expm1(-H(v))) - 1

    def dg(v):
        return b(H(v))

    return _entry("bounded", p, {"c": c}, b, db, g, dg, psi, H, np.inf, np.inf,
                  g_limit=np.expm1(a))


def _bisect_inverse(f, y, lo, hi, iters=80):
    # vectorized inverse of an increasing map bracketed by [lo, hi]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = f(mid) < y
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


def _power_family(p, Q=1.0):
    _check(Q > 0, "power family needs Q > 0")
    if abs(Q - (p - 1)) < 1e-14:
        return _ex1(p)
    return _power(p, Q, "power")


_BUILDERS = {
    "1": _ex1, "2": _ex2, "3": _ex3, "4": _ex4, "5": _ex5,
    "6": _ex6, "7": _ex7, "8": _ex8, "9": _ex9, "10": _ex10,
    "zero": _zero, "bounded": _bounded, "power": _power_family,
    "linear": _ex1, "exp": _ex6,
}

EXAMPLE_IDS = tuple(range(1, 11))


def catalog(example_id, p=2.0, **params):
    """Closed-form entry number ``example_id`` (1..10) for the given ``p``.

    Parameters such as ``Q``, ``m``, ``C`` and ``k`` default to the values
    used throughout the test-suite; out-of-range values raise
    :class:`ParamOutOfRange`.
    """
    if isinstance(example_id, bool) or str(example_id) not in {str(i) for i in EXAMPLE_IDS}:
        raise UnknownExample(example_id)
    return lookup(example_id, p, **params)


def lookup(name, p=2.0, **params):
    """Like :func:`catalog` but also accepts the named families
    ``zero``, ``linear``, ``exp``, ``power`` (parameter ``Q``) and
    ``bounded`` (beta = c e^{-t})."""
    if not p > 1:
        raise ParamOutOfRange("p>1 required")
    key = str(name).strip()
    if key.endswith(".0"):
        key = key[:-2]
    try:
        build = _BUILDERS[key]
    except KeyError:
        raise UnknownExample(name) from None
    try:
        return build(float(p), **params)
    except TypeError as exc:
        raise ParamOutOfRange(f"bad parameters for {name}: {exc}") from None


def power_g(Q, p):
    """g with ``(1 + g(v))^(p-1) = (1 + v)^Q``."""
    return lookup("power", p, Q=Q).g
