"""One-sided scalar nonlinearities: the gradient coefficient beta or the source g."""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .exceptions import DerivativeUnavailable, InvalidDomain

BETA = "beta"
G = "g"


@dataclass(frozen=True)
class Nonlinearity:
    """A function on ``[0, endpoint)`` in beta-form or g-form.

    ``kind`` records provenance (``catalog``, ``sampled``,
    ``piecewise_linear`` or plain ``function``) and ``params`` whatever is
    needed to rebuild it from a config section.
    """

    form: str
    fn: Callable
    endpoint: float = np.inf
    dfn: Optional[Callable] = None
    kind: str = "function"
    params: Mapping = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.form not in (BETA, G):
            raise InvalidDomain(f"form must be 'beta' or 'g', got {self.form!r}")
        if not self.endpoint > 0:
            raise InvalidDomain("endpoint must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self.fn(x)

    def derivative(self, x):
        if self.dfn is None:
            raise DerivativeUnavailable(
                f"{self.name or self.kind} has no derivative reconstruction"
            )
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self.dfn(x)

    @property
    def is_beta(self):
        return self.form == BETA

    def validate(self, upto=None, n=257):
        """Spot-check sign and monotonicity on a sample grid below ``upto``.

        beta must be nonnegative; g must vanish at 0 and be nondecreasing.
        """
        top = self.endpoint if upto is None else min(upto, self.endpoint)
        if not np.isfinite(top):
            top = 1e3
        x = np.linspace(0.0, top, n, endpoint=not np.isfinite(self.endpoint) or top < self.endpoint)
        if top == self.endpoint:
            x = x[:-1]
        y = self(x)
        if np.any(y[np.isfinite(y)] < 0) and self.is_beta:
            raise InvalidDomain("beta takes negative values")
        if not self.is_beta:
            if abs(float(self(0.0))) > 1e-12:
                raise InvalidDomain("g(0) must vanish")
            fin = y[np.isfinite(y)]
            if np.any(np.diff(fin) < -1e-12 * (1 + np.abs(fin[1:]))):
                raise InvalidDomain("g must be nondecreasing")
        return self

    def to_config(self):
        """Flat ``key -> str`` mapping for a config section."""
        out = {"kind": self.kind, "form": self.form, "endpoint": repr(float(self.endpoint))}
        for k, v in self.params.items():
            if isinstance(v, (list, tuple, np.ndarray)):
                out[k] = ",".join(repr(float(x)) for x in v)
            else:
                out[k] = str(v)
        return out


def sampled(form, x, y, endpoint=None, name="sampled"):
    """Monotone C^1 reconstruction (PCHIP) of a sampled table."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidDomain("table abscissae and values must be 1-d of equal length")
    if len(x) < 2 or np.any(np.diff(x) <= 0):
        raise InvalidDomain("table abscissae must be strictly increasing")
    if x[0] != 0.0:
        raise InvalidDomain("table must start at 0")
    endpoint = np.inf if endpoint is None else float(endpoint)
    interp = PchipInterpolator(x, y, extrapolate=True)
    dfn = interp.derivative() if len(x) >= 3 else None
    return Nonlinearity(
        form=form,
        fn=interp,
        dfn=dfn,
        endpoint=endpoint,
        kind="sampled",
        params={"x": x.tolist(), "y": y.tolist()},
        name=name,
    )


def piecewise_linear(breakpoints, slopes, name="piecewise_linear"):
    """g-form nonlinearity with ``g(0) = 0`` and slope ``slopes[i]`` on
    ``[breakpoints[i], breakpoints[i+1]]`` (last slope continues)."""
    b = np.asarray(breakpoints, dtype=float)
    m = np.asarray(slopes, dtype=float)
    if b[0] != 0.0 or np.any(np.diff(b) <= 0) or len(m) != len(b):
        raise InvalidDomain("need increasing breakpoints from 0 and one slope per breakpoint")
    vals = np.concatenate([[0.0], np.cumsum(m[:-1] * np.diff(b))])

    def fn(s):
        i = np.clip(np.searchsorted(b, s, side="right") - 1, 0, len(b) - 1)
        return vals[i] + m[i] * (s - b[i])

    def dfn(s):
        i = np.clip(np.searchsorted(b, s, side="right") - 1, 0, len(b) - 1)
        return m[i]

    return Nonlinearity(
        form=G,
        fn=fn,
        dfn=dfn,
        kind="piecewise_linear",
        params={"breakpoints": b.tolist(), "slopes": m.tolist()},
        name=name,
    )


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def from_config(section, p):
    """Rebuild a nonlinearity from a flat config mapping (see ``to_config``)."""
    from .catalog import lookup

    sec = dict(section)
    kind = sec.pop("kind", "catalog")
    form = sec.pop("form", None)
    endpoint = sec.pop("endpoint", None)
    if kind == "catalog":
        ident = sec.pop("example", None) or sec.pop("name", None)
        if ident is None:
            raise InvalidDomain("catalog nonlinearity needs 'example'")
        params = {k: float(v) for k, v in sec.items()}
        entry = lookup(ident, p, **params)
        return entry.beta if form == BETA else entry.g
    if kind == "sampled":
        nl = sampled(form or G, _floats(sec["x"]), _floats(sec["y"]),
                     endpoint=None if endpoint is None else float(endpoint))
        return nl
    if kind == "piecewise_linear":
        return piecewise_linear(_floats(sec["breakpoints"]), _floats(sec["slopes"]))
    raise InvalidDomain(f"unknown nonlinearity kind {kind!r}")
