"""Run configuration: flat sectioned ``key = value`` files.

Example::

    [run]
    subcommand = lambda-star

    [problem]
    p = 2
    N = 2
    lambda = 1
    weight.kind = const
    weight.param = 1
    source.kind = order_zero

    [nonlinearity]
    kind = catalog
    example = exp

    [numerics]
    grid = 4096
"""

import configparser
import re
from dataclasses import dataclass, field

from .exceptions import ConfigError, InvalidDomain
from .nonlinearity import from_config
from .radial import FixedRHS, GradientForm, OrderZero, RadialGrid, RadialProblem, Weight

SUBCOMMANDS = ("transform", "solve", "eigen", "branch", "lambda-star", "sweep", "singular",
               "predict")

PROBLEM_KEYS = {"p", "N", "lambda", "weight.kind", "weight.param", "atom_mass", "source.kind"}
NUMERIC_DEFAULTS = {
    "grid": 4096,
    "eps0": 1e-9,
    "tol": 1e-9,
    "rel_tol": 1e-4,
    "cap": 1e12,
    "max_iter": 100_000,
    "lambda_max": 100.0,
    "bracket_hint": 1.0,
    "a_max": 10.0,
    "count": 64,
    "samples": 16,
    "transform_nodes": 10_000,
    "r": float("inf"),
}
INT_KEYS = {"grid", "max_iter", "count", "samples", "transform_nodes"}
SINGULAR_KEYS = {"m"}
RUN_KEYS = {"subcommand", "out"}
SECTIONS = ("run", "problem", "nonlinearity", "numerics", "singular")
SOURCE_KINDS = ("fixed", "order_zero", "gradient")


@dataclass
class RunConfig:
    """Parsed configuration, with every value kept as text until built."""

    subcommand: str = "solve"
    out: str = "run"
    problem: dict = field(default_factory=dict)
    nonlinearity: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    singular: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, repr=False)

    def echo(self):
        """Plain mapping of the configuration for summaries."""
        return {
            "run": {"subcommand": self.subcommand, "out": self.out},
            "problem": dict(self.problem),
            "nonlinearity": dict(self.nonlinearity),
            "numerics": dict(self.numerics),
            "singular": dict(self.singular),
        }

    def line_of(self, section, key):
        return self.lines.get((section, key))

    def num(self, key):
        """Numerics value with its default, as int or float."""
        raw = self.numerics.get(key, NUMERIC_DEFAULTS[key])
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError("not a number", key=f"numerics.{key}",
                              line=self.line_of("numerics", key)) from None
        return int(val) if key in INT_KEYS else val


def _line_index(text):
    # (section, key) -> line number, for error messages
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section:
            out.setdefault((section, m.group(1).strip()), i)
    return out


def parse_config(text):
    """Parse configuration text into a :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = exc.message.splitlines()[0]
        if isinstance(exc, configparser.ParsingError) and exc.errors:
            line, bad = exc.errors[0]
            msg = f"cannot parse {bad.strip()!r}"
        raise ConfigError(f"cannot parse config: {msg}", line=line) from None
    lines = _line_index(text)
    cfg = RunConfig(lines=lines)
    for sec in parser.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", line=lines.get((sec, None)))
    for sec in SECTIONS:
        if parser.has_section(sec):
            for key, val in parser.items(sec):
                _set(cfg, sec, key, val.strip(), lines.get((sec, key)))
    validate(cfg)
    return cfg


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _set(cfg, sec, key, val, line=None):
    if sec == "run":
        if key not in RUN_KEYS:
            raise ConfigError("unknown key", key=f"run.{key}", line=line)
        setattr(cfg, key, val)
    elif sec == "problem":
        if key not in PROBLEM_KEYS:
            raise ConfigError("unknown key", key=f"problem.{key}", line=line)
        cfg.problem[key] = val
    elif sec == "numerics":
        if key not in NUMERIC_DEFAULTS:
            raise ConfigError("unknown key", key=f"numerics.{key}", line=line)
        cfg.numerics[key] = val
    elif sec == "singular":
        if key not in SINGULAR_KEYS:
            raise ConfigError("unknown key", key=f"singular.{key}", line=line)
        cfg.singular[key] = val
    elif sec == "nonlinearity":
        cfg.nonlinearity[key] = val
    else:
        raise ConfigError(f"unknown section [{sec}]", line=line)


def apply_override(cfg, item):
    """Apply ``section.key=value`` (``key`` may itself contain dots)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not KEY=VALUE")
    lhs, val = item.split("=", 1)
    if "." not in lhs:
        raise ConfigError(f"override key {lhs!r} needs a section prefix", key=lhs)
    sec, key = lhs.strip().split(".", 1)
    if sec not in SECTIONS:
        raise ConfigError(f"unknown section [{sec}]", key=lhs)
    _set(cfg, sec, key, val.strip())
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {cfg.subcommand!r}", key="run.subcommand",
                          line=cfg.line_of("run", "subcommand"))
    for key in cfg.numerics:
        val = cfg.num(key)
        if key == "grid" and val < 64:
            raise ConfigError("grid size must be at least 64", key="numerics.grid",
                              line=cfg.line_of("numerics", key))
        if not val > 0:
            raise ConfigError("must be positive", key=f"numerics.{key}",
                              line=cfg.line_of("numerics", key))
    kind = cfg.problem.get("source.kind")
    if kind is not None and kind not in SOURCE_KINDS:
        raise ConfigError(f"source.kind must be one of {', '.join(SOURCE_KINDS)}",
                          key="problem.source.kind", line=cfg.line_of("problem", "source.kind"))


def _pfloat(cfg, key, default):
    raw = cfg.problem.get(key, default)
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError("not a number", key=f"problem.{key}",
                          line=cfg.line_of("problem", key)) from None


def build_grid(cfg):
    return RadialGrid.geometric(M=cfg.num("grid"), eps0=cfg.num("eps0"))


def build_weight(cfg):
    kind = cfg.problem.get("weight.kind", "const")
    param = cfg.problem.get("weight.param")
    if kind == "const":
        return Weight.const(1.0 if param is None else float(param))
    if kind in ("power", "power_singular"):
        return Weight.power(0.0 if param is None else float(param))
    if kind == "sampled":
        # "r0:f0,r1:f1,..."
        pairs = [tuple(map(float, item.split(":"))) for item in str(param).split(",")]
        r, f = zip(*pairs)
        return Weight.sampled(r, f)
    raise ConfigError(f"unknown weight kind {kind!r}", key="problem.weight.kind",
                      line=cfg.line_of("problem", "weight.kind"))


def build_nonlinearity(cfg, p):
    if not cfg.nonlinearity:
        return None
    return from_config(cfg.nonlinearity, p)


def build_problem(cfg):
    """RadialProblem from the [problem] and [nonlinearity] sections."""
    p = _pfloat(cfg, "p", 2.0)
    N = _pfloat(cfg, "N", 3)
    if not float(N).is_integer():
        raise ConfigError("N must be an integer", key="problem.N", line=cfg.line_of("problem", "N"))
    if not p > 1:
        raise InvalidDomain(f"p>1 required, got p={p}")
    nl = build_nonlinearity(cfg, p)
    kind = cfg.problem.get("source.kind")
    if kind is None:
        kind = "fixed" if nl is None else ("gradient" if nl.is_beta else "order_zero")
    if kind == "fixed":
        source = FixedRHS()
    elif nl is None:
        raise ConfigError(f"source.kind = {kind} needs a [nonlinearity] section",
                          key="problem.source.kind")
    elif kind == "order_zero":
        if nl.is_beta:
            raise ConfigError("order_zero source needs a g-form nonlinearity",
                              key="nonlinearity.form")
        source = OrderZero(nl)
    else:
        if not nl.is_beta:
            raise ConfigError("gradient source needs a beta-form nonlinearity",
                              key="nonlinearity.form")
        source = GradientForm(nl)
    return RadialProblem(p, int(N), lam=_pfloat(cfg, "lambda", 1.0), weight=build_weight(cfg),
                         atom_mass=_pfloat(cfg, "atom_mass", 0.0), source=source,
                         grid=build_grid(cfg))
