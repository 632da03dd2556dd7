"""Scenario files: INI-style sections of ``key = value`` pairs.

Schema (all sections except ``initial`` and ``target`` are optional)::

    [body]         mu
    [initial]      a, e, i, raan, argp, theta
    [target]       a, e, i, raan, argp
    [weights]      p (five comma-separated diagonal entries), q1, q2
                   ("auto" sizes them from the initial state), reset_period
                   ("none" disables resets)
    [constraints]  r_min, e_min, u_max, eps1, eps2
    [saturation]   mode = two_norm | inf_norm | projection_ball | projection_box,
                   bounds (three per-channel limits; default u_max each)
    [governor]     t_hor, update_period, bisection_iters, delta, reject_small
    [integration]  rtol, atol, t_final, log_period

Durations carry a unit suffix, ``_s`` or ``_h`` (``t_final_h = 40``).
Numbers may be arithmetic expressions in ``pi`` such as ``3*pi/2``.
"""

import ast
import configparser
import dataclasses
import math
import operator
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .constraints import ConstraintConfig, instantaneously_feasible
from .controller import (ConvexProjection, InfNormBox, TwoNormBall, Weights,
                         barriers_inactive, sized_weights)
from .errors import ParseError, ValidationError
from .governor import GovernorConfig
from .orbit import BodyParams, OrbitalElements
from .propagation import ClosedLoop

DEFAULT_P_DIAG = (5e-11, 0.01, 0.005, 0.0075, 5e-4)
HOUR = 3600.0

_SCHEMA = {
    "body": {"mu"},
    "initial": {"a", "e", "i", "raan", "argp", "theta"},
    "target": {"a", "e", "i", "raan", "argp"},
    "weights": {"p", "q1", "q2", "reset_period"},
    "constraints": {"r_min", "e_min", "u_max", "eps1", "eps2"},
    "saturation": {"mode", "bounds"},
    "governor": {"t_hor", "update_period", "bisection_iters", "delta", "reject_small"},
    "integration": {"rtol", "atol", "t_final", "log_period"},
}
_DURATIONS = {"reset_period", "t_hor", "update_period", "t_final", "log_period"}
_MODES = ("two_norm", "inf_norm", "projection_ball", "projection_box")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval_node(node.operand))
    raise ValueError("unsupported expression")


def parse_number(text: str) -> float:
    """Evaluate a numeric literal or an arithmetic expression in ``pi``."""
    try:
        value = _eval_node(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """A complete closed-loop experiment. Times are in seconds.

    ``q1``/``q2`` of None mean "size from the initial state". A
    ``reset_period`` of None disables periodic weight resets.
    """

    x0: OrbitalElements
    theta0: float
    x_des: OrbitalElements
    p_diag: tuple = DEFAULT_P_DIAG
    q1: Optional[float] = None
    q2: Optional[float] = None
    reset_period: Optional[float] = 0.1 * HOUR
    constraints: ConstraintConfig = ConstraintConfig()
    saturation: object = None
    governor: Optional[GovernorConfig] = None
    body: BodyParams = BodyParams()
    t_final: float = 40.0 * HOUR
    log_period: float = 60.0
    rtol: float = 1e-9
    atol: float = 1e-9
    name: str = "scenario"

    def __post_init__(self):
        if self.saturation is None:
            object.__setattr__(self, "saturation", TwoNormBall(self.constraints.u_max))
        object.__setattr__(self, "p_diag", tuple(float(p) for p in self.p_diag))
        if len(self.p_diag) != 5 or any(not p > 0.0 for p in self.p_diag):
            raise ValidationError("weights.p", "needs five positive diagonal entries")
        if not math.isfinite(self.theta0):
            raise ValidationError("initial.theta", "must be finite")
        if not instantaneously_feasible(self.x0, self.constraints):
            raise ValidationError("initial", "initial state violates the state constraints")
        if not barriers_inactive(self.x_des, self.constraints) or (
                self.x_des.a * (1.0 - self.x_des.e) == self.constraints.r_min + self.constraints.eps1
                or self.x_des.e == self.constraints.e_min + self.constraints.eps2):
            raise ValidationError("target", "target must clear both margins strictly")
        for name in ("q1", "q2"):
            q = getattr(self, name)
            if q is not None and not (math.isfinite(q) and q >= 0.0):
                raise ValidationError(f"weights.{name}", "must be non-negative")
        if self.reset_period is not None and not self.reset_period > 0.0:
            raise ValidationError("weights.reset_period", "must be positive")
        if not self.t_final > 0.0:
            raise ValidationError("integration.t_final", "must be positive")
        if not self.log_period > 0.0:
            raise ValidationError("integration.log_period", "must be positive")
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ValidationError("integration.rtol", "tolerances must be positive")

    @property
    def P(self) -> np.ndarray:
        return np.diag(self.p_diag)

    def initial_weights(self) -> Weights:
        auto = sized_weights(self.x0, self.x_des, self.constraints, self.P)
        q1 = auto.q1 if self.q1 is None else self.q1
        q2 = auto.q2 if self.q2 is None else self.q2
        return Weights(self.P, q1, q2)

    @property
    def barriers_disabled(self) -> bool:
        return self.q1 == 0.0 and self.q2 == 0.0

    def loop(self) -> ClosedLoop:
        return ClosedLoop(self.constraints, self.saturation, self.body, self.rtol, self.atol)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


# --- file loading ---

def _line_index(text):
    """Map (section, key) to 1-based line numbers for diagnostics."""
    index = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            index[(section, None)] = n
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            index[(section, m.group(1).strip().lower())] = n
    return index


class _Reader:
    def __init__(self, parser, path, lines):
        self.parser = parser
        self.path = path
        self.lines = lines

    def error(self, section, key, message):
        return ParseError(message, self.path, self.lines.get((section, key)), key)

    def has(self, section):
        return self.parser.has_section(section)

    def raw(self, section, key):
        if self.has(section) and self.parser.has_option(section, key):
            return self.parser.get(section, key)
        return None

    def number(self, section, key, default=None, required=False):
        text = self.raw(section, key)
        if text is None:
            if required:
                raise self.error(section, None, f"missing required key '{key}' in [{section}]")
            return default
        try:
            return parse_number(text)
        except ValueError as exc:
            raise self.error(section, key, str(exc)) from None

    def duration(self, section, key, default=None):
        keys = [k for k in (f"{key}_s", f"{key}_h") if self.raw(section, k) is not None]
        if len(keys) > 1:
            raise self.error(section, keys[1], f"'{key}' given in both seconds and hours")
        if not keys:
            return default
        k = keys[0]
        if self.raw(section, k).strip().lower() == "none":
            return None
        value = self.number(section, k)
        return value * HOUR if k.endswith("_h") else value

    def vector(self, section, key, length):
        text = self.raw(section, key)
        if text is None:
            return None
        parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
        if len(parts) != length:
            raise self.error(section, key, f"expected {length} values, got {len(parts)}")
        try:
            return tuple(parse_number(p) for p in parts)
        except ValueError as exc:
            raise self.error(section, key, str(exc)) from None

    def weight(self, section, key):
        text = self.raw(section, key)
        if text is None or text.strip().lower() == "auto":
            return None
        return self.number(section, key)

    def flag(self, section, key, default):
        if self.raw(section, key) is None:
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, "expected a boolean") from None


def _check_keys(reader):
    for section in reader.parser.sections():
        if section not in _SCHEMA:
            raise reader.error(section, None, f"unknown section [{section}]")
        allowed = _SCHEMA[section]
        for key in reader.parser.options(section):
            base = re.sub(r"_(s|h)$", "", key)
            ok = key in allowed and key not in _DURATIONS
            ok = ok or (base in _DURATIONS and base in allowed and key != base)
            if not ok:
                raise reader.error(section, key, f"unknown key '{key}' in [{section}]")


def _build(section, factory, *args, **kwargs):
    """Run a constructor, turning invariant failures into ValidationError."""
    try:
        return factory(*args, **kwargs)
    except ValidationError:
        raise
    except ValueError as exc:
        message = str(exc)
        head = message.split(" ", 1)[0]
        field = f"{section}.{head}" if head in _SCHEMA.get(section, ()) else section
        raise ValidationError(field, message) from None


def _elements(reader, section):
    values = [reader.number(section, k, required=True) for k in ("a", "e", "i", "raan", "argp")]
    return _build(section, OrbitalElements, *values)


def _saturation(reader, cons):
    mode = (reader.raw("saturation", "mode") or "two_norm").strip().lower()
    if mode not in _MODES:
        raise reader.error("saturation", "mode", f"mode must be one of {', '.join(_MODES)}")
    bounds = reader.vector("saturation", "bounds", 3)
    if bounds is not None and mode in ("two_norm", "projection_ball"):
        raise reader.error("saturation", "bounds", f"bounds do not apply to mode {mode}")
    bounds = bounds or (cons.u_max,) * 3
    if mode == "two_norm":
        return TwoNormBall(cons.u_max)
    if mode == "projection_ball":
        return ConvexProjection.ball(cons.u_max)
    if mode == "inf_norm":
        return _build("saturation", InfNormBox, bounds)
    return _build("saturation", ConvexProjection.box, bounds)


def parse_scenario(text: str, path=None, name="scenario") -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path or "<string>"))
    except configparser.ParsingError as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ParseError("malformed line", path, line) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(exc.message.split(":")[-1].strip() if hasattr(exc, "message") else str(exc),
                         path, getattr(exc, "lineno", None)) from None
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from None
    reader = _Reader(parser, path, _line_index(text))
    _check_keys(reader)
    for required in ("initial", "target"):
        if not reader.has(required):
            raise ParseError(f"missing required section [{required}]", path)

    body = _build("body", BodyParams, reader.number("body", "mu", BodyParams().mu))
    defaults = ConstraintConfig()
    cons = _build("constraints", ConstraintConfig, **{
        k: reader.number("constraints", k, getattr(defaults, k))
        for k in ("r_min", "e_min", "u_max", "eps1", "eps2")})

    governor = None
    if reader.has("governor"):
        t_hor = reader.duration("governor", "t_hor")
        if t_hor is None:
            raise reader.error("governor", None, "governor section needs t_hor_s or t_hor_h")
        iters = reader.number("governor", "bisection_iters", 10)
        if iters != int(iters):
            raise reader.error("governor", "bisection_iters", "must be an integer")
        governor = _build("governor", GovernorConfig, t_hor,
                          reader.duration("governor", "update_period", 0.1 * HOUR),
                          int(iters), reader.number("governor", "delta", 1e-6),
                          reader.flag("governor", "reject_small", True))

    return _build(
        "scenario", ScenarioConfig,
        x0=_elements(reader, "initial"),
        theta0=reader.number("initial", "theta", required=True),
        x_des=_elements(reader, "target"),
        p_diag=reader.vector("weights", "p", 5) or DEFAULT_P_DIAG,
        q1=reader.weight("weights", "q1"),
        q2=reader.weight("weights", "q2"),
        reset_period=reader.duration("weights", "reset_period", 0.1 * HOUR),
        constraints=cons,
        saturation=_saturation(reader, cons),
        governor=governor,
        body=body,
        t_final=reader.duration("integration", "t_final", 40.0 * HOUR),
        log_period=reader.duration("integration", "log_period", 60.0),
        rtol=reader.number("integration", "rtol", 1e-9),
        atol=reader.number("integration", "atol", 1e-9),
        name=name,
    )


SCENARIO_DIR = Path(__file__).parent / "scenarios"


def shipped_scenarios():
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.ini"))


def resolve_scenario_path(name_or_path) -> Path:
    """Accept a file path or the bare name of a shipped scenario."""
    path = Path(name_or_path)
    if path.is_file():
        return path
    shipped = SCENARIO_DIR / f"{path.name}.ini"
    if not path.suffix and shipped.is_file():
        return shipped
    raise FileNotFoundError(f"no scenario file or shipped scenario named {str(name_or_path)!r}")


def load_scenario(path) -> ScenarioConfig:
    """Load a scenario file, or a shipped scenario by name (``paper_fig1``)."""
    resolved = resolve_scenario_path(path)
    return parse_scenario(resolved.read_text(), resolved, resolved.stem)
