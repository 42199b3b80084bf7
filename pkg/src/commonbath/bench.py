"""Bench files: a line-oriented netlist for the optical simulator.

One statement per line, a keyword followed by ``key=value`` arguments::

    # comments run to end of line
    PARAM theta1=30 nu=0.93
    SOURCE path=E0 state=Vh
    HWP path=E0 theta=$theta1
    PBS in=E0 transmit=E1 reflect=E0p
    OUTPUT paths=E1,E0p

Angles are degrees, phases radians, visibilities in [0, 1].  ``$name`` refers
to a ``PARAM`` declared on an earlier line and can be overridden at
elaboration time.  Parsing collects every error instead of stopping at the
first; validation checks dataflow (each path produced before it is consumed)
and value ranges.  The full grammar is in ``docs/benchfile.md``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

from . import optics as op
from .errors import BenchFileError

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")
ANGLE_LIMIT = 45.0


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    token: str = ""

    def __str__(self) -> str:
        tail = f" (at {self.token!r})" if self.token else ""
        if self.line <= 0:
            return f"{self.message}{tail}"
        return f"line {self.line}, col {self.col}: {self.message}{tail}"


@dataclass(frozen=True)
class Ref:
    """A ``$name`` parameter reference."""

    name: str


Value = Union[float, str, tuple, Ref]


@dataclass(frozen=True)
class Statement:
    keyword: str
    args: tuple[tuple[str, Value], ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=1, compare=False)

    def get(self, key: str, default=None):
        for k, v in self.args:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class BenchFile:
    statements: tuple[Statement, ...]


# --------------------------------------------------------------------------
# schema

_REQ = object()

# argument kinds: path, paths (1 or 2), pair (exactly 2), list (1+), angle,
# phase, visibility, component, select
SCHEMA: dict[str, tuple[tuple[str, str, object], ...]] = {
    "SOURCE": (("path", "path", _REQ), ("state", "component", "Vh")),
    "HWP": (("path", "path", _REQ), ("theta", "angle", _REQ)),
    "DP": (("path", "path", _REQ), ("theta", "angle", _REQ)),
    "PBS": (("in", "paths", _REQ), ("transmit", "path", _REQ), ("reflect", "path", _REQ)),
    "BS": (("in", "paths", _REQ), ("out", "pair", _REQ)),
    "MIRROR": (("path", "path", _REQ),),
    "PHASE": (("path", "path", _REQ), ("phi", "phase", _REQ)),
    "SWP": (("path", "path", _REQ),),
    "BLOCK": (("path", "path", _REQ), ("select", "select", "all")),
    "MZIM": (("in", "path", _REQ), ("even", "path", _REQ), ("odd", "path", _REQ), ("nu", "visibility", 1.0)),
    "DMZIM": (("in", "pair", _REQ), ("even", "pair", _REQ), ("odd", "pair", _REQ), ("nu", "visibility", 1.0)),
    "CNOT": (("path", "path", _REQ), ("phi", "phase", 0.0)),
    "OUTPUT": (("paths", "list", _REQ),),
}
KEYWORDS = ("PARAM",) + tuple(SCHEMA)
NUMERIC = ("angle", "phase", "visibility")
SELECTS = ("all", "H", "V", "h", "v") + op.COMPONENTS


def _parse_value(kind: str, text: str) -> tuple[Optional[Value], str]:
    """Return (value, "") or (None, reason)."""
    if kind in NUMERIC:
        if text.startswith("$"):
            if IDENT.match(text[1:]):
                return Ref(text[1:]), ""
            return None, "bad parameter reference"
        if NUMBER.match(text):
            return float(text), ""
        return None, f"expected a number for {kind}"
    if kind == "path":
        return (text, "") if IDENT.match(text) else (None, "expected a path label")
    if kind in ("paths", "pair", "list"):
        parts = text.split(",")
        if not all(IDENT.match(p) for p in parts):
            return None, "expected comma-separated path labels"
        if kind == "paths" and len(parts) > 2:
            return None, "at most two input paths"
        if kind == "pair" and len(parts) != 2:
            return None, "expected exactly two paths"
        return tuple(parts), ""
    if kind == "component":
        return (text, "") if text in op.COMPONENTS else (None, "expected one of Hh, Hv, Vh, Vv")
    if kind == "select":
        return (text, "") if text in SELECTS else (None, "expected all, H, V, h, v or a component")
    raise AssertionError(kind)


def _parse_line(lineno: int, raw: str, errors: list) -> Optional[Statement]:
    body = raw.split("#", 1)[0]
    tokens = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", body)]
    if not tokens:
        return None
    kcol, keyword = tokens[0]
    if keyword not in KEYWORDS:
        errors.append(Diagnostic(lineno, kcol, "unknown keyword", keyword))
        return None
    n_before = len(errors)
    schema = {} if keyword == "PARAM" else {name: (kind, default) for name, kind, default in SCHEMA[keyword]}
    args: dict[str, Value] = {}
    seen: set[str] = set()
    for col, tok in tokens[1:]:
        key, eq, text = tok.partition("=")
        if not eq or not IDENT.match(key) or not text:
            errors.append(Diagnostic(lineno, col, "expected key=value", tok))
            continue
        if key in seen:
            errors.append(Diagnostic(lineno, col, f"repeated argument {key!r}", tok))
            continue
        seen.add(key)
        if keyword == "PARAM":
            if not NUMBER.match(text):
                errors.append(Diagnostic(lineno, col + len(key) + 1, "parameter default must be a number", text))
                continue
            args[key] = float(text)
            continue
        if key not in schema:
            errors.append(Diagnostic(lineno, col, f"unknown argument for {keyword}", tok))
            continue
        value, why = _parse_value(schema[key][0], text)
        if value is None:
            errors.append(Diagnostic(lineno, col + len(key) + 1, why, text))
            continue
        args[key] = value
    if keyword == "PARAM" and not args and len(errors) == n_before:
        errors.append(Diagnostic(lineno, kcol, "PARAM needs at least one name=value", keyword))
    for name, (kind, default) in schema.items():
        if name not in args:
            if default is _REQ and name not in seen:
                errors.append(Diagnostic(lineno, kcol, f"{keyword} is missing argument {name!r}", keyword))
            elif default is not _REQ:
                args[name] = default
    if len(errors) != n_before:
        return None
    if keyword != "PARAM":
        args = {name: args[name] for name in schema}  # canonical order
    return Statement(keyword, tuple(args.items()), lineno, kcol)


def parse_bench(text: str) -> tuple[BenchFile, list[Diagnostic]]:
    """Parse every line; bad lines are dropped and reported, never raised."""
    errors: list[Diagnostic] = []
    statements = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        st = _parse_line(lineno, raw, errors)
        if st is not None:
            statements.append(st)
    return BenchFile(tuple(statements)), errors


def _format_value(v: Value) -> str:
    if isinstance(v, Ref):
        return "$" + v.name
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(v)
    return str(v)


def format_bench(bench: BenchFile) -> str:
    """Canonical text of ``bench``; parsing it gives back the same statements."""
    lines = []
    for st in bench.statements:
        parts = [st.keyword] + [f"{k}={_format_value(v)}" for k, v in st.args]
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class CircuitSpec:
    """A validated bench: element statements plus source, outputs and parameter defaults."""

    statements: tuple[Statement, ...]
    source_path: str
    source_component: str
    outputs: tuple[str, ...]
    params: tuple[tuple[str, float], ...]

    @property
    def defaults(self) -> dict[str, float]:
        return dict(self.params)


def io_paths(st: Statement) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(consumed, produced) paths of an element statement."""
    kw = st.keyword
    if kw in ("HWP", "DP", "MIRROR", "PHASE", "SWP", "BLOCK", "CNOT"):
        p = st.get("path")
        return (p,), (p,)
    if kw == "PBS":
        return st.get("in"), (st.get("transmit"), st.get("reflect"))
    if kw == "BS":
        return st.get("in"), st.get("out")
    if kw == "MZIM":
        return (st.get("in"),), (st.get("even"), st.get("odd"))
    if kw == "DMZIM":
        return st.get("in"), st.get("even") + st.get("odd")
    raise AssertionError(kw)


def _range_problem(kind: str, x: float) -> str:
    if not math.isfinite(x):
        return f"{kind} must be finite"
    if kind == "angle" and abs(x) > ANGLE_LIMIT:
        return f"angle {x:g} outside [-45, 45] degrees"
    if kind == "visibility" and not 0.0 <= x <= 1.0:
        return f"visibility {x:g} outside [0, 1]"
    return ""


def _kind(keyword: str, key: str) -> str:
    for name, kind, _ in SCHEMA[keyword]:
        if name == key:
            return kind
    raise KeyError(key)


def _check_ranges(st: Statement, values: Mapping[str, float], errors: list) -> None:
    for key, v in st.args:
        kind = _kind(st.keyword, key)
        if kind not in NUMERIC:
            continue
        x = values[v.name] if isinstance(v, Ref) else v
        why = _range_problem(kind, x)
        if why:
            errors.append(Diagnostic(st.line, st.col, f"{st.keyword} {key}: {why}", _format_value(v)))


def validate(bench: BenchFile) -> tuple[Optional[CircuitSpec], list[Diagnostic]]:
    """Check dataflow, ranges and declarations; returns (spec, []) or (None, errors)."""
    errors: list[Diagnostic] = []
    params: dict[str, float] = {}
    live: set[str] = set()
    source: Optional[Statement] = None
    output: Optional[Statement] = None
    elements = []
    for st in bench.statements:
        kw = st.keyword
        if kw == "PARAM":
            for name, value in st.args:
                if name in params:
                    errors.append(Diagnostic(st.line, st.col, f"parameter {name!r} declared twice", name))
                params[name] = value
            continue
        refs_ok = True
        for key, v in st.args:
            if isinstance(v, Ref) and v.name not in params:
                errors.append(Diagnostic(st.line, st.col, f"undeclared parameter {v.name!r}", "$" + v.name))
                refs_ok = False
        if kw == "SOURCE":
            if source is not None:
                errors.append(Diagnostic(st.line, st.col, "more than one SOURCE", kw))
                continue
            source = st
            live.add(st.get("path"))
            continue
        if kw == "OUTPUT":
            if output is not None:
                errors.append(Diagnostic(st.line, st.col, "more than one OUTPUT", kw))
                continue
            output = st
            paths = st.get("paths")
            seen = set()
            for p in paths:
                if p in seen:
                    errors.append(Diagnostic(st.line, st.col, f"duplicate output {p!r}", p))
                seen.add(p)
            continue
        if refs_ok:
            _check_ranges(st, params, errors)
        consumed, produced = io_paths(st)
        if len(set(consumed)) != len(consumed):
            errors.append(Diagnostic(st.line, st.col, "repeated input path", ",".join(consumed)))
        if len(set(produced)) != len(produced):
            errors.append(Diagnostic(st.line, st.col, "repeated output path", ",".join(produced)))
        for p in consumed:
            if p not in live:
                errors.append(Diagnostic(st.line, st.col, f"dangling path {p!r}: not produced earlier", p))
        for p in produced:
            if p in live and p not in consumed:
                errors.append(Diagnostic(st.line, st.col, f"path {p!r} collides with a live path", p))
        live.difference_update(consumed)
        live.update(produced)
        elements.append(st)
    if source is None:
        errors.append(Diagnostic(1, 1, "no SOURCE statement"))
    if output is None:
        errors.append(Diagnostic(1, 1, "no OUTPUT statement"))
    else:
        for p in output.get("paths"):
            if p not in live:
                errors.append(Diagnostic(output.line, output.col, f"output {p!r} is not a live path at end of file", p))
    if errors:
        return None, errors
    spec = CircuitSpec(
        statements=tuple(elements),
        source_path=source.get("path"),
        source_component=source.get("state"),
        outputs=tuple(output.get("paths")),
        params=tuple(params.items()),
    )
    return spec, []


# --------------------------------------------------------------------------
# elaboration


def to_element(st: Statement, values: Optional[Mapping[str, float]] = None) -> op.OpticalElement:
    """The optics-sim element for one statement, with ``$refs`` resolved from ``values``."""
    values = values or {}

    def g(key):
        v = st.get(key)
        return float(values[v.name]) if isinstance(v, Ref) else v

    kw = st.keyword
    if kw == "HWP":
        return op.HalfWavePlate(g("path"), g("theta"))
    if kw == "DP":
        return op.DovePrism(g("path"), g("theta"))
    if kw == "PBS":
        return op.PolarizingBeamSplitter(g("in"), g("transmit"), g("reflect"))
    if kw == "BS":
        return op.BeamSplitter(g("in"), g("out"))
    if kw == "MIRROR":
        return op.Mirror(g("path"))
    if kw == "PHASE":
        return op.PhaseShifter(g("path"), g("phi"))
    if kw == "SWP":
        return op.SWavePlate(g("path"))
    if kw == "BLOCK":
        return op.Blocker(g("path"), g("select"))
    if kw == "MZIM":
        return op.ParitySorter(g("in"), g("even"), g("odd"), g("nu"))
    if kw == "DMZIM":
        return op.DoubleParitySorter(g("in"), g("even"), g("odd"), g("nu"))
    if kw == "CNOT":
        return op.CnotGate(g("path"), g("phi"))
    raise ValueError(f"{kw} is not an optical element")


def resolve_params(spec: CircuitSpec, overrides: Optional[Mapping[str, float]] = None) -> dict[str, float]:
    values = spec.defaults
    errors = []
    for name, value in (overrides or {}).items():
        if name not in values:
            errors.append(Diagnostic(0, 0, f"override of undeclared parameter {name!r}", name))
        else:
            values[name] = float(value)
    if errors:
        raise BenchFileError(errors)
    return values


def elaborate(spec: CircuitSpec, overrides: Optional[Mapping[str, float]] = None) -> list[op.OpticalElement]:
    """Element list with parameters bound; overrides are range-checked like literals."""
    values = resolve_params(spec, overrides)
    errors: list[Diagnostic] = []
    for st in spec.statements:
        _check_ranges(st, values, errors)
    if errors:
        raise BenchFileError(errors)
    return [to_element(st, values) for st in spec.statements]


def initial_state(spec: CircuitSpec) -> op.BeamState:
    return op.BeamState.single(spec.source_path, spec.source_component)


def run_spec(spec: CircuitSpec, overrides: Optional[Mapping[str, float]] = None) -> op.BeamState:
    return op.run_elements(initial_state(spec), elaborate(spec, overrides))


def elaborate_and_run(spec: CircuitSpec, overrides: Optional[Mapping[str, float]] = None) -> dict[str, float]:
    """Intensity at each declared output, in declaration order."""
    state = run_spec(spec, overrides)
    return {port: state.intensity(port) for port in spec.outputs}


# --------------------------------------------------------------------------
# loading


def packaged_benches() -> list[str]:
    root = resources.files(__package__) / "benches"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".bench"))


def read_bench_text(name_or_path: Union[str, Path]) -> str:
    """Text of a bench file given a filesystem path or a packaged name like ``fig1.bench``."""
    p = Path(name_or_path)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    name = p.name if p.name.endswith(".bench") else p.name + ".bench"
    res = resources.files(__package__) / "benches" / name
    if str(p) in (p.name, p.stem) and res.is_file():
        return res.read_text(encoding="utf-8")
    raise FileNotFoundError(f"no bench file {str(name_or_path)!r}")


def compile_bench(text: str) -> CircuitSpec:
    """Parse and validate, raising BenchFileError with every diagnostic."""
    bench, errors = parse_bench(text)
    if errors:
        raise BenchFileError(errors)
    spec, errors = validate(bench)
    if errors:
        raise BenchFileError(errors)
    return spec


def load_bench(name_or_path: Union[str, Path]) -> CircuitSpec:
    return compile_bench(read_bench_text(name_or_path))
