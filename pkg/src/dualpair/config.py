"""Configuration documents: schema, loading, serialization and the built-in corpus.

A config is a JSON object with the top-level keys ``version``, ``parameters``,
``charts``, ``bivectors``, ``maps``, ``diagram`` and ``plan`` (plus optional
``name`` and ``description``).  Loading parses every expression and runs every
structural validation before returning, so a returned :class:`Config` is
ready to run.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from . import expr as ex
from .diagnostics import DiagnosticsError, DualPairDiagram, Leg, SampleGrid
from .funcspace import BasisSpec, FuncSpaceError
from .manifold import (BivectorField, ChartManifold, Coordinate, ManifoldError, ScalarField,
                       SmoothMap, validate_bivector)

__all__ = [
    "SCHEMA_VERSION", "CONFIG_SCHEMA", "CHECK_ORDER", "ConfigError", "AnalysisPlan", "Config",
    "load_config", "to_document", "resolve_hamiltonian", "dumps_config", "corpus_list",
    "corpus_get", "corpus_document",
]

SCHEMA_VERSION = 1
CHECK_ORDER = ("dimension", "rank_scan", "pushforward", "poisson_maps", "lw_scan", "howe",
               "leaf", "flow_probe")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# --------------------------------------------------------------------------
# Schema

_NAME = {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"}
_EXPR = {"type": "string", "minLength": 1}
_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_GRID = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "points_per_axis": {"oneOf": [
            {"type": "integer", "minimum": 1},
            {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}]},
        "include": {"type": "array", "items": _POINT},
        "points": {"type": "array", "items": _POINT, "minItems": 1},
        "window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "seed": {"type": "integer", "minimum": 0},
        "jitter": {"type": "number", "minimum": 0},
    },
}

_BASIS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_frequency": {"type": "integer", "minimum": 0},
        "max_degree": {"type": "integer", "minimum": 0},
        "total_degree": {"type": ["integer", "null"], "minimum": 0},
        "per_coordinate": {"type": "object", "additionalProperties": {"type": "integer",
                                                                        "minimum": 0}},
    },
}


def _check_schema(props: dict, required=()) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props,
            "required": list(required)}


_CHECKS = {
    "dimension": _check_schema({}),
    "rank_scan": _check_schema({"grid": _GRID}),
    "pushforward": _check_schema({
        "grid": _GRID,
        "fiber_samples": {"type": "integer", "minimum": 2, "maximum": 64},
        "targets": {"type": "integer", "minimum": 1, "maximum": 256},
        "legs": {"type": "array", "items": {"enum": ["left", "right"]}, "uniqueItems": True},
    }),
    "poisson_maps": _check_schema({"grid": _GRID}),
    "lw_scan": _check_schema({"grid": _GRID}),
    "howe": _check_schema({"space": _BASIS, "left_target": _BASIS, "right_target": _BASIS},
                          required=("space", "left_target", "right_target")),
    "leaf": _check_schema({"grid": _GRID}),
    "flow_probe": _check_schema({
        "hamiltonian": _EXPR,
        "start": _POINT,
        "T": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "fiber_coords": {"type": "array", "items": _NAME, "minItems": 1, "uniqueItems": True},
        "resolution": {"type": "integer", "minimum": 1, "maximum": 200},
        "min_covered": {"type": "number", "minimum": 0, "maximum": 1},
    }, required=("hamiltonian", "start", "T", "dt", "fiber_coords")),
}

_LEG = _check_schema({
    "map": _NAME,
    "bivector": {"oneOf": [_NAME, {"type": "null"}]},
    "fibers_connected": {"enum": ["yes", "no", "unknown"]},
}, required=("map",))

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "charts", "bivectors", "maps", "diagram", "plan"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "parameters": {"type": "array", "items": _check_schema(
            {"name": _NAME, "value": _EXPR}, required=("name", "value"))},
        "charts": {"type": "object", "minProperties": 1, "additionalProperties": _check_schema({
            "coordinates": {"type": "array", "minItems": 1, "items": _check_schema({
                "name": _NAME,
                "periodic": {"type": "boolean"},
                "bounds": {"type": "array", "items": {"type": "number"},
                           "minItems": 2, "maxItems": 2},
            }, required=("name",))},
        }, required=("coordinates",))},
        "bivectors": {"type": "object", "additionalProperties": {
            "type": "object", "additionalProperties": False, "required": ["chart"],
            "properties": {
                "chart": _NAME,
                "entries": {"type": "array", "items": {"type": "array", "items": _EXPR}},
                "zero": {"const": True},
            },
            "oneOf": [{"required": ["entries"]}, {"required": ["zero"]}],
        }},
        "maps": {"type": "object", "additionalProperties": _check_schema({
            "source": _NAME,
            "target": _NAME,
            "components": {"type": "array", "items": _EXPR, "minItems": 1},
        }, required=("source", "target", "components"))},
        "diagram": _check_schema({"total": _NAME, "left": _LEG, "right": _LEG},
                                 required=("total", "left", "right")),
        "plan": _check_schema({
            "grid": _GRID,
            "checks": _check_schema(_CHECKS),
        }, required=("checks",)),
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(CONFIG_SCHEMA)


def _format_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


# --------------------------------------------------------------------------
# Object graph

_GRID_DEFAULTS = {"points_per_axis": 7, "include": [], "window": [-1.0, 1.0], "seed": 0,
                  "jitter": 0.0, "points": None}
_CHECK_DEFAULTS = {
    "pushforward": {"fiber_samples": 4, "targets": 8, "legs": []},
    "flow_probe": {"resolution": 10, "min_covered": 0.99},
}


@dataclass(frozen=True)
class AnalysisPlan:
    """Enabled checks with their normalized parameters, plus the default grid."""

    grid: SampleGrid
    checks: Mapping[str, Mapping[str, Any]]

    def enabled(self) -> list[str]:
        return [c for c in CHECK_ORDER if c in self.checks]

    def grid_for(self, check: str) -> SampleGrid:
        g = self.checks.get(check, {}).get("grid")
        return g if g is not None else self.grid

    def basis_spec(self, key: str) -> BasisSpec:
        return self.checks["howe"][key]


@dataclass(frozen=True)
class Config:
    name: str
    description: str
    parameters: tuple[tuple[str, str], ...]  # (name, expression text), in evaluation order
    values: Mapping[str, float]
    charts: Mapping[str, ChartManifold]
    bivectors: Mapping[str, BivectorField]
    maps: Mapping[str, SmoothMap]
    diagram: DualPairDiagram
    refs: Mapping[str, Any]  # names used by the diagram
    plan: AnalysisPlan


def _grid_from(doc: Mapping | None, chart: ChartManifold, path: str) -> SampleGrid | None:
    if doc is None:
        return None
    g = {**_GRID_DEFAULTS, **doc}
    counts = g["points_per_axis"]
    if isinstance(counts, list):
        if len(counts) != chart.dim:
            raise ConfigError(f"{path}.points_per_axis",
                              f"{len(counts)} counts for a {chart.dim}-dimensional chart")
        counts = tuple(counts)
    lo, hi = g["window"]
    if not lo < hi:
        raise ConfigError(f"{path}.window", "empty window")
    for key in ("include", "points"):
        for i, p in enumerate(g[key] or []):
            if len(p) != chart.dim:
                raise ConfigError(f"{path}.{key}[{i}]",
                                  f"point has {len(p)} coordinates, chart has {chart.dim}")
            if not chart.contains(p):
                raise ConfigError(f"{path}.{key}[{i}]", f"point outside chart {chart.name!r}")
    grid = SampleGrid(
        points_per_axis=counts,
        include=tuple(tuple(float(v) for v in p) for p in g["include"]),
        window=(float(lo), float(hi)),
        seed=int(g["seed"]),
        jitter=float(g["jitter"]),
        points=None if g["points"] is None else tuple(tuple(float(v) for v in p)
                                                      for p in g["points"]),
    )
    try:
        grid.sample(chart)
    except DiagnosticsError as exc:
        raise ConfigError(path, str(exc)) from None
    return grid


def _basis_from(doc: Mapping, chart: ChartManifold, path: str) -> BasisSpec:
    try:
        spec = BasisSpec(max_frequency=doc.get("max_frequency", 0),
                         max_degree=doc.get("max_degree", 0),
                         total_degree=doc.get("total_degree"),
                         per_coordinate=doc.get("per_coordinate", {}))
        spec.limits(chart)
    except FuncSpaceError as exc:
        raise ConfigError(path, str(exc)) from None
    return spec


def _parse(text: str, values: Mapping[str, float], path: str) -> ex.Expr:
    try:
        return ex.parse(text, values)
    except ex.ParseError as exc:
        raise ConfigError(path, f"cannot parse {text!r}: {exc}") from None


def _lookup(table: Mapping, name: str, kind: str, path: str):
    if name not in table:
        raise ConfigError(path, f"unknown {kind} {name!r} (defined: {sorted(table)})")
    return table[name]


def _build(doc: Mapping) -> Config:
    # parameters: evaluated once, in order, each may use the earlier ones
    values: dict[str, float] = {}
    params = []
    for i, p in enumerate(doc.get("parameters", [])):
        path = f"parameters[{i}]"
        name, text = p["name"], p["value"]
        if name in values:
            raise ConfigError(f"{path}.name", f"duplicate parameter {name!r}")
        if name == "pi" or name in ex.FUNCTIONS:
            raise ConfigError(f"{path}.name", f"reserved name {name!r}")
        e = _parse(text, values, f"{path}.value")
        try:
            v = ex.evaluate(e, values)
        except ex.EvalError as exc:
            raise ConfigError(f"{path}.value", str(exc)) from None
        if not math.isfinite(v):
            raise ConfigError(f"{path}.value", f"non-finite value {v!r}")
        values[name] = v
        params.append((name, text))

    charts = {}
    for cname, c in doc["charts"].items():
        coords = []
        for i, cd in enumerate(c["coordinates"]):
            path = f"charts.{cname}.coordinates[{i}]"
            if cd["name"] in values:
                raise ConfigError(f"{path}.name", f"coordinate {cd['name']!r} shadows a parameter")
            bounds = cd.get("bounds")
            try:
                coords.append(Coordinate(cd["name"], bool(cd.get("periodic", False)),
                                         None if bounds is None else (float(bounds[0]),
                                                                      float(bounds[1]))))
            except ManifoldError as exc:
                raise ConfigError(path, str(exc)) from None
        try:
            charts[cname] = ChartManifold(cname, tuple(coords))
        except ManifoldError as exc:
            raise ConfigError(f"charts.{cname}", str(exc)) from None

    bivectors = {}
    for bname, b in doc["bivectors"].items():
        path = f"bivectors.{bname}"
        chart = _lookup(charts, b["chart"], "chart", f"{path}.chart")
        if b.get("zero"):
            bivectors[bname] = BivectorField.zero(chart, bname)
            continue
        rows = b["entries"]
        if len(rows) != chart.dim or any(len(r) != chart.dim for r in rows):
            raise ConfigError(f"{path}.entries", f"must be a {chart.dim}x{chart.dim} matrix")
        entries = tuple(tuple(_parse(t, values, f"{path}.entries[{i}][{j}]")
                              for j, t in enumerate(r)) for i, r in enumerate(rows))
        try:
            bivectors[bname] = BivectorField(chart, entries, values, bname)
        except ManifoldError as exc:
            raise ConfigError(f"{path}.entries", str(exc)) from None

    maps = {}
    for mname, m in doc["maps"].items():
        path = f"maps.{mname}"
        src = _lookup(charts, m["source"], "chart", f"{path}.source")
        tgt = _lookup(charts, m["target"], "chart", f"{path}.target")
        if len(m["components"]) != tgt.dim:
            raise ConfigError(f"{path}.components", f"{len(m['components'])} components for "
                                                    f"{tgt.dim}-dimensional target {tgt.name!r}")
        comps = tuple(_parse(t, values, f"{path}.components[{i}]")
                      for i, t in enumerate(m["components"]))
        try:
            maps[mname] = SmoothMap(src, tgt, comps, values, mname)
        except ManifoldError as exc:
            raise ConfigError(f"{path}.components", str(exc)) from None

    d = doc["diagram"]
    total = _lookup(bivectors, d["total"], "bivector", "diagram.total")
    if total.is_constant:
        point = [0.0] * total.chart.dim
        for i, c in enumerate(total.chart.coordinates):
            if c.bounds is not None:
                point[i] = 0.5 * (c.bounds[0] + c.bounds[1])
        if not validate_bivector(total, [point]).nondegenerate:
            raise ConfigError("diagram.total", f"bivector {total.name!r} is degenerate")
    legs, refs = {}, {"total": d["total"]}
    for side in ("left", "right"):
        ld, path = d[side], f"diagram.{side}"
        pi = _lookup(maps, ld["map"], "map", f"{path}.map")
        bname = ld.get("bivector")
        bv = None if bname is None else _lookup(bivectors, bname, "bivector", f"{path}.bivector")
        try:
            legs[side] = Leg(pi, bv, ld.get("fibers_connected", "unknown"))
        except DiagnosticsError as exc:
            raise ConfigError(path, str(exc)) from None
        refs[side] = {"map": ld["map"], "bivector": bname,
                      "fibers_connected": legs[side].fibers_connected}
    try:
        diagram = DualPairDiagram(total, legs["left"], legs["right"])
    except DiagnosticsError as exc:
        raise ConfigError("diagram", str(exc)) from None

    plan = _build_plan(doc["plan"], diagram, values)
    return Config(doc.get("name", ""), doc.get("description", ""), tuple(params), values,
                  charts, bivectors, maps, diagram, refs, plan)


def _build_plan(doc: Mapping, diagram: DualPairDiagram, values: Mapping[str, float]) -> AnalysisPlan:
    M = diagram.total
    grid = _grid_from(doc.get("grid", {}), M, "plan.grid")
    checks: dict[str, dict] = {}
    for name in CHECK_ORDER:
        if name not in doc["checks"]:
            continue
        raw = doc["checks"][name]
        path = f"plan.checks.{name}"
        p = {**_CHECK_DEFAULTS.get(name, {}), **raw}
        if "grid" in _CHECKS[name]["properties"]:
            p["grid"] = _grid_from(raw.get("grid"), M, f"{path}.grid")
        if name == "howe":
            p["space"] = _basis_from(raw["space"], M, f"{path}.space")
            p["left_target"] = _basis_from(raw["left_target"], diagram.left.map.target,
                                           f"{path}.left_target")
            p["right_target"] = _basis_from(raw["right_target"], diagram.right.map.target,
                                            f"{path}.right_target")
        elif name == "pushforward":
            p["legs"] = sorted(p["legs"])
        elif name == "flow_probe":
            if not p["T"] >= p["dt"]:
                raise ConfigError(f"{path}.T", "duration must be at least one step")
            if len(p["start"]) != M.dim or not M.contains(p["start"]):
                raise ConfigError(f"{path}.start", f"not a point of chart {M.name!r}")
            for i, c in enumerate(p["fiber_coords"]):
                if c not in M.names:
                    raise ConfigError(f"{path}.fiber_coords[{i}]", f"unknown coordinate {c!r}")
                if not M.coordinates[M.index(c)].periodic:
                    raise ConfigError(f"{path}.fiber_coords[{i}]",
                                      f"coordinate {c!r} is not periodic")
            p["start"] = [float(v) for v in p["start"]]
            p["T"], p["dt"] = float(p["T"]), float(p["dt"])
            p["min_covered"] = float(p["min_covered"])
            _resolve_hamiltonian(p["hamiltonian"], diagram, values, f"{path}.hamiltonian")
        checks[name] = p
    if "leaf" in checks and diagram.left.bivector is None and "left" not in _filled_legs(
            diagram, checks):
        raise ConfigError("plan.checks.leaf", "left target bivector is neither given nor "
                                              "filled by pushforward")
    return AnalysisPlan(grid, checks)


def _filled_legs(diagram: DualPairDiagram, checks: Mapping) -> list[str]:
    legs = {s for s in ("left", "right") if getattr(diagram, s).bivector is None}
    legs |= set(checks.get("pushforward", {}).get("legs", []))
    return sorted(legs)


def _resolve_hamiltonian(text: str, diagram: DualPairDiagram, values, path: str):
    """A one-component map name (left/right leg) or an expression on the total chart."""
    for leg in (diagram.left, diagram.right):
        if leg.map.name == text:
            if leg.map.target.dim != 1:
                raise ConfigError(path, f"map {text!r} is not scalar")
            return leg.map.component_field(0)
    try:
        return ScalarField(diagram.total, _parse(text, values, path), values)
    except ManifoldError as exc:
        raise ConfigError(path, str(exc)) from None


def resolve_hamiltonian(config: Config, text: str):
    """Hamiltonian from a map name (any scalar map on the total chart) or an expression."""
    m = config.maps.get(text)
    if m is not None:
        if m.source != config.diagram.total or m.target.dim != 1:
            raise ConfigError("hamiltonian", f"map {text!r} is not a scalar function on the "
                                             f"total space")
        return m.component_field(0)
    return _resolve_hamiltonian(text, config.diagram, config.values, "hamiltonian")


# --------------------------------------------------------------------------
# Entry points

def load_config(source: str | Path | Mapping) -> Config:
    """Load and fully validate a config from a path, JSON text or a parsed dict."""
    if isinstance(source, Mapping):
        doc = source
    else:
        text = None
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip()
                                        .startswith("{")):
            path = Path(source)
            if not path.is_file():
                raise ConfigError("", f"config file {str(path)!r} not found")
            text = path.read_text(encoding="utf-8")
        else:
            text = source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                                  f"{exc.msg}") from None
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (len(e.absolute_path),
                                                                list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(_format_path(err.absolute_path) or "(root)",
                          f"schema violation: {err.message}")
    return _build(doc)


def _grid_doc(g: SampleGrid | None):
    if g is None:
        return None
    counts = g.points_per_axis
    out = {"points_per_axis": list(counts) if isinstance(counts, tuple) else counts,
           "include": [list(p) for p in g.include], "window": list(g.window),
           "seed": g.seed, "jitter": g.jitter}
    if g.points is not None:
        out["points"] = [list(p) for p in g.points]
    return out


def _basis_doc(s: BasisSpec) -> dict:
    return {"max_frequency": s.max_frequency, "max_degree": s.max_degree,
            "total_degree": s.total_degree, "per_coordinate": dict(s.per_coordinate)}


def to_document(config: Config) -> dict:
    """Rebuild a config document from the object graph (inverse of :func:`load_config`)."""
    doc: dict = {"version": SCHEMA_VERSION}
    if config.name:
        doc["name"] = config.name
    if config.description:
        doc["description"] = config.description
    doc["parameters"] = [{"name": n, "value": t} for n, t in config.parameters]
    doc["charts"] = {
        name: {"coordinates": [
            {"name": c.name, "periodic": c.periodic,
             **({"bounds": list(c.bounds)} if c.bounds is not None else {})}
            for c in chart.coordinates]}
        for name, chart in config.charts.items()}
    bivs = {}
    for name, b in config.bivectors.items():
        if all(isinstance(e, ex.Num) and e.value == 0.0 for row in b.entries for e in row):
            bivs[name] = {"chart": b.chart.name, "zero": True}
        else:
            bivs[name] = {"chart": b.chart.name,
                          "entries": [[ex.to_string(e) for e in row] for row in b.entries]}
    doc["bivectors"] = bivs
    doc["maps"] = {name: {"source": m.source.name, "target": m.target.name,
                          "components": [ex.to_string(e) for e in m.components]}
                   for name, m in config.maps.items()}
    doc["diagram"] = {"total": config.refs["total"],
                      "left": dict(config.refs["left"]), "right": dict(config.refs["right"])}
    checks = {}
    for name, p in config.plan.checks.items():
        q = dict(p)
        if "grid" in q:
            if q["grid"] is None:
                del q["grid"]
            else:
                q["grid"] = _grid_doc(q["grid"])
        for key in ("space", "left_target", "right_target"):
            if key in q:
                q[key] = _basis_doc(q[key])
        checks[name] = q
    doc["plan"] = {"grid": _grid_doc(config.plan.grid), "checks": checks}
    return doc


def dumps_config(config: Config) -> str:
    return json.dumps(to_document(config), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# Corpus

def _corpus_dir():
    return resources.files("dualpair") / "corpus"


def corpus_list() -> list[str]:
    return sorted(p.name[:-5] for p in _corpus_dir().iterdir() if p.name.endswith(".json"))


def corpus_document(name: str) -> dict:
    available = corpus_list()
    if name not in available:
        raise ConfigError("", f"unknown corpus entry {name!r}; available: {', '.join(available)}")
    return json.loads((_corpus_dir() / f"{name}.json").read_text(encoding="utf-8"))


def corpus_get(name: str) -> Config:
    return load_config(corpus_document(name))
