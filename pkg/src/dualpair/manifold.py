"""Charts, scalar fields, smooth maps, bivector fields and Poisson brackets.

Poisson data is always given as the bivector matrix ``B`` (the sharp map
covectors -> vectors).  Brackets use ``{f, g} = df^T B dg`` and Hamiltonian
vector fields ``X_h = B dh``, so that ``X_h[g] = {g, h}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex

__all__ = [
    "ManifoldError", "Coordinate", "ChartManifold", "ScalarField", "SmoothMap",
    "BivectorField", "VectorAtPoint", "CovectorAtPoint", "jacobian",
    "poisson_bracket", "bracket_field", "hamiltonian_vf", "jacobiator",
    "validate_bivector", "BivectorReport", "NONDEGENERACY_TOL",
]

NONDEGENERACY_TOL = 1e-9
TWO_PI = 2.0 * math.pi


class ManifoldError(ValueError):
    pass


@dataclass(frozen=True)
class Coordinate:
    name: str
    periodic: bool = False
    bounds: tuple[float, float] | None = None  # None = all of R

    def __post_init__(self):
        if self.periodic and self.bounds is not None:
            raise ManifoldError(f"periodic coordinate {self.name!r} cannot have bounds")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo < hi:
                raise ManifoldError(f"empty bounds for coordinate {self.name!r}")


@dataclass(frozen=True)
class ChartManifold:
    name: str
    coordinates: tuple[Coordinate, ...]

    def __post_init__(self):
        object.__setattr__(self, "coordinates", tuple(self.coordinates))
        if not self.coordinates:
            raise ManifoldError(f"chart {self.name!r} has no coordinates")
        names = [c.name for c in self.coordinates]
        if len(set(names)) != len(names):
            raise ManifoldError(f"chart {self.name!r} has duplicate coordinate names")
        for n in names:
            if n == "pi" or n in ex.FUNCTIONS:
                raise ManifoldError(f"reserved coordinate name {n!r}")

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.coordinates)

    @property
    def periodic_mask(self) -> np.ndarray:
        return np.array([c.periodic for c in self.coordinates], dtype=bool)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ManifoldError(f"chart {self.name!r} has no coordinate {name!r}") from None

    def contains(self, point: Sequence[float], slack: float = 1e-12) -> bool:
        if len(point) != self.dim:
            return False
        for c, v in zip(self.coordinates, point):
            if not math.isfinite(v):
                return False
            if c.bounds is not None and not (c.bounds[0] - slack <= v <= c.bounds[1] + slack):
                return False
        return True

    def wrap(self, point: Sequence[float]) -> np.ndarray:
        """Reduce periodic coordinates to [0, 2pi)."""
        p = np.array(point, dtype=float)
        mask = self.periodic_mask
        p[mask] = np.mod(p[mask], TWO_PI)
        return p

    def check_point(self, point: Sequence[float]) -> None:
        if not self.contains(point):
            raise ManifoldError(f"point {list(point)} outside chart {self.name!r}")


def _check_names(e: ex.Expr, chart: ChartManifold, params: Mapping[str, float], what: str):
    unknown = ex.free_names(e) - set(chart.names) - set(params)
    if unknown:
        raise ManifoldError(f"{what}: unknown names {sorted(unknown)} "
                            f"(chart {chart.name!r} coordinates {list(chart.names)})")


def _constant_value(e: ex.Expr, params: Mapping[str, float]) -> float | None:
    if not ex.is_constant(e):
        return None
    return ex.evaluate(e, params)


def _check_torus_scalar(e: ex.Expr, chart: ChartManifold, params: Mapping[str, float], what: str):
    """Periodic coordinates may appear only as integer windings inside sin/cos."""
    periodic = {c.name for c in chart.coordinates if c.periodic}
    if not periodic:
        return

    def walk(node):
        if isinstance(node, ex.Var) and node.name in periodic:
            raise ManifoldError(
                f"{what}: periodic coordinate {node.name!r} used outside sin/cos")
        if isinstance(node, ex.Call) and node.func in ("sin", "cos"):
            arg = node.arg
            used = ex.free_vars(arg) & periodic
            for name in used:
                k = _constant_value(ex.diff(arg, name), params)
                if k is None or abs(k - round(k)) > 1e-12:
                    raise ManifoldError(
                        f"{what}: non-integer winding in {node.func}({ex.to_string(arg)}) "
                        f"for periodic coordinate {name!r}")
            # The non-periodic remainder may itself contain trig of periodic coordinates.
            for child in _nonperiodic_parts(arg, periodic):
                walk(child)
            return
        for child in ex._children(node):
            walk(child)

    walk(e)


def _nonperiodic_parts(arg: ex.Expr, periodic: set[str]):
    # Everything of the argument with the linear periodic part set to zero.
    zeroed = ex.substitute(arg, {n: ex.Num(0.0) for n in periodic})
    return [zeroed]


@dataclass(frozen=True)
class ScalarField:
    chart: ChartManifold
    body: ex.Expr
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))
        _check_names(self.body, self.chart, self.params, "scalar field")
        _check_torus_scalar(self.body, self.chart, self.params, "scalar field")

    @classmethod
    def from_text(cls, chart: ChartManifold, text: str,
                  params: Mapping[str, float] | None = None) -> "ScalarField":
        params = dict(params or {})
        return cls(chart, ex.parse(text, params), params)

    def __call__(self, point: Sequence[float]) -> float:
        return self._compiled(point)[0]

    @property
    def _compiled(self):
        c = self.__dict__.get("_cache_f")
        if c is None:
            c = ex.compile_exprs([self.body], self.chart.names, self.params)
            object.__setattr__(self, "_cache_f", c)
        return c

    def gradient_exprs(self) -> tuple[ex.Expr, ...]:
        c = self.__dict__.get("_cache_grad")
        if c is None:
            c = tuple(ex.diff(self.body, n) for n in self.chart.names)
            object.__setattr__(self, "_cache_grad", c)
        return c

    def differential(self, point: Sequence[float]) -> "CovectorAtPoint":
        g = self.__dict__.get("_cache_dg")
        if g is None:
            g = ex.compile_exprs(self.gradient_exprs(), self.chart.names, self.params)
            object.__setattr__(self, "_cache_dg", g)
        return CovectorAtPoint(self.chart, tuple(point), np.array(g(point)))

    def __eq__(self, other):
        return (isinstance(other, ScalarField) and self.chart == other.chart
                and self.body == other.body and self.params == other.params)

    def __hash__(self):
        return hash((self.chart, self.body))

    def __str__(self):
        return ex.to_string(self.body)


@dataclass(frozen=True)
class SmoothMap:
    source: ChartManifold
    target: ChartManifold
    components: tuple[ex.Expr, ...]
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "params", dict(self.params))
        label = f"map {self.name!r}" if self.name else "map"
        if len(self.components) != self.target.dim:
            raise ManifoldError(f"{label}: {len(self.components)} components for "
                                f"{self.target.dim}-dimensional target {self.target.name!r}")
        src_periodic = {c.name for c in self.source.coordinates if c.periodic}
        for tc, comp in zip(self.target.coordinates, self.components):
            what = f"{label}, component {tc.name!r}"
            _check_names(comp, self.source, self.params, what)
            if tc.periodic:
                for sc in self.source.coordinates:
                    k = _constant_value(ex.diff(comp, sc.name), self.params)
                    ok = k is not None and (abs(k - round(k)) <= 1e-12 if sc.periodic else k == 0.0)
                    if not ok:
                        raise ManifoldError(
                            f"{what}: non-integer winding onto periodic coordinate "
                            f"(d/d{sc.name} = {ex.to_string(ex.diff(comp, sc.name))})")
            else:
                _check_torus_scalar(comp, self.source, self.params, what)
        del src_periodic

    @classmethod
    def from_text(cls, source, target, texts, params=None, name=""):
        params = dict(params or {})
        return cls(source, target, tuple(ex.parse(t, params) for t in texts), params, name)

    def _get(self, key, build):
        c = self.__dict__.get(key)
        if c is None:
            c = build()
            object.__setattr__(self, key, c)
        return c

    def jacobian_exprs(self) -> tuple[tuple[ex.Expr, ...], ...]:
        return self._get("_cache_jexprs", lambda: tuple(
            tuple(ex.diff(comp, n) for n in self.source.names) for comp in self.components))

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        f = self._get("_cache_f", lambda: ex.compile_exprs(
            self.components, self.source.names, self.params))
        return np.array(f(point))

    def jacobian(self, point: Sequence[float]) -> np.ndarray:
        def build():
            flat = [e for row in self.jacobian_exprs() for e in row]
            return ex.compile_exprs(flat, self.source.names, self.params)
        f = self._get("_cache_j", build)
        return np.array(f(point)).reshape(self.target.dim, self.source.dim)

    def component_field(self, i: int) -> ScalarField:
        return ScalarField(self.source, self.components[i], self.params)

    def __eq__(self, other):
        return (isinstance(other, SmoothMap) and self.source == other.source
                and self.target == other.target and self.components == other.components
                and self.params == other.params and self.name == other.name)

    def __hash__(self):
        return hash((self.source, self.target, self.components))


@dataclass(frozen=True)
class BivectorField:
    chart: ChartManifold
    entries: tuple[tuple[ex.Expr, ...], ...]
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        entries = tuple(tuple(row) for row in self.entries)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "params", dict(self.params))
        n = self.chart.dim
        if len(entries) != n or any(len(r) != n for r in entries):
            raise ManifoldError(f"bivector {self.name!r}: entries must be {n}x{n}")
        for i in range(n):
            if not (isinstance(entries[i][i], ex.Num) and entries[i][i].value == 0.0):
                raise ManifoldError(f"bivector {self.name!r}: antisymmetry violated at ({i},{i})")
            for j in range(i):
                if not ex.is_negation(entries[i][j], entries[j][i]):
                    raise ManifoldError(
                        f"bivector {self.name!r}: antisymmetry violated at ({i},{j})")
        for i in range(n):
            for j in range(n):
                what = f"bivector {self.name!r} entry ({i},{j})"
                _check_names(entries[i][j], self.chart, self.params, what)
                _check_torus_scalar(entries[i][j], self.chart, self.params, what)

    @classmethod
    def from_text(cls, chart, rows, params=None, name=""):
        params = dict(params or {})
        return cls(chart, tuple(tuple(ex.parse(t, params) for t in row) for row in rows),
                   params, name)

    @classmethod
    def from_upper(cls, chart, upper: Mapping[tuple[int, int], str], params=None, name=""):
        """Build from strictly-upper entries ``{(i, j): text}``; the rest is zero."""
        params = dict(params or {})
        n = chart.dim
        m = [[ex.Num(0.0)] * n for _ in range(n)]
        for (i, j), text in upper.items():
            if not i < j:
                raise ManifoldError("from_upper expects i < j")
            e = ex.parse(text, params)
            m[i][j] = e
            m[j][i] = ex.Neg(e)
        return cls(chart, tuple(tuple(r) for r in m), params, name)

    @classmethod
    def zero(cls, chart, name=""):
        n = chart.dim
        return cls(chart, tuple(tuple(ex.Num(0.0) for _ in range(n)) for _ in range(n)), {}, name)

    @property
    def is_constant(self) -> bool:
        return all(ex.is_constant(e) for row in self.entries for e in row)

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        c = self.__dict__.get("_cache_f")
        if c is None:
            flat = [e for row in self.entries for e in row]
            c = ex.compile_exprs(flat, self.chart.names, self.params)
            object.__setattr__(self, "_cache_f", c)
        n = self.chart.dim
        return np.array(c(point)).reshape(n, n)

    def __eq__(self, other):
        return (isinstance(other, BivectorField) and self.chart == other.chart
                and self.entries == other.entries and self.params == other.params
                and self.name == other.name)

    def __hash__(self):
        return hash((self.chart, self.entries))


@dataclass(frozen=True)
class VectorAtPoint:
    chart: ChartManifold
    point: tuple[float, ...]
    components: np.ndarray

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ManifoldError("vector has wrong number of components")


@dataclass(frozen=True)
class CovectorAtPoint:
    chart: ChartManifold
    point: tuple[float, ...]
    components: np.ndarray

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ManifoldError("covector has wrong number of components")

    def __call__(self, v: VectorAtPoint) -> float:
        return float(self.components @ v.components)


# --------------------------------------------------------------------------
# Operations

def jacobian(f: SmoothMap, m: Sequence[float]) -> np.ndarray:
    f.source.check_point(m)
    return f.jacobian(m)


def _same_chart(*objs):
    charts = [o.chart for o in objs]
    if any(c != charts[0] for c in charts):
        raise ManifoldError("chart mismatch: " + ", ".join(c.name for c in charts))


def poisson_bracket(f: ScalarField, g: ScalarField, B: BivectorField):
    """Return ``m -> {f, g}(m) = df(m)^T B(m) dg(m)``."""
    _same_chart(f, g, B)

    def bracket(m):
        df = f.differential(m).components
        dg = g.differential(m).components
        return float(df @ B(m) @ dg)

    return bracket


def bracket_field(f: ScalarField, g: ScalarField, B: BivectorField) -> ScalarField:
    """Symbolic ``{f, g}`` as a scalar field."""
    _same_chart(f, g, B)
    params = {**B.params, **g.params, **f.params}
    df, dg = f.gradient_exprs(), g.gradient_exprs()
    total: ex.Expr = ex.Num(0.0)
    n = f.chart.dim
    for i in range(n):
        if df[i] == ex.Num(0.0):
            continue
        for j in range(n):
            if dg[j] == ex.Num(0.0) or B.entries[i][j] == ex.Num(0.0):
                continue
            total = ex._mk_add(total, ex._mk_mul(ex._mk_mul(df[i], B.entries[i][j]), dg[j]))
    return ScalarField(f.chart, total, params)


def hamiltonian_vf(h: ScalarField, B: BivectorField):
    """Return ``m -> X_h(m) = B(m) dh(m)`` as :class:`VectorAtPoint`."""
    _same_chart(h, B)

    def field_at(m):
        dh = h.differential(m).components
        return VectorAtPoint(h.chart, tuple(m), B(m) @ dh)

    return field_at


def hamiltonian_vf_exprs(h: ScalarField, B: BivectorField) -> tuple[ex.Expr, ...]:
    """Components of ``X_h`` as expressions, ``sum_j B_ij d_j h``."""
    _same_chart(h, B)
    dh = h.gradient_exprs()
    out = []
    for i in range(h.chart.dim):
        acc: ex.Expr = ex.Num(0.0)
        for j in range(h.chart.dim):
            acc = ex._mk_add(acc, ex._mk_mul(B.entries[i][j], dh[j]))
        out.append(acc)
    return tuple(out)


def jacobiator(B: BivectorField, f: ScalarField, g: ScalarField, h: ScalarField,
               m: Sequence[float]) -> float:
    """``{{f,g},h} + {{g,h},f} + {{h,f},g}`` at ``m``."""
    total = 0.0
    for a, b, c in ((f, g, h), (g, h, f), (h, f, g)):
        inner = bracket_field(a, b, B)
        total += poisson_bracket(inner, c, B)(m)
    return total


@dataclass
class BivectorReport:
    antisymmetric: bool
    nondegenerate: bool
    min_abs_det: float
    worst_point: tuple[float, ...] | None
    max_asymmetry: float


def validate_bivector(B: BivectorField, samples: Sequence[Sequence[float]],
                      tol: float = NONDEGENERACY_TOL) -> BivectorReport:
    """Antisymmetry and nondegeneracy over ``samples``.

    A point counts as nondegenerate when ``|det B| > tol * (max |B_ij|)^n``.
    Degenerate tensors are reported, never rejected.
    """
    n = B.chart.dim
    min_det = math.inf
    worst = None
    nondeg = True
    asym = 0.0
    for m in samples:
        M = B(m)
        asym = max(asym, float(np.max(np.abs(M + M.T))))
        d = abs(float(np.linalg.det(M)))
        scale = float(np.max(np.abs(M)))
        if d < min_det:
            min_det, worst = d, tuple(float(v) for v in m)
        if scale == 0.0 or not d > tol * scale ** n:
            nondeg = False
    if not samples:
        min_det = 0.0
        nondeg = False
    return BivectorReport(asym == 0.0, nondeg, min_det, worst, asym)
