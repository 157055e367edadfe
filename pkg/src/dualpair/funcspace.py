"""Truncated Fourier x polynomial function spaces and centralizer computations.

A basis function is a product over chart coordinates.  For a periodic
coordinate the factor is coded by an integer ``m``: ``0`` is the constant,
``m > 0`` is ``cos(m*th)`` and ``m < 0`` is ``sin(|m|*th)``.  For a linear
coordinate the code is the exponent ``a`` of ``x^a``.  A function is a dict
from such code tuples to real coefficients (a "trig polynomial").

Derivations ``g -> {g, h}`` are computed exactly into an enlarged target
space, so centralizers are kernels of exact matrices; nothing is lost by
truncating products.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .manifold import BivectorField, ChartManifold, ScalarField, SmoothMap
from .symplin import (ANGLE_TOL, Subspace, column_span, complement_within, nullspace,
                      subspace_included)

__all__ = [
    "FuncSpaceError", "BasisSpec", "FunctionSpace", "CoefficientSubspace", "build_basis",
    "to_trigpoly", "derivation_matrix", "centralizer", "pullback_span", "leg_generators",
    "howe_truncated_check", "HoweReport", "InclusionResult", "format_function",
    "resonance_margin", "KERNEL_TOL", "DEFAULT_SIZE_CAP",
]

KERNEL_TOL = 1e-9
COEFF_ROUND = 1e-10
DEFAULT_SIZE_CAP = 20000

TrigPoly = dict  # dict[tuple[int, ...], float]


class FuncSpaceError(ValueError):
    pass


# --------------------------------------------------------------------------
# Basis specification and spaces

@dataclass(frozen=True)
class BasisSpec:
    """Truncation window.

    ``max_frequency`` applies to periodic coordinates, ``max_degree`` to
    linear ones; ``per_coordinate`` overrides either by coordinate name.
    ``total_degree`` caps the summed polynomial exponents.
    """

    max_frequency: int = 0
    max_degree: int = 0
    total_degree: int | None = None
    per_coordinate: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "per_coordinate", dict(self.per_coordinate))
        if self.max_frequency < 0 or self.max_degree < 0:
            raise FuncSpaceError("truncation orders must be non-negative")
        if self.total_degree is not None and self.total_degree < 0:
            raise FuncSpaceError("total degree cap must be non-negative")
        if any(v < 0 for v in self.per_coordinate.values()):
            raise FuncSpaceError("truncation orders must be non-negative")

    def limits(self, chart: ChartManifold) -> tuple[int, ...]:
        unknown = set(self.per_coordinate) - set(chart.names)
        if unknown:
            raise FuncSpaceError(f"basis spec names unknown coordinates {sorted(unknown)} "
                                 f"of chart {chart.name!r}")
        out = []
        for c in chart.coordinates:
            if c.name in self.per_coordinate:
                out.append(int(self.per_coordinate[c.name]))
            elif c.periodic:
                out.append(self.max_frequency)
            else:
                lim = self.max_degree
                if self.total_degree is not None and not self.max_degree:
                    lim = self.total_degree
                out.append(lim)
        return tuple(out)

    def __hash__(self):
        return hash((self.max_frequency, self.max_degree, self.total_degree,
                     tuple(sorted(self.per_coordinate.items()))))


def _mode_rank(code: int) -> int:
    if code == 0:
        return 0
    return 2 * code - 1 if code > 0 else -2 * code


def _sort_key(key, periodic):
    ranks = tuple(_mode_rank(k) if p else k for k, p in zip(key, periodic))
    return (sum(abs(k) for k in key), ranks)


class FunctionSpace:
    """Ordered finite basis of products of Fourier modes and monomials."""

    def __init__(self, chart: ChartManifold, keys: Sequence[tuple[int, ...]]):
        self.chart = chart
        self.periodic = tuple(bool(p) for p in chart.periodic_mask)
        self.keys = tuple(sorted(set(keys), key=lambda k: _sort_key(k, self.periodic)))
        self.index = {k: i for i, k in enumerate(self.keys)}

    @property
    def dim(self) -> int:
        return len(self.keys)

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self.index

    def vector(self, poly: TrigPoly, strict: bool = True) -> np.ndarray:
        v = np.zeros(self.dim)
        for k, c in poly.items():
            i = self.index.get(k)
            if i is None:
                if strict and c != 0.0:
                    raise FuncSpaceError(f"{format_key(k, self.chart)} is outside the space")
                continue
            v[i] += c
        return v

    def basis_poly(self, i: int) -> TrigPoly:
        return {self.keys[i]: 1.0}

    def basis_expr(self, i: int) -> str:
        return format_key(self.keys[i], self.chart)

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate the function with ``coeffs`` at each row of ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(points.shape[0])
        for key, c in zip(self.keys, coeffs):
            if c == 0.0:
                continue
            out += c * _eval_key(key, self.periodic, points)
        return out


def _eval_key(key, periodic, points):
    val = np.ones(points.shape[0])
    for j, (k, p) in enumerate(zip(key, periodic)):
        if p:
            if k > 0:
                val = val * np.cos(k * points[:, j])
            elif k < 0:
                val = val * np.sin(-k * points[:, j])
        elif k:
            val = val * points[:, j] ** k
    return val


def build_basis(chart: ChartManifold, spec: BasisSpec,
                size_cap: int = DEFAULT_SIZE_CAP) -> FunctionSpace:
    """All basis products inside the window, in graded lexicographic order."""
    limits = spec.limits(chart)
    return _space_from_limits(chart, limits, spec.total_degree, size_cap)


def _space_from_limits(chart, limits, total_degree, size_cap):
    periodic = chart.periodic_mask
    ranges = []
    count = 1
    for lim, p in zip(limits, periodic):
        ranges.append(range(-lim, lim + 1) if p else range(0, lim + 1))
        count *= len(ranges[-1])
    if count > size_cap and total_degree is None:
        raise FuncSpaceError(f"function space of dimension {count} exceeds size cap {size_cap}")
    keys = []
    for key in itertools.product(*ranges):
        if total_degree is not None:
            deg = sum(k for k, p in zip(key, periodic) if not p)
            if deg > total_degree:
                continue
        keys.append(key)
    if len(keys) > size_cap:
        raise FuncSpaceError(f"function space of dimension {len(keys)} exceeds size cap {size_cap}")
    return FunctionSpace(chart, keys)


# --------------------------------------------------------------------------
# Trig-polynomial algebra

@lru_cache(maxsize=None)
def _mode_mul(a: int, b: int) -> tuple[tuple[int, float], ...]:
    if a == 0:
        return ((b, 1.0),)
    if b == 0:
        return ((a, 1.0),)
    p, q = abs(a), abs(b)
    d, s = abs(p - q), p + q
    if a > 0 and b > 0:  # cos p cos q
        return ((d, 0.5), (s, 0.5))
    if a < 0 and b < 0:  # sin p sin q
        return ((d, 0.5), (s, -0.5))
    if a < 0:  # sin p cos q = (sin(p+q) + sin(p-q)) / 2
        sp, sq = p, q
    else:
        sp, sq = q, p
    out = [(-s, 0.5)]
    if sp != sq:
        out.append((-d, 0.5 if sp > sq else -0.5))
    return tuple(out)


def _key_mul(k1, k2, periodic):
    terms = [((), 1.0)]
    for a, b, p in zip(k1, k2, periodic):
        if p:
            factors = _mode_mul(a, b)
        else:
            factors = ((a + b, 1.0),)
        terms = [(key + (code,), c * fc) for key, c in terms for code, fc in factors]
    return terms


def tp_add(a: TrigPoly, b: TrigPoly, scale: float = 1.0) -> TrigPoly:
    out = dict(a)
    for k, c in b.items():
        out[k] = out.get(k, 0.0) + scale * c
    return out


def tp_scale(a: TrigPoly, s: float) -> TrigPoly:
    return {k: s * c for k, c in a.items()}


def tp_mul(a: TrigPoly, b: TrigPoly, periodic) -> TrigPoly:
    out: TrigPoly = {}
    for k1, c1 in a.items():
        if c1 == 0.0:
            continue
        for k2, c2 in b.items():
            if c2 == 0.0:
                continue
            for k, c in _key_mul(k1, k2, periodic):
                out[k] = out.get(k, 0.0) + c1 * c2 * c
    return out


def tp_diff(a: TrigPoly, i: int, periodic) -> TrigPoly:
    out: TrigPoly = {}
    for key, c in a.items():
        k = key[i]
        if k == 0:
            continue
        if periodic[i]:
            # cos(k t)' = -k sin(k t) and sin(k t)' = k cos(k t); both map code k to -k.
            new, f = -k, -k
        else:
            new, f = k - 1, k
        nk = key[:i] + (new,) + key[i + 1:]
        out[nk] = out.get(nk, 0.0) + f * c
    return out


def tp_clean(a: TrigPoly, tol: float = 0.0) -> TrigPoly:
    return {k: c for k, c in a.items() if abs(c) > tol}


def _const(n, value):
    return {(0,) * n: float(value)} if value != 0.0 else {}


def _trig_of_combination(ks, offset, n, periodic_idx, periodic):
    """(cos, sin) of ``sum_i ks[i]*th_i + offset`` as trig polynomials."""
    zero = (0,) * n
    c, s = {zero: 1.0}, {}
    for i, k in zip(periodic_idx, ks):
        if k == 0:
            continue
        key_c = zero[:i] + (abs(k),) + zero[i + 1:]
        key_s = zero[:i] + (-abs(k),) + zero[i + 1:]
        ck = {key_c: 1.0}
        sk = {key_s: 1.0 if k > 0 else -1.0}
        c, s = (tp_add(tp_mul(c, ck, periodic), tp_mul(s, sk, periodic), -1.0),
                tp_add(tp_mul(s, ck, periodic), tp_mul(c, sk, periodic)))
    if offset != 0.0:
        co, so = math.cos(offset), math.sin(offset)
        c, s = (tp_add(tp_scale(c, co), s, -so), tp_add(tp_scale(s, co), c, so))
    return tp_clean(c), tp_clean(s)


def _affine_periodic(arg: ex.Expr, chart: ChartManifold, params, what):
    periodic_names = [c.name for c in chart.coordinates if c.periodic]
    nonper = set(chart.names) - set(periodic_names)
    if ex.free_vars(arg) & nonper:
        raise FuncSpaceError(f"{what}: trig argument {ex.to_string(arg)} depends on a "
                             "non-periodic coordinate")
    ks = []
    for name in periodic_names:
        d = ex.diff(arg, name)
        if not ex.is_constant(d):
            raise FuncSpaceError(f"{what}: trig argument {ex.to_string(arg)} is not linear")
        k = ex.evaluate(d, params)
        if abs(k - round(k)) > 1e-12:
            raise FuncSpaceError(f"{what}: non-integer frequency in {ex.to_string(arg)}")
        ks.append(int(round(k)))
    offset = ex.evaluate(ex.substitute(arg, {n: ex.Num(0.0) for n in periodic_names}), params)
    return ks, offset


def to_trigpoly(e: ex.Expr, chart: ChartManifold, params: Mapping[str, float] | None = None,
                what: str = "expression") -> TrigPoly:
    """Expand ``e`` exactly in the product basis; raise if not of that form."""
    params = dict(params or {})
    n = chart.dim
    periodic = tuple(bool(p) for p in chart.periodic_mask)
    periodic_idx = [i for i, p in enumerate(periodic) if p]

    def rec(node) -> TrigPoly:
        if ex.is_constant(node):
            return _const(n, ex.evaluate(node, params))
        if isinstance(node, ex.Var):
            i = chart.index(node.name)
            if periodic[i]:
                raise FuncSpaceError(f"{what}: periodic coordinate {node.name!r} outside sin/cos")
            key = [0] * n
            key[i] = 1
            return {tuple(key): 1.0}
        if isinstance(node, ex.Neg):
            return tp_scale(rec(node.arg), -1.0)
        if isinstance(node, ex.Add):
            return tp_add(rec(node.left), rec(node.right))
        if isinstance(node, ex.Sub):
            return tp_add(rec(node.left), rec(node.right), -1.0)
        if isinstance(node, ex.Mul):
            return tp_mul(rec(node.left), rec(node.right), periodic)
        if isinstance(node, ex.Div):
            if not ex.is_constant(node.right):
                raise FuncSpaceError(f"{what}: division by a non-constant "
                                     f"{ex.to_string(node.right)}")
            den = ex.evaluate(node.right, params)
            if den == 0.0:
                raise FuncSpaceError(f"{what}: division by zero")
            return tp_scale(rec(node.left), 1.0 / den)
        if isinstance(node, ex.Pow):
            if not ex.is_constant(node.exponent):
                raise FuncSpaceError(f"{what}: non-constant exponent")
            p = ex.evaluate(node.exponent, params)
            if p < 0 or p != int(p):
                raise FuncSpaceError(f"{what}: exponent {p} is not a non-negative integer")
            base = rec(node.base)
            out = _const(n, 1.0)
            for _ in range(int(p)):
                out = tp_mul(out, base, periodic)
            return out
        if isinstance(node, ex.Call):
            if node.func not in ("sin", "cos"):
                raise FuncSpaceError(f"{what}: {node.func}(...) of a coordinate is not a "
                                     "trigonometric polynomial")
            ks, offset = _affine_periodic(node.arg, chart, params, what)
            c, s = _trig_of_combination(ks, offset, n, periodic_idx, periodic)
            return c if node.func == "cos" else s
        raise FuncSpaceError(f"{what}: unsupported node {node!r}")

    return tp_clean(rec(e))


def _content(poly: TrigPoly, n: int) -> list[int]:
    out = [0] * n
    for key in poly:
        for i, k in enumerate(key):
            out[i] = max(out[i], abs(k))
    return out


# --------------------------------------------------------------------------
# Formatting

def format_key(key, chart: ChartManifold) -> str:
    parts = []
    for k, c in zip(key, chart.coordinates):
        if c.periodic:
            if k:
                arg = c.name if abs(k) == 1 else f"{abs(k)}*{c.name}"
                parts.append(f"{'cos' if k > 0 else 'sin'}({arg})")
        elif k == 1:
            parts.append(c.name)
        elif k > 1:
            parts.append(f"{c.name}^{k}")
    return "*".join(parts) if parts else "1"


def _fmt_coeff(c: float) -> str:
    return f"{round(c / COEFF_ROUND) * COEFF_ROUND:.10g}"


def format_function(space: FunctionSpace, coeffs: np.ndarray, tol: float = COEFF_ROUND) -> str:
    """Human-readable expression (parseable by :func:`dualpair.expr.parse`)."""
    out = []
    for key, c in zip(space.keys, coeffs):
        if abs(c) <= tol:
            continue
        mono = format_key(key, space.chart)
        mag = abs(c)
        sign = "-" if c < 0 else "+"
        if abs(mag - 1.0) <= tol:
            term = mono
        elif mono == "1":
            term = _fmt_coeff(mag)
        else:
            term = f"{_fmt_coeff(mag)}*{mono}"
        out.append((sign, term))
    if not out:
        return "0"
    first_sign, first = out[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, term in out[1:]:
        text += f" {sign} {term}"
    return text


# --------------------------------------------------------------------------
# Derivations and centralizers

@dataclass
class CoefficientSubspace:
    space: FunctionSpace
    subspace: Subspace

    @property
    def dim(self) -> int:
        return self.subspace.dim

    def functions(self) -> list[str]:
        return [format_function(self.space, v) for v in echelon_basis(self.subspace.basis)]


def echelon_basis(basis: np.ndarray, tol: float = 1e-8) -> list[np.ndarray]:
    """Reduced row echelon form of the span of the columns of ``basis``.

    Pivots are taken in basis order, leading coefficients are 1, and entries
    below ``COEFF_ROUND`` are zeroed.
    """
    if basis.shape[1] == 0:
        return []
    M = basis.T.copy()
    rows, cols = M.shape
    r = 0
    for col in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(M[r:, col])))
        if abs(M[piv, col]) <= tol:
            continue
        M[[r, piv]] = M[[piv, r]]
        M[r] /= M[r, col]
        for i in range(rows):
            if i != r and M[i, col] != 0.0:
                M[i] -= M[i, col] * M[r]
        r += 1
    M = M[:r]
    M[np.abs(M) < COEFF_ROUND] = 0.0
    return list(M)


def _vector_field_polys(h_poly: TrigPoly, B: BivectorField, chart, periodic, params, n):
    dh = [tp_diff(h_poly, j, periodic) for j in range(n)]
    B_polys = [[to_trigpoly(B.entries[i][j], chart, {**B.params, **params},
                            what=f"bivector entry ({i},{j})") for j in range(n)]
               for i in range(n)]
    V = []
    for i in range(n):
        acc: TrigPoly = {}
        for j in range(n):
            if B_polys[i][j] and dh[j]:
                acc = tp_add(acc, tp_mul(B_polys[i][j], dh[j], periodic))
        V.append(tp_clean(acc))
    return V


def hamiltonian_polys(h: ScalarField, B: BivectorField) -> list[TrigPoly]:
    """Components of ``X_h`` as trig polynomials."""
    if h.chart != B.chart:
        raise FuncSpaceError("chart mismatch between Hamiltonian and bivector")
    chart = h.chart
    periodic = tuple(bool(p) for p in chart.periodic_mask)
    hp = to_trigpoly(h.body, chart, h.params, what=f"generator {h}")
    return _vector_field_polys(hp, B, chart, periodic, h.params, chart.dim)


def derivation_matrix(h: ScalarField, src: FunctionSpace, B: BivectorField,
                      size_cap: int = DEFAULT_SIZE_CAP) -> tuple[np.ndarray, FunctionSpace]:
    """Matrix of ``g -> {g, h} = X_h[g]`` from ``src`` into an enlarged space.

    Column ``j`` holds the exact coefficients of ``X_h[basis_j]``.
    """
    chart = src.chart
    if h.chart != chart:
        raise FuncSpaceError("generator chart does not match the function space")
    n = chart.dim
    periodic = src.periodic
    V = hamiltonian_polys(h, B)
    vcontent = [0] * n
    for comp in V:
        vcontent = [max(a, b) for a, b in zip(vcontent, _content(comp, n))]
    scontent = [0] * n
    for key in src.keys:
        for i, k in enumerate(key):
            scontent[i] = max(scontent[i], abs(k))
    limits = [a + b for a, b in zip(scontent, vcontent)]
    columns = []
    produced = set()
    for key in src.keys:
        col: TrigPoly = {}
        for i in range(n):
            if not V[i]:
                continue
            d = tp_diff({key: 1.0}, i, periodic)
            if d:
                col = tp_add(col, tp_mul(V[i], d, periodic))
        col = tp_clean(col)
        produced.update(col)
        columns.append(col)
    # Allocate only the modes that can occur; the window bounds them.
    for k in produced:
        for i, (c, lim) in enumerate(zip(k, limits)):
            if abs(c) > lim:
                raise AssertionError("derivation escaped its enlarged window")
    if len(produced) > size_cap:
        raise FuncSpaceError(f"derivation target of dimension {len(produced)} exceeds "
                             f"size cap {size_cap}")
    target = FunctionSpace(chart, produced)
    M = np.zeros((target.dim, src.dim))
    for j, col in enumerate(columns):
        for k, c in col.items():
            M[target.index[k], j] = c
    return M, target


def centralizer(space: FunctionSpace, generators: Sequence[ScalarField], B: BivectorField,
                tol: float = KERNEL_TOL) -> CoefficientSubspace:
    """Elements of ``space`` Poisson-commuting with every generator."""
    blocks = [derivation_matrix(g, space, B)[0] for g in generators]
    if not blocks:
        return CoefficientSubspace(space, Subspace(np.eye(space.dim)))
    A = np.vstack(blocks)
    return CoefficientSubspace(space, nullspace(A, tol))


def _pullback_poly(key, pi: SmoothMap, comp_polys, comp_affine, src_chart, periodic_src):
    n = src_chart.dim
    out = _const(n, 1.0)
    for code, tc, poly, aff in zip(key, pi.target.coordinates, comp_polys, comp_affine):
        if code == 0:
            continue
        if tc.periodic:
            ks, offset = aff
            m = abs(code)
            c, s = _trig_of_combination([m * k for k in ks], m * offset, n,
                                        [i for i, p in enumerate(periodic_src) if p],
                                        periodic_src)
            factor = c if code > 0 else s
        else:
            factor = _const(n, 1.0)
            for _ in range(code):
                factor = tp_mul(factor, poly, periodic_src)
        out = tp_mul(out, factor, periodic_src)
    return tp_clean(out)


@dataclass
class PullbackResult:
    span: CoefficientSubspace
    escaped: list[str]


def pullback_span(pi: SmoothMap, target_spec: BasisSpec, space: FunctionSpace,
                  strict: bool = False) -> PullbackResult:
    """Span of ``{b o pi}`` for target basis functions ``b``, intersected with ``space``.

    Pullbacks that leave the window are listed in ``escaped``; with
    ``strict=True`` any escape raises instead.
    """
    src = pi.source
    if src != space.chart:
        raise FuncSpaceError("map source does not match the function space chart")
    periodic = space.periodic
    tspace = build_basis(pi.target, target_spec)
    comp_polys, comp_affine = [], []
    for tc, comp in zip(pi.target.coordinates, pi.components):
        what = f"component {tc.name!r} of {pi.name or 'map'}"
        if tc.periodic:
            comp_polys.append(None)
            comp_affine.append(_affine_periodic(comp, src, pi.params, what))
        else:
            comp_polys.append(to_trigpoly(comp, src, pi.params, what))
            comp_affine.append(None)
    polys = [_pullback_poly(k, pi, comp_polys, comp_affine, src, periodic) for k in tspace.keys]
    outside_keys = sorted({k for p in polys for k in p if k not in space.index},
                          key=lambda k: _sort_key(k, periodic))
    escaped = [format_key(k, pi.target) for k, p in zip(tspace.keys, polys)
               if any(kk not in space.index for kk in p)]
    if strict and escaped:
        raise FuncSpaceError(f"pullback of {escaped[0]} escapes the truncation window")
    P_in = np.column_stack([space.vector(p, strict=False) for p in polys]) if polys \
        else np.zeros((space.dim, 0))
    if outside_keys:
        oidx = {k: i for i, k in enumerate(outside_keys)}
        P_out = np.zeros((len(outside_keys), len(polys)))
        for j, p in enumerate(polys):
            for k, c in p.items():
                if k in oidx:
                    P_out[oidx[k], j] = c
        combos = nullspace(P_out, KERNEL_TOL).basis
        P_in = P_in @ combos
    return PullbackResult(CoefficientSubspace(space, column_span(P_in, KERNEL_TOL)), escaped)


def leg_generators(pi: SmoothMap) -> list[ScalarField]:
    """Functions generating the pullback algebra of ``pi``.

    A linear target coordinate contributes its pullback; a periodic one
    contributes the cosine and sine of its pullback.
    """
    out = []
    for tc, comp in zip(pi.target.coordinates, pi.components):
        if tc.periodic:
            out.append(ScalarField(pi.source, ex.Call("cos", comp), pi.params))
            out.append(ScalarField(pi.source, ex.Call("sin", comp), pi.params))
        else:
            out.append(ScalarField(pi.source, comp, pi.params))
    return out


def resonance_margin(h: ScalarField, B: BivectorField, K: int) -> float | None:
    """``min |k . v|`` over ``0 < max|k_i| <= K`` when ``X_h`` is a constant torus field.

    Returns None when ``X_h`` is not a constant field tangent to the torus
    directions.
    """
    chart = h.chart
    periodic = [bool(p) for p in chart.periodic_mask]
    V = hamiltonian_polys(h, B)
    n = chart.dim
    zero = (0,) * n
    v = []
    for i, comp in enumerate(V):
        if any(k != zero for k in comp):
            return None
        val = comp.get(zero, 0.0)
        if periodic[i]:
            v.append(val)
        elif val != 0.0:
            return None
    if not v or K <= 0:
        return None
    v = np.array(v)
    grids = np.array(list(itertools.product(range(-K, K + 1), repeat=len(v))))
    grids = grids[np.any(grids != 0, axis=1)]
    return float(np.min(np.abs(grids @ v)))


# --------------------------------------------------------------------------
# Howe check

@dataclass
class InclusionResult:
    holds: bool
    max_angle: float
    dims: tuple[int, int]
    witnesses: list[str]


@dataclass
class HoweReport:
    space_dim: int
    dims: dict
    inclusions: dict
    howe_consistent: bool
    escaped: dict
    resonance: dict
    notes: list[str]


def _inclusion(A: CoefficientSubspace, Bsp: CoefficientSubspace, max_witnesses=3) -> InclusionResult:
    holds, angle = subspace_included(A.subspace, Bsp.subspace, ANGLE_TOL)
    witnesses: list[str] = []
    if not holds:
        comp = complement_within(Bsp.subspace, A.subspace)
        for vec in echelon_basis(comp.basis)[:max_witnesses]:
            witnesses.append(format_function(A.space, vec))
    return InclusionResult(holds, angle, (A.dim, Bsp.dim), witnesses)


def howe_truncated_check(pi1: SmoothMap, pi2: SmoothMap, B: BivectorField, space_spec: BasisSpec,
                         target_spec1: BasisSpec, target_spec2: BasisSpec) -> HoweReport:
    """Truncated test of ``F1^c = F2`` and ``F2^c = F1`` inside one window.

    ``F_j`` is the pullback algebra of leg ``j`` cut to the window and
    ``F_j^c`` its centralizer in the window.  Equality is evidence, not proof;
    a failed inclusion comes with explicit witness functions.
    """
    space = build_basis(B.chart, space_spec)
    g1, g2 = leg_generators(pi1), leg_generators(pi2)
    c1 = centralizer(space, g1, B)
    c2 = centralizer(space, g2, B)
    p1 = pullback_span(pi1, target_spec1, space)
    p2 = pullback_span(pi2, target_spec2, space)
    F1, F2 = p1.span, p2.span
    inclusions = {
        "F2_in_F1c": _inclusion(F2, c1),
        "F1c_in_F2": _inclusion(c1, F2),
        "F1_in_F2c": _inclusion(F1, c2),
        "F2c_in_F1": _inclusion(c2, F1),
    }
    consistent = all(r.holds for r in inclusions.values())
    Kp = max((lim for lim, c in zip(space_spec.limits(B.chart), B.chart.coordinates)
              if c.periodic), default=0)
    resonance = {}
    for label, gens in (("left", g1), ("right", g2)):
        margins = [m for m in (resonance_margin(g, B, Kp) for g in gens) if m is not None]
        resonance[label] = min(margins) if margins else None
    notes = ["truncated check: equality is necessary-condition evidence, "
             "a failed inclusion is a constructive refutation"]
    for label, r in resonance.items():
        if r is not None and r <= 1e3 * KERNEL_TOL:
            notes.append(f"{label} leg: resonance margin {r:.3e} is near the kernel tolerance")
    return HoweReport(
        space_dim=space.dim,
        dims={"F1": F1.dim, "F2": F2.dim, "F1c": c1.dim, "F2c": c2.dim},
        inclusions=inclusions,
        howe_consistent=consistent,
        escaped={"left": p1.escaped, "right": p2.escaped},
        resonance=resonance,
        notes=notes,
    )
