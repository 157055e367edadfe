"""Pointwise and grid-level dual-pair diagnostics."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .manifold import (NONDEGENERACY_TOL, BivectorField, ChartManifold, SmoothMap,
                       validate_bivector)
from .symplin import (RANK_TOL, DegenerateBivectorError, column_span, nullspace,
                      numerical_rank, subspace_equal, symplectic_orthogonal)

__all__ = [
    "DiagnosticsError", "PreimageError", "Leg", "DualPairDiagram", "SampleGrid", "LWVerdict",
    "PoissonMapReport", "RankScanReport", "PushforwardReport", "LeafReport",
    "check_poisson_map", "lw_check_at", "lw_scan", "rank_scan", "dimension_check",
    "pushforward_bivector", "leaf_correspondence_check", "total_space_report", "GRID_OFFSET",
]

# Irrational fraction of a cell used to offset lattices on periodic axes.
GRID_OFFSET = 1.0 / math.pi
DEFAULT_WINDOW = (-1.0, 1.0)
POISSON_TOL = 1e-9
PROJECTABLE_TOL = 1e-8


class DiagnosticsError(ValueError):
    pass


class PreimageError(DiagnosticsError):
    pass


# --------------------------------------------------------------------------
# Diagram and grids

@dataclass(frozen=True)
class Leg:
    map: SmoothMap
    bivector: BivectorField | None = None
    fibers_connected: str = "unknown"  # yes | no | unknown

    def __post_init__(self):
        if self.fibers_connected not in ("yes", "no", "unknown"):
            raise DiagnosticsError(f"fibers_connected must be yes/no/unknown, "
                                   f"got {self.fibers_connected!r}")
        if self.bivector is not None and self.bivector.chart != self.map.target:
            raise DiagnosticsError("leg bivector must live on the map's target chart")


@dataclass(frozen=True)
class DualPairDiagram:
    bivector: BivectorField
    left: Leg
    right: Leg

    def __post_init__(self):
        for side, leg in (("left", self.left), ("right", self.right)):
            if leg.map.source != self.bivector.chart:
                raise DiagnosticsError(f"{side} map does not start at the total space "
                                       f"{self.bivector.chart.name!r}")

    @property
    def total(self) -> ChartManifold:
        return self.bivector.chart

    def swapped(self) -> "DualPairDiagram":
        return DualPairDiagram(self.bivector, self.right, self.left)


@dataclass(frozen=True)
class SampleGrid:
    """Deterministic lattice over a chart.

    Periodic axes use ``2*pi*(k + GRID_OFFSET)/N``; other axes use ``N``
    evenly spaced points over the coordinate bounds (or ``window`` when the
    coordinate is unbounded).  ``include`` points are appended verbatim;
    ``jitter`` perturbs lattice points with a seeded generator.
    """

    points_per_axis: int | Sequence[int] = 7
    include: tuple[tuple[float, ...], ...] = ()
    window: tuple[float, float] = DEFAULT_WINDOW
    seed: int = 0
    jitter: float = 0.0
    points: tuple[tuple[float, ...], ...] | None = None  # explicit list overrides lattice

    def sample(self, chart: ChartManifold) -> np.ndarray:
        n = chart.dim
        if self.points is not None:
            pts = np.array(self.points, dtype=float).reshape(-1, n)
        else:
            counts = self.points_per_axis
            if isinstance(counts, int):
                counts = [counts] * n
            if len(counts) != n:
                raise DiagnosticsError("points_per_axis must match the chart dimension")
            axes = []
            for c, N in zip(chart.coordinates, counts):
                if N < 1:
                    raise DiagnosticsError("points_per_axis must be positive")
                if c.periodic:
                    axes.append(2 * math.pi * (np.arange(N) + GRID_OFFSET) / N)
                else:
                    lo, hi = c.bounds if c.bounds is not None else self.window
                    axes.append(np.linspace(lo, hi, N) if N > 1 else np.array([(lo + hi) / 2]))
            pts = np.array(list(itertools.product(*axes)), dtype=float)
            if self.jitter:
                rng = np.random.default_rng(self.seed)
                pts = pts + self.jitter * rng.uniform(-1.0, 1.0, pts.shape)
                for j, c in enumerate(chart.coordinates):
                    if c.bounds is not None:
                        pts[:, j] = np.clip(pts[:, j], *c.bounds)
        if self.include:
            extra = np.array(self.include, dtype=float).reshape(-1, n)
            pts = np.vstack([pts, extra])
        for p in pts:
            if not chart.contains(p):
                raise DiagnosticsError(f"grid point {p.tolist()} outside chart {chart.name!r}")
        return pts


def _scale(*mats) -> float:
    return max([1.0] + [float(np.max(np.abs(m))) for m in mats if np.size(m)])


# --------------------------------------------------------------------------
# Poisson maps

@dataclass
class PoissonMapReport:
    passed: bool
    max_residual: float
    worst_point: list[float] | None
    scale: float


def check_poisson_map(pi: SmoothMap, B_M: BivectorField, B_P: BivectorField,
                      grid: SampleGrid | np.ndarray, tol: float = POISSON_TOL) -> PoissonMapReport:
    """Residual of ``J B_M J^T = B_P o pi`` over the grid (matrix max-norm)."""
    if pi.source != B_M.chart or pi.target != B_P.chart:
        raise DiagnosticsError("chart mismatch between map and bivectors")
    pts = grid.sample(pi.source) if isinstance(grid, SampleGrid) else np.asarray(grid)
    worst, worst_pt, scale = 0.0, None, 1.0
    for m in pts:
        J = pi.jacobian(m)
        push = J @ B_M(m) @ J.T
        target = B_P(pi(m))
        r = float(np.max(np.abs(push - target))) if push.size else 0.0
        scale = max(scale, _scale(push, target))
        if worst_pt is None or r > worst:
            worst, worst_pt = r, m.tolist()
    return PoissonMapReport(worst <= tol * scale, worst, worst_pt, scale)


# --------------------------------------------------------------------------
# Lie-Weinstein condition

@dataclass
class LWVerdict:
    point: list[float]
    dim_K1: int
    dim_K2: int
    dim_K1_omega: int
    max_angle: float
    passed: bool


def lw_check_at(d: DualPairDiagram, m: Sequence[float], rank_tol: float = RANK_TOL) -> LWVerdict:
    """Is ``(ker T_m pi1)^omega == ker T_m pi2``?"""
    B = d.bivector(m)
    K1 = nullspace(d.left.map.jacobian(m), rank_tol)
    K2 = nullspace(d.right.map.jacobian(m), rank_tol)
    try:
        K1w = symplectic_orthogonal(K1, B, NONDEGENERACY_TOL)
    except DegenerateBivectorError as exc:
        raise DiagnosticsError(f"total-space bivector degenerate at {list(m)}: {exc}") from None
    cmp = subspace_equal(K1w, K2)
    return LWVerdict([float(v) for v in m], K1.dim, K2.dim, K1w.dim, cmp.max_angle, cmp.equal)


def lw_scan(d: DualPairDiagram, grid: SampleGrid | np.ndarray,
            rank_tol: float = RANK_TOL) -> list[LWVerdict]:
    pts = grid.sample(d.total) if isinstance(grid, SampleGrid) else np.asarray(grid)
    return [lw_check_at(d, m, rank_tol) for m in pts]


# --------------------------------------------------------------------------
# Ranks and dimensions

@dataclass
class RankScanReport:
    histogram: dict[int, dict]  # rank -> {"count": int, "witness": point}
    constant_rank: bool
    submersion: bool
    target_dim: int


def rank_scan(pi: SmoothMap, grid: SampleGrid | np.ndarray,
              rank_tol: float = RANK_TOL) -> RankScanReport:
    pts = grid.sample(pi.source) if isinstance(grid, SampleGrid) else np.asarray(grid)
    counts: Counter = Counter()
    witness: dict[int, list[float]] = {}
    for m in pts:
        r = numerical_rank(pi.jacobian(m), rank_tol)
        counts[r] += 1
        witness.setdefault(r, [float(v) for v in m])
    hist = {r: {"count": counts[r], "witness": witness[r]} for r in sorted(counts)}
    ranks = set(counts)
    return RankScanReport(hist, len(ranks) == 1, ranks == {pi.target.dim}, pi.target.dim)


def dimension_check(d: DualPairDiagram) -> dict:
    """Complementary dimensions: ``dim P1 + dim P2 == dim M``."""
    p1, p2, m = d.left.map.target.dim, d.right.map.target.dim, d.total.dim
    return {"passed": p1 + p2 == m, "dim_P1": p1, "dim_P2": p2, "dim_M": m}


# --------------------------------------------------------------------------
# Pushforward of the total-space bivector

@dataclass
class PushforwardReport:
    projectable: bool
    max_fiber_variation: float
    scale: float
    table: list[dict]  # [{"target": y, "matrix": B_P(y), "preimages": k}]
    bivector: BivectorField | None
    fitted: list[list[str]] | None
    unresolved_targets: int
    rank_ok: bool
    notes: list[str] = field(default_factory=list)


def _wrap_residual(r: np.ndarray, periodic: np.ndarray) -> np.ndarray:
    r = r.copy()
    r[periodic] = (r[periodic] + math.pi) % (2 * math.pi) - math.pi
    return r


def _find_preimage(pi: SmoothMap, y: np.ndarray, start: np.ndarray, tol: float,
                   max_iter: int = 60) -> np.ndarray | None:
    periodic_t = pi.target.periodic_mask
    chart = pi.source
    m = start.copy()
    for _ in range(max_iter):
        try:
            r = _wrap_residual(pi(m) - y, periodic_t)
        except ex.EvalError:
            return None
        norm = float(np.max(np.abs(r)))
        if norm <= tol:
            return m if chart.contains(m) else None
        J = pi.jacobian(m)
        step = np.linalg.lstsq(J, r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-4:
            trial = m - lam * step
            try:
                rt = _wrap_residual(pi(trial) - y, periodic_t)
            except ex.EvalError:
                rt = None
            if rt is not None and float(np.max(np.abs(rt))) < norm:
                m = trial
                break
            lam *= 0.5
        else:
            return None
    return None


def _fiber_starts(pi: SmoothMap, m: np.ndarray, grid: SampleGrid, count: int,
                  rng: np.random.Generator, rank_tol: float) -> list[np.ndarray]:
    chart = pi.source
    K = nullspace(pi.jacobian(m), rank_tol)
    starts = []
    for i in range(count):
        if K.dim and i % 2 == 0:
            step = K.basis @ rng.normal(size=K.dim)
            s = m + 0.6 * step / max(1e-12, float(np.linalg.norm(step)))
        else:
            s = np.empty(chart.dim)
            for j, c in enumerate(chart.coordinates):
                if c.periodic:
                    s[j] = rng.uniform(0.0, 2 * math.pi)
                else:
                    lo, hi = c.bounds if c.bounds is not None else grid.window
                    s[j] = rng.uniform(lo, hi)
        starts.append(s)
    return starts


def _fit_entries(targets: np.ndarray, mats: np.ndarray, chart: ChartManifold, scale: float):
    """Fit each entry as affine in the non-periodic target coordinates."""
    n = chart.dim
    lin = [j for j, c in enumerate(chart.coordinates) if not c.periodic]
    X = np.column_stack([np.ones(len(targets))] + [targets[:, j] for j in lin])
    texts = [["0"] * n for _ in range(n)]
    for i in range(n):
        for k in range(i + 1, n):
            yv = mats[:, i, k]
            coef, *_ = np.linalg.lstsq(X, yv, rcond=None)
            if float(np.max(np.abs(X @ coef - yv))) > PROJECTABLE_TOL * scale:
                return None
            terms = []
            for c, label in zip(coef, ["1"] + [chart.coordinates[j].name for j in lin]):
                if abs(c) <= 1e-10 * scale:
                    continue
                r = round(c)
                c = float(r) if abs(c - r) <= 1e-10 * scale else float(c)
                terms.append((c, label))
            texts[i][k] = _linear_text(terms)
            if not terms:
                texts[k][i] = "0"
            elif len(terms) == 1 and terms[0][0] < 0:
                texts[k][i] = texts[i][k][1:]
            elif len(terms) == 1:
                texts[k][i] = "-" + texts[i][k]
            else:
                texts[k][i] = "-(" + texts[i][k] + ")"
    return texts


def _linear_text(terms) -> str:
    if not terms:
        return "0"
    out = ""
    for c, label in terms:
        mag = abs(c)
        body = repr(mag) if label == "1" else (label if mag == 1.0 else f"{mag!r}*{label}")
        if not out:
            out = ("-" if c < 0 else "") + body
        else:
            out += (" - " if c < 0 else " + ") + body
    return out


def pushforward_bivector(pi: SmoothMap, B_M: BivectorField, grid: SampleGrid,
                         fiber_samples: int = 4, targets: int = 8,
                         rank_tol: float = RANK_TOL) -> PushforwardReport:
    """Candidate target bivector ``J B_M J^T`` and whether it is constant on fibers.

    Target points are images of grid points; for each, further preimages are
    located by damped Gauss-Newton from seeded starts.  Entries that are
    affine in the non-periodic target coordinates are fitted to expressions.
    """
    if pi.source != B_M.chart:
        raise DiagnosticsError("chart mismatch between map and bivector")
    pts = grid.sample(pi.source)
    rng = np.random.default_rng(grid.seed)
    order = rng.permutation(len(pts))
    base_pts = pts[np.sort(order[:targets])]
    notes = []
    rank_ok = all(numerical_rank(pi.jacobian(m), rank_tol) == pi.target.dim for m in pts)
    if not rank_ok:
        notes.append("map is not a submersion on the whole grid; fibers sampled as found")
    table, tgt_list, mat_list = [], [], []
    variation, scale, unresolved = 0.0, 1.0, 0
    for m in base_pts:
        y = pi(m)
        found = [m]
        for s in _fiber_starts(pi, m, grid, 3 * fiber_samples, rng, rank_tol):
            if len(found) >= fiber_samples:
                break
            yt = pi(m)
            tol = 1e-12 * max(1.0, float(np.max(np.abs(yt))))
            q = _find_preimage(pi, y, s, tol)
            if q is None:
                continue
            if min(float(np.max(np.abs(q - f))) for f in found) < 1e-6:
                continue
            found.append(q)
        if len(found) < 2:
            unresolved += 1
        mats = []
        for q in found:
            J = pi.jacobian(q)
            mats.append(J @ B_M(q) @ J.T)
        scale = max(scale, _scale(*mats))
        for a, b in itertools.combinations(mats, 2):
            variation = max(variation, float(np.max(np.abs(a - b))))
        table.append({"target": [float(v) for v in y], "matrix": mats[0].tolist(),
                      "preimages": len(found)})
        tgt_list.append(y)
        mat_list.append(mats[0])
    if unresolved == len(base_pts):
        raise PreimageError("no second preimage found for any sampled target point")
    if unresolved:
        notes.append(f"{unresolved} target point(s) with a single preimage")
    projectable = variation <= PROJECTABLE_TOL * scale
    fitted, bivector = None, None
    if projectable:
        fitted = _fit_entries(np.array(tgt_list), np.array(mat_list), pi.target, scale)
        if fitted is not None:
            bivector = BivectorField.from_text(pi.target, fitted, name=f"push({pi.name})")
    return PushforwardReport(projectable, variation, scale, table, bivector, fitted,
                             unresolved, rank_ok, notes)


# --------------------------------------------------------------------------
# Leaf correspondence

@dataclass
class LeafReport:
    point: list[float]
    image_dim: int
    leaf_rank: int
    consistent: bool


def leaf_correspondence_check(d: DualPairDiagram, m: Sequence[float],
                              B1: BivectorField | None = None,
                              rank_tol: float = RANK_TOL) -> LeafReport:
    """Compare ``dim T pi1 (K2 + K2^omega)`` with ``rank B1`` at ``pi1(m)``.

    A necessary pointwise condition for leaf correspondence only.
    """
    B1 = B1 if B1 is not None else d.left.bivector
    if B1 is None:
        raise DiagnosticsError("left target bivector unavailable")
    m = np.asarray(m, dtype=float)
    K2 = nullspace(d.right.map.jacobian(m), rank_tol)
    try:
        K2w = symplectic_orthogonal(K2, d.bivector(m), NONDEGENERACY_TOL)
    except DegenerateBivectorError as exc:
        raise DiagnosticsError(f"total-space bivector degenerate at {m.tolist()}: {exc}") from None
    combined = column_span(np.hstack([K2.basis, K2w.basis]), rank_tol)
    J1 = d.left.map.jacobian(m)
    image = J1 @ combined.basis
    image_dim = numerical_rank(image, rank_tol) if image.size else 0
    leaf = numerical_rank(B1(d.left.map(m)), rank_tol)
    return LeafReport(m.tolist(), image_dim, leaf, image_dim == leaf)


def total_space_report(B: BivectorField, grid: SampleGrid):
    return validate_bivector(B, list(grid.sample(B.chart)))

