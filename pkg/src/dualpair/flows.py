"""Fixed-step RK4 integration of Hamiltonian flows and torus coverage probes."""
from __future__ import annotations

import itertools
import math
from array import array
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import expr as ex
from .manifold import BivectorField, ChartManifold, ScalarField, hamiltonian_vf_exprs

__all__ = ["FlowError", "Trajectory", "integrate_hamiltonian", "fiber_coverage_probe",
           "CoverageReport", "write_trajectory"]

TWO_PI = 2.0 * math.pi


class FlowError(RuntimeError):
    pass


@dataclass
class Trajectory:
    chart: ChartManifold
    dt: float
    times: np.ndarray
    points: np.ndarray  # periodic coordinates wrapped to [0, 2pi)
    unwrapped: np.ndarray
    hamiltonian: str
    drift: float
    params: dict = field(default_factory=dict)

    @property
    def windings(self) -> np.ndarray:
        """Number of full turns made by each periodic coordinate."""
        mask = self.chart.periodic_mask
        return np.floor(self.unwrapped[-1, mask] / TWO_PI).astype(int) - \
            np.floor(self.unwrapped[0, mask] / TWO_PI).astype(int)


def _rk4_source(field_exprs, names, consts) -> str:
    n = len(names)

    def stage(prefix, src):
        slots = {name: f"{src}{i}" for i, name in enumerate(names)}
        return [f"        {prefix}{i} = {ex._emit(e, slots, consts)}"
                for i, e in enumerate(field_exprs)]

    a = ", ".join(f"a{i}" for i in range(n))
    lines = ["def _run(y, h, nsteps, emit):",
             f"    {a}{',' if n == 1 else ''} = y",
             "    h2 = 0.5 * h",
             "    h6 = h / 6.0",
             "    for _ in range(nsteps):"]
    lines += stage("k1_", "a")
    lines += [f"        b{i} = a{i} + h2 * k1_{i}" for i in range(n)]
    lines += stage("k2_", "b")
    lines += [f"        c{i} = a{i} + h2 * k2_{i}" for i in range(n)]
    lines += stage("k3_", "c")
    lines += [f"        d{i} = a{i} + h * k3_{i}" for i in range(n)]
    lines += stage("k4_", "d")
    lines += [f"        a{i} = a{i} + h6 * (k1_{i} + 2.0 * k2_{i} + 2.0 * k3_{i} + k4_{i})"
              for i in range(n)]
    lines.append(f"        emit(({a}{',' if n == 1 else ''}))")
    lines.append(f"    return ({a}{',' if n == 1 else ''})")
    return "\n".join(lines)


def integrate_hamiltonian(h: ScalarField, B: BivectorField, start: Sequence[float],
                          T: float, dt: float) -> Trajectory:
    """Classical RK4 on ``X_h = B dh`` with a fixed step.

    The final step is shortened if ``T`` is not a multiple of ``dt``.  The
    largest deviation of ``h`` from its initial value is stored as ``drift``.
    """
    if not dt > 0:
        raise FlowError("time step must be positive")
    if not T >= dt:
        raise FlowError("duration must be at least one step")
    chart = h.chart
    if B.chart != chart:
        raise FlowError("chart mismatch between Hamiltonian and bivector")
    chart.check_point(start)
    params = {**B.params, **h.params}
    field_exprs = [ex.simplify(e) for e in hamiltonian_vf_exprs(h, B)]
    ns = dict(ex._COMPILE_NS)
    exec(_rk4_source(field_exprs, chart.names, params), ns)
    run = ns["_run"]

    nsteps = int(math.floor(T / dt + 1e-9))
    rest = T - nsteps * dt
    if rest <= 1e-12 * T:
        rest = 0.0
    buf = array("d", [float(v) for v in start])
    try:
        y = run(tuple(float(v) for v in start), dt, nsteps, buf.extend)
        if rest:
            run(y, rest, 1, buf.extend)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise FlowError(f"vector field evaluation failed along the trajectory: {exc}") from None
    n = chart.dim
    unwrapped = np.frombuffer(buf, dtype=float).reshape(-1, n).copy()
    times = np.arange(unwrapped.shape[0]) * dt
    if rest:
        times[-1] = T
    for j, c in enumerate(chart.coordinates):
        col = unwrapped[:, j]
        if not np.all(np.isfinite(col)):
            raise FlowError(f"trajectory diverged in coordinate {c.name!r}")
        if c.bounds is not None:
            bad = np.nonzero((col < c.bounds[0]) | (col > c.bounds[1]))[0]
            if bad.size:
                raise FlowError(f"trajectory leaves the bounds of {c.name!r} at t = {times[bad[0]]}")
    points = unwrapped.copy()
    mask = chart.periodic_mask
    points[:, mask] = np.mod(points[:, mask], TWO_PI)
    hv = ex.compile_vectorized([h.body], chart.names, h.params)(unwrapped)[:, 0]
    drift = float(np.max(np.abs(hv - hv[0])))
    return Trajectory(chart, dt, times, points, unwrapped, str(h), float(drift), params)


@dataclass
class CoverageReport:
    covered_fraction: float
    max_gap_fraction: float
    resolution: int
    cells: int


def fiber_coverage_probe(traj: Trajectory, fiber_coords: Sequence[str],
                         grid_resolution: int) -> CoverageReport:
    """Fraction of the ``N^k`` torus cells over ``fiber_coords`` visited by ``traj``.

    ``max_gap_fraction`` is the largest distance (in cells, periodic) from an
    unvisited cell to a visited one, divided by ``N``.
    """
    N = int(grid_resolution)
    if N < 1:
        raise FlowError("grid resolution must be positive")
    idx = [traj.chart.index(c) for c in fiber_coords]
    for c, i in zip(fiber_coords, idx):
        if not traj.chart.coordinates[i].periodic:
            raise FlowError(f"coordinate {c!r} is not periodic")
    k = len(idx)
    cells = np.floor(traj.points[:, idx] / TWO_PI * N).astype(int)
    np.clip(cells, 0, N - 1, out=cells)
    visited = np.zeros((N,) * k, dtype=bool)
    visited[tuple(cells.T)] = True
    covered = float(visited.sum()) / N ** k
    tiled = np.tile(~visited, (3,) * k)
    dist = ndimage.distance_transform_edt(tiled)
    centre = tuple(slice(N, 2 * N) for _ in range(k))
    gap = float(dist[centre].max()) / N
    return CoverageReport(covered, gap, N, N ** k)


def write_trajectory(traj: Trajectory, path, stride: int = 1) -> None:
    """Whitespace-separated samples with a ``#`` header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# chart {traj.chart.name} coordinates {' '.join(traj.chart.names)}\n")
        fh.write(f"# hamiltonian {traj.hamiltonian}\n")
        fh.write(f"# dt {traj.dt!r} samples {traj.points.shape[0]} drift {traj.drift!r}\n")
        if traj.params:
            fh.write("# parameters " + " ".join(f"{k}={v!r}" for k, v in
                                                sorted(traj.params.items())) + "\n")
        fh.write("# columns t " + " ".join(traj.chart.names) + "\n")
        for t, row in itertools.islice(zip(traj.times, traj.points), 0, None, stride):
            fh.write(" ".join(f"{v:.17g}" for v in (t, *row)) + "\n")
