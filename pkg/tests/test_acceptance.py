"""Acceptance criteria; each test prints one PASS/FAIL line.

Under pytest the lines are repeated in the terminal summary (see conftest);
running this file with python3 prints them directly.
"""
import math
import random
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from dualpair import expr as ex  # noqa: E402
from dualpair.config import corpus_document, corpus_get, corpus_list, load_config  # noqa: E402
from dualpair.flows import fiber_coverage_probe, integrate_hamiltonian  # noqa: E402
from dualpair.funcspace import BasisSpec, build_basis, centralizer, leg_generators  # noqa: E402
from dualpair.manifold import (BivectorField, ChartManifold, Coordinate, ScalarField,  # noqa: E402
                               jacobiator)
from dualpair.report import canonical_json, run_plan  # noqa: E402

from exprgen import corpus as expr_corpus  # noqa: E402
from oracles import centralizer_dim  # noqa: E402
from test_manifold import _test_functions  # noqa: E402
from test_symplin import run_suite  # noqa: E402


LINES: list[str] = []  # echoed in the terminal summary by conftest


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, detail


@lru_cache(maxsize=None)
def baseline():
    t0 = time.perf_counter()
    reports = {name: run_plan(corpus_get(name)) for name in corpus_list()}
    return reports, time.perf_counter() - t0


def blocks(r):
    return {b["check"]: b for b in r["checks"]}


# --------------------------------------------------------------------------

def test_criterion_1_corpus_verdict_matrix():
    reports, elapsed = baseline()
    problems = []

    def need(cond, what):
        if not cond:
            problems.append(what)

    g = blocks(reports["giacobbe_torus"])
    need(g["lw_scan"]["points"] == g["lw_scan"]["passed"] == 49, "giacobbe LW at 49 points")
    bad = g["howe"]["inclusions"]["F1c_in_F2"]
    need(not bad["holds"] and bad["witnesses"][0] in ("cos(th1)", "sin(th1)"),
         "giacobbe Howe witness")
    need(g["howe"]["truncation"]["space"]["max_frequency"] == 4, "giacobbe K=4")

    k = blocks(reports["kronecker_t3r"])
    need(k["lw_scan"]["passed"] == 0 and k["lw_scan"]["points"] > 0, "kronecker LW fails everywhere")
    need({(c["dim_K1_omega"], c["dim_K2"]) for c in k["lw_scan"]["dimension_classes"]} == {(1, 3)},
         "kronecker dims 1 vs 3")
    need(k["howe"]["verdict"] == "pass", "kronecker Howe-consistent")
    need(k["dimension"]["verdict"] == "fail", "kronecker dimension check")

    u = blocks(reports["u2_momentum_r4"])
    need(set(u["rank_scan"]["legs"]["left"]["histogram"]) == {"0", "1"}, "u2 ranks {0,1}")
    need([0.0] * 4 in [p["point"] for p in u["lw_scan"]["failing_points"]], "u2 LW fails at origin")
    need(u["howe"]["verdict"] == "pass"
         and all(i["holds"] for i in u["howe"]["inclusions"].values()), "u2 Howe both directions")

    t = blocks(reports["t5r_block"])
    left = t["pushforward"]["legs"]["left"]
    need(left["projectable"] and left["rank_at_sample"] == 2, "t5r rank-2 pushforward")
    need({(c["image_dim"], c["leaf_rank"]) for c in t["leaf"]["classes"]} == {(3, 2)},
         "t5r leaf 3 vs 2")

    r = blocks(reports["r4_split_symplectic"])
    need(all(b["verdict"] == "pass" for b in r.values()), "split plane all checks pass")
    need(reports["r4_split_symplectic"]["classification"] == "LW+Howe-consistent",
         "split plane classification")
    need(elapsed < 30.0, f"corpus runtime {elapsed:.1f}s")
    report(1, not problems, f"corpus matrix in {elapsed:.1f}s" if not problems
           else "; ".join(problems))


def test_criterion_2_centralizer_dimensions_match_oracle():
    results = []
    cfg = corpus_get("giacobbe_torus")
    B = cfg.diagram.bivector
    ours = centralizer(build_basis(B.chart, BasisSpec(max_frequency=4)),
                       leg_generators(cfg.maps["pi1"]), B).dim
    zero = lambda p: np.zeros(len(p))  # noqa: E731
    oracle, _ = centralizer_dim(["periodic"] * 2, [4, 4], B([0, 0]),
                                [lambda p: np.column_stack([-np.sin(p[:, 0]), zero(p)]),
                                 lambda p: np.column_stack([np.cos(p[:, 0]), zero(p)])], npts=400)
    results.append(("giacobbe", ours, oracle, 9))

    cfg = corpus_get("kronecker_t3r")
    B = cfg.diagram.bivector
    ours = centralizer(build_basis(B.chart, BasisSpec(max_frequency=2, max_degree=3)),
                       leg_generators(cfg.maps["pi"]), B).dim
    oracle, _ = centralizer_dim(
        ["periodic"] * 3 + ["linear"], [2, 2, 2, 3], B([0, 0, 0, 0]),
        [lambda p: np.column_stack([np.zeros(len(p))] * 3 + [np.ones(len(p))])], npts=1500)
    results.append(("kronecker", ours, oracle, 4))

    cfg = corpus_get("u2_momentum_r4")
    B = cfg.diagram.bivector
    ours = centralizer(build_basis(B.chart, BasisSpec(total_degree=4)),
                       leg_generators(cfg.maps["pi1"]), B).dim
    oracle, _ = centralizer_dim(
        ["linear"] * 4, [4] * 4, B([0, 0, 0, 0]),
        [lambda p: np.column_stack([p[:, 2], p[:, 3], p[:, 0], p[:, 1]])], npts=400,
        total_degree=4)
    results.append(("u2", ours, oracle, 14))

    ok = all(a == b == c for _, a, b, c in results)
    report(2, ok, ", ".join(f"{n} {a}/{b}" for n, a, b, _ in results))


def test_criterion_3_symplin_property_suite():
    t0 = time.perf_counter()
    worst = run_suite(500)
    elapsed = time.perf_counter() - t0
    ok = worst["dual"] <= 1e-7 and worst["two_path"] <= 1e-7 and elapsed < 5.0
    report(3, ok, f"500 spaces, worst angles {worst['dual']:.1e}/{worst['two_path']:.1e}, "
                  f"{elapsed:.2f}s")


def _fd_jacobian(f, m, h=1e-5):
    cols = []
    for j in range(len(m)):
        step = np.zeros(len(m))
        step[j] = h
        cols.append((f(m + step) - f(m - step)) / (2 * h))
    return np.column_stack(cols)


def _richardson(f, p, i, h=1e-3):
    def central(step):
        hi, lo = list(p), list(p)
        hi[i] += step
        lo[i] -= step
        return (f(hi)[0] - f(lo)[0]) / (2 * step)
    return (4 * central(h / 2) - central(h)) / 3


def test_criterion_4_numerical_calculus():
    rng = np.random.default_rng(9)
    worst_map = 0.0
    for name in corpus_list():
        for pi in corpus_get(name).maps.values():
            for _ in range(10):
                m = np.array([rng.uniform(0, 2 * math.pi) if c.periodic else rng.uniform(-1, 1)
                              for c in pi.source.coordinates])
                J = pi.jacobian(m)
                worst_map = max(worst_map, np.max(np.abs(J - _fd_jacobian(pi, m)))
                                / max(1.0, np.max(np.abs(J))))

    prng = random.Random(11)
    names = ("x", "y", "z")
    worst_expr = 0.0
    for text in expr_corpus(200, seed=777):
        e = ex.parse(text)
        f = ex.compile_exprs([e], names)
        grads = ex.compile_exprs([ex.diff(e, v) for v in names], names)
        p = [prng.uniform(-1.0, 1.0) for _ in names]
        g = grads(p)
        for i in range(3):
            worst_expr = max(worst_expr, abs(_richardson(f, p, i) - g[i]) / max(1.0, abs(g[i])))

    R3 = ChartManifold("R3", (Coordinate("m1"), Coordinate("m2"), Coordinate("m3")))
    so3 = BivectorField.from_upper(R3, {(0, 1): "m3", (0, 2): "-m2", (1, 2): "m1"})
    bad = BivectorField.from_upper(R3, {(0, 1): "m3", (0, 2): "-m2", (1, 2): "m1 + 0.1*m2"})
    coords = [ScalarField.from_text(R3, n) for n in ("m1", "m2", "m3")]
    fs = [ScalarField.from_text(R3, t) for t in ("m1*m2", "m3^2 + m1", "sin(m2)*m3")]
    pts = rng.uniform(-2, 2, (20, 3))
    worst_jac = max(abs(jacobiator(so3, *fs, m)) for m in pts)
    for name in corpus_list():
        for B in corpus_get(name).bivectors.values():
            if not B.is_constant:
                continue
            chart = B.chart
            tfs = _test_functions(chart)
            for _ in range(5):
                m = np.array([rng.uniform(0, 2 * math.pi) if c.periodic else rng.uniform(-1, 1)
                              for c in chart.coordinates])
                worst_jac = max(worst_jac, abs(jacobiator(B, *tfs, m)))
    detected = max(abs(jacobiator(bad, *coords, m)) for m in pts)

    ok = worst_map <= 1e-6 and worst_expr <= 1e-6 and worst_jac <= 1e-9 and detected > 1e-3
    report(4, ok, f"jacobian {worst_map:.1e}, diff {worst_expr:.1e}, jacobiator {worst_jac:.1e}, "
                  f"perturbed {detected:.2e}")


def _kronecker(lams):
    doc = corpus_document("kronecker_t3r")
    doc["parameters"] = [{"name": f"lam{i + 1}", "value": v} for i, v in enumerate(lams)]
    cfg = load_config(doc)
    h = ScalarField(cfg.charts["M"], cfg.maps["pi"].components[0], cfg.values)
    return h, cfg.diagram.bivector


def test_criterion_5_flow_suite():
    t0 = time.perf_counter()
    R2 = ChartManifold("R2", (Coordinate("x"), Coordinate("y")))
    J = BivectorField.from_text(R2, [["0", "1"], ["-1", "0"]])
    osc = ScalarField.from_text(R2, "(x^2 + y^2)/2")
    traj = integrate_hamiltonian(osc, J, [1.0, 0.0], 2 * math.pi, 0.01)
    closure = float(np.max(np.abs(traj.points[-1] - [1.0, 0.0])))

    h, B = _kronecker(["1", "sqrt(2)", "sqrt(3)"])
    drift = integrate_hamiltonian(h, B, [0, 0, 0, 0.5], 100.0, 0.01).drift
    dense = fiber_coverage_probe(integrate_hamiltonian(h, B, [0, 0, 0, 0], 5e4, 0.05),
                                 ["th1", "th2", "th3"], 10).covered_fraction
    h, B = _kronecker(["1", "1", "2"])
    closed = fiber_coverage_probe(integrate_hamiltonian(h, B, [0, 0, 0, 0], 5e4, 0.05),
                                  ["th1", "th2", "th3"], 10).covered_fraction
    elapsed = time.perf_counter() - t0
    ok = closure <= 1e-6 and drift <= 1e-10 and dense >= 0.99 and closed <= 0.15 and elapsed < 60
    report(5, ok, f"closure {closure:.1e}, drift {drift:.1e}, coverage {dense:.3f} vs "
                  f"{closed:.3f}, {elapsed:.1f}s")


def test_criterion_6_determinism_and_tolerance_sweep():
    reports, _ = baseline()
    identical = all(canonical_json(run_plan(corpus_get(n))) == canonical_json(reports[n])
                    for n in corpus_list())
    base = {n: (r["classification"], [b["verdict"] for b in r["checks"]])
            for n, r in reports.items()}
    unstable = []
    for tol in (1e-11, 1e-10, 1e-8, 1e-7):
        for n in corpus_list():
            r = run_plan(corpus_get(n), rank_tol=tol)
            if (r["classification"], [b["verdict"] for b in r["checks"]]) != base[n]:
                unstable.append(f"{n}@{tol:g}")
    ok = identical and not unstable
    report(6, ok, f"byte-identical {identical}, verdicts stable over 1e-11..1e-7"
                  + (f" except {unstable}" if unstable else ""))


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
