import math

import numpy as np
import pytest

from dualpair.config import corpus_get, corpus_list
from dualpair.manifold import (BivectorField, ChartManifold, Coordinate, ManifoldError,
                               ScalarField, SmoothMap, bracket_field, hamiltonian_vf, jacobiator,
                               poisson_bracket, validate_bivector)

R3 = ChartManifold("R3", (Coordinate("m1"), Coordinate("m2"), Coordinate("m3")))
T2 = ChartManifold("T2", (Coordinate("th1", True), Coordinate("th2", True)))
S1 = ChartManifold("S1", (Coordinate("psi", True),))
R2 = ChartManifold("R2", (Coordinate("x"), Coordinate("y")))

SO3 = BivectorField.from_upper(R3, {(0, 1): "m3", (0, 2): "-m2", (1, 2): "m1"}, name="so3")
# so(3)* plus eps*m2 in the first component of the bracket vector; violates Jacobi
PERTURBED = BivectorField.from_upper(R3, {(0, 1): "m3", (0, 2): "-m2", (1, 2): "m1 + 0.1*m2"})


def field(chart, text, params=None):
    return ScalarField.from_text(chart, text, params)


def test_chart_rejects_duplicates_and_reserved_names():
    with pytest.raises(ManifoldError):
        ChartManifold("bad", (Coordinate("x"), Coordinate("x")))
    with pytest.raises(ManifoldError):
        ChartManifold("bad", (Coordinate("pi"),))
    with pytest.raises(ManifoldError):
        Coordinate("t", periodic=True, bounds=(0.0, 1.0))


def test_wrap_and_contains():
    bounded = ChartManifold("half", (Coordinate("r", bounds=(0.0, 1.0)), Coordinate("a", True)))
    assert bounded.contains([0.5, 100.0])
    assert not bounded.contains([1.5, 0.0])
    assert bounded.wrap([0.5, -0.5])[1] == pytest.approx(2 * math.pi - 0.5)


# --------------------------------------------------------------------------
# torus well-definedness

def test_scalar_on_torus_requires_trig_with_integer_winding():
    field(T2, "sin(th1) + cos(2*th1 - 3*th2)")
    with pytest.raises(ManifoldError, match="outside sin/cos"):
        field(T2, "th1")
    with pytest.raises(ManifoldError):
        field(T2, "sin(th1/2)")


def test_map_onto_circle_needs_integer_winding():
    SmoothMap.from_text(T2, S1, ["2*th1 - th2"])
    with pytest.raises(ManifoldError, match="non-integer winding"):
        SmoothMap.from_text(T2, S1, ["th1/2"])
    with pytest.raises(ManifoldError, match="non-integer winding"):
        SmoothMap.from_text(R2, S1, ["x"])


def test_bivector_antisymmetry_is_checked_syntactically():
    with pytest.raises(ManifoldError, match=r"antisymmetry violated at \(1,0\)"):
        BivectorField.from_text(R2, [["0", "1"], ["1", "0"]])
    with pytest.raises(ManifoldError, match=r"\(0,0\)"):
        BivectorField.from_text(R2, [["1", "1"], ["-1", "0"]])
    BivectorField.from_text(R2, [["0", "x*y"], ["-(x*y)", "0"]])


def test_unknown_names_reported():
    with pytest.raises(ManifoldError, match="unknown names"):
        field(R2, "x + w")


# --------------------------------------------------------------------------
# brackets and Hamiltonian fields

def test_coordinate_brackets_of_so3():
    m = [0.3, -1.2, 0.7]
    f1, f2, f3 = (field(R3, n) for n in ("m1", "m2", "m3"))
    assert poisson_bracket(f1, f2, SO3)(m) == pytest.approx(m[2])
    assert poisson_bracket(f2, f3, SO3)(m) == pytest.approx(m[0])
    assert poisson_bracket(f3, f1, SO3)(m) == pytest.approx(m[1])


def test_symbolic_bracket_field_matches_pointwise_bracket():
    f = field(R3, "m1*m2 + sin(m3)")
    g = field(R3, "exp(m1) - m2^2*m3")
    br = bracket_field(f, g, SO3)
    rng = np.random.default_rng(1)
    for _ in range(10):
        m = rng.uniform(-1, 1, 3)
        assert br(m) == pytest.approx(poisson_bracket(f, g, SO3)(m), rel=1e-12, abs=1e-14)


def test_hamiltonian_field_is_B_dh():
    B = BivectorField.from_text(R2, [["0", "1"], ["-1", "0"]])
    h = field(R2, "(x^2 + y^2)/2")
    X = hamiltonian_vf(h, B)
    assert np.allclose(X([1.0, 2.0]).components, [2.0, -1.0])


def test_casimir_of_so3():
    casimir = field(R3, "m1^2 + m2^2 + m3^2")
    g = field(R3, "m1*m3 + m2")
    assert poisson_bracket(casimir, g, SO3)([0.4, 0.9, -0.2]) == pytest.approx(0.0, abs=1e-14)


# --------------------------------------------------------------------------
# Jacobi identity

def _test_functions(chart):
    parts = []
    for c in chart.coordinates:
        parts.append((f"sin({c.name})", f"cos(2*{c.name})") if c.periodic
                     else (c.name, f"{c.name}^2"))
    names = [p[0] for p in parts]
    squares = [p[1] for p in parts]
    f = " + ".join(f"{a}*{b}" for a, b in zip(names, squares[1:] + squares[:1]))
    g = " + ".join(names)
    h = " * ".join(squares[:2]) + " - " + names[-1]
    return [field(chart, t) for t in (f, g, h)]


def test_jacobiator_vanishes_for_so3():
    rng = np.random.default_rng(5)
    fs = [field(R3, t) for t in ("m1*m2", "m3^2 + m1", "sin(m2)*m3")]
    for _ in range(20):
        m = rng.uniform(-2, 2, 3)
        assert abs(jacobiator(SO3, *fs, m)) <= 1e-9


def test_jacobiator_detects_perturbed_tensor():
    fs = [field(R3, n) for n in ("m1", "m2", "m3")]
    worst = max(abs(jacobiator(PERTURBED, *fs, m)) for m in
                ([0.0, 0.0, 1.0], [0.5, -0.3, 2.0], [1.0, 1.0, 1.0]))
    assert worst > 1e-3


@pytest.mark.parametrize("name", corpus_list())
def test_jacobiator_vanishes_for_corpus_bivectors(name):
    cfg = corpus_get(name)
    rng = np.random.default_rng(3)
    for B in cfg.bivectors.values():
        if not B.is_constant:
            continue
        fs = _test_functions(B.chart)
        for _ in range(5):
            m = np.array([rng.uniform(0, 2 * math.pi) if c.periodic else rng.uniform(-1, 1)
                          for c in B.chart.coordinates])
            assert abs(jacobiator(B, *fs, m)) <= 1e-9


# --------------------------------------------------------------------------
# Jacobians

def _fd_jacobian(f, m, h=1e-5):
    cols = []
    for j in range(len(m)):
        step = np.zeros(len(m))
        step[j] = h
        cols.append((f(m + step) - f(m - step)) / (2 * h))
    return np.column_stack(cols)


@pytest.mark.parametrize("name", corpus_list())
def test_symbolic_jacobians_match_finite_differences_on_corpus(name):
    cfg = corpus_get(name)
    rng = np.random.default_rng(9)
    for pi in cfg.maps.values():
        for _ in range(10):
            m = np.array([rng.uniform(0, 2 * math.pi) if c.periodic else rng.uniform(-1, 1)
                          for c in pi.source.coordinates])
            J = pi.jacobian(m)
            fd = _fd_jacobian(pi, m)
            assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


# --------------------------------------------------------------------------
# validation

def test_validate_bivector_reports_degenerate_points():
    B = BivectorField.from_text(R2, [["0", "x"], ["-x", "0"]])
    rep = validate_bivector(B, [[1.0, 0.0], [0.0, 0.0]])
    assert rep.antisymmetric
    assert not rep.nondegenerate
    assert rep.worst_point == (0.0, 0.0)
    assert validate_bivector(B, [[1.0, 0.0], [-2.0, 3.0]]).nondegenerate
