import math
import time

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from dualpair.symplin import (ANGLE_TOL, DegenerateBivectorError, Subspace, annihilator,
                              column_span, complement_within, nullspace, numerical_rank,
                              subspace_equal, subspace_included, symplectic_orthogonal,
                              symplectic_orthogonal_direct)


def random_symplectic(rng, n):
    """Random nondegenerate antisymmetric matrix: S J S^T with S well conditioned."""
    k = n // 2
    J = np.block([[np.zeros((k, k)), np.eye(k)], [-np.eye(k), np.zeros((k, k))]])
    S = np.eye(n) + 0.3 * rng.normal(size=(n, n))
    return S @ J @ S.T


def random_subspace(rng, n, k):
    return column_span(rng.normal(size=(n, k)))


def run_suite(count=500, seed=0):
    rng = np.random.default_rng(seed)
    worst = {"dual": 0.0, "two_path": 0.0}
    for i in range(count):
        n = (2, 4, 6, 8, 10)[i % 5]
        B = random_symplectic(rng, n)
        V = random_subspace(rng, n, int(rng.integers(0, n + 1)))
        W = symplectic_orthogonal(V, B)
        assert V.dim + W.dim == n
        WW = symplectic_orthogonal(W, B)
        c = subspace_equal(WW, V)
        assert c.equal, (n, V.dim, c)
        worst["dual"] = max(worst["dual"], c.max_angle)
        c2 = subspace_equal(W, symplectic_orthogonal_direct(V, B))
        assert c2.equal
        worst["two_path"] = max(worst["two_path"], c2.max_angle)
    return worst


def test_symplectic_property_suite_500_spaces():
    t0 = time.perf_counter()
    worst = run_suite()
    assert time.perf_counter() - t0 < 5.0
    assert worst["dual"] <= 1e-7 and worst["two_path"] <= 1e-7


def test_lagrangian_subspace_is_its_own_orthogonal():
    J = np.array([[0.0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]])
    L = column_span(np.eye(4)[:, :2])
    assert subspace_equal(symplectic_orthogonal(L, J), L).equal


def test_degenerate_bivector_rejected():
    B = np.zeros((2, 2))
    with pytest.raises(DegenerateBivectorError):
        symplectic_orthogonal(Subspace.zero(2), B)
    with pytest.raises(DegenerateBivectorError):
        symplectic_orthogonal(Subspace.zero(3), np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 0.0]]))


# --------------------------------------------------------------------------
# basic linear algebra

def test_nullspace_against_scipy():
    rng = np.random.default_rng(4)
    for _ in range(50):
        m, n = rng.integers(1, 7, size=2)
        r = int(rng.integers(0, min(m, n) + 1))
        A = rng.normal(size=(m, r)) @ rng.normal(size=(r, n))
        N = nullspace(A)
        ref = scipy.linalg.null_space(A, rcond=1e-9)
        assert N.dim == ref.shape[1] == n - numerical_rank(A)
        if N.dim:
            assert np.max(np.abs(A @ N.basis)) <= 1e-9 * max(1.0, np.max(np.abs(A)))
            assert subspace_equal(N, Subspace(ref)).equal


def test_nullspace_of_tall_and_zero_matrices():
    assert nullspace(np.zeros((3, 4))).dim == 4
    tall = np.vstack([np.eye(3)[:2]] * 50)
    assert nullspace(tall).dim == 1


def test_annihilator_is_orthogonal_complement():
    V = column_span(np.array([[1.0, 0], [1, 1], [0, 1]]))
    A = annihilator(V)
    assert A.dim == 1
    assert np.allclose(A.basis.T @ V.basis, 0)


def test_principal_angle_against_scipy():
    rng = np.random.default_rng(8)
    for _ in range(40):
        V = random_subspace(rng, 6, 2)
        W = random_subspace(rng, 6, 3)
        ours = subspace_equal(V, W).max_angle
        theirs = float(np.max(scipy.linalg.subspace_angles(V.basis, W.basis)))
        assert ours == pytest.approx(theirs, abs=1e-10)


def test_small_perturbation_within_tolerance():
    e = np.eye(3)
    V = column_span(e[:, :1])
    assert subspace_equal(V, column_span((e[:, 0] + 1e-9 * e[:, 1])[:, None])).equal
    assert not subspace_equal(V, column_span((e[:, 0] + 1e-5 * e[:, 1])[:, None])).equal
    assert not subspace_equal(V, column_span(e[:, :2])).equal


def test_inclusion_and_complement():
    e = np.eye(4)
    small = column_span(e[:, :1])
    large = column_span(e[:, :3])
    ok, angle = subspace_included(small, large)
    assert ok and angle == 0.0
    assert not subspace_included(large, small)[0]
    C = complement_within(small, large)
    assert C.dim == 2
    assert subspace_included(C, large)[0]
    assert np.allclose(C.basis.T @ small.basis, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([2, 4, 6]))
def test_orthogonal_complement_reverses_inclusion(seed, n):
    rng = np.random.default_rng(seed)
    B = random_symplectic(rng, n)
    k = int(rng.integers(1, n))
    W = random_subspace(rng, n, k)
    V = column_span(W.basis[:, : max(1, k - 1)])
    assert subspace_included(V, W, ANGLE_TOL)[0]
    # V subset W implies W^omega subset V^omega
    assert subspace_included(symplectic_orthogonal(W, B), symplectic_orthogonal(V, B))[0]


def test_angle_is_a_right_angle_for_orthogonal_lines():
    e = np.eye(2)
    c = subspace_equal(column_span(e[:, :1]), column_span(e[:, 1:]))
    assert c.max_angle == pytest.approx(math.pi / 2)
