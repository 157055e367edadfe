"""Linear subspaces, annihilators and symplectic orthogonal complements.

Subspaces are stored by an orthonormal basis (columns).  Dual spaces are
identified with the ambient space through the coordinate basis, so the
annihilator of ``V`` is its Euclidean orthogonal complement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Subspace", "SubspaceComparison", "nullspace", "column_span", "annihilator",
    "symplectic_orthogonal", "symplectic_orthogonal_direct", "subspace_equal",
    "subspace_included", "complement_within", "numerical_rank",
    "DegenerateBivectorError", "RANK_TOL", "ANGLE_TOL",
]

RANK_TOL = 1e-9
ANGLE_TOL = 1e-7


class DegenerateBivectorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Subspace:
    """Span of the orthonormal columns of ``basis`` (shape ``(n, k)``)."""

    basis: np.ndarray
    tol: float = RANK_TOL

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-d array")
        if b.shape[1] > b.shape[0]:
            raise ValueError("more basis vectors than ambient dimension")
        object.__setattr__(self, "basis", b)

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient={self.ambient})"


def numerical_rank(A: np.ndarray, tol: float = RANK_TOL) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace(A: np.ndarray, tol: float = RANK_TOL) -> Subspace:
    """Right singular vectors with singular value <= ``tol * sigma_max``."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    n = A.shape[1]
    if A.shape[0] == 0 or not np.any(A):
        return Subspace(np.eye(n), tol)
    A = A[np.any(A != 0.0, axis=1)]
    # Tall matrices only need the thin factorization; vt is then n x n already.
    _, s, vt = np.linalg.svd(A, full_matrices=A.shape[0] < n)
    rank = int(np.sum(s > tol * s[0]))
    return Subspace(vt[rank:].T.copy(), tol)


def column_span(A: np.ndarray, tol: float = RANK_TOL) -> Subspace:
    """Orthonormal basis of the column space of ``A``."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, np.newaxis]
    n = A.shape[0]
    if A.shape[1] == 0 or not np.any(A):
        return Subspace(np.zeros((n, 0)), tol)
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > tol * s[0]))
    return Subspace(u[:, :rank].copy(), tol)


def annihilator(V: Subspace) -> Subspace:
    """Covectors killing ``V``, as a subspace of the coordinate dual."""
    n = V.ambient
    if V.dim == 0:
        return Subspace(np.eye(n), V.tol)
    if V.dim == n:
        return Subspace(np.zeros((n, 0)), V.tol)
    q, _ = np.linalg.qr(V.basis, mode="complete")
    return Subspace(q[:, V.dim:].copy(), V.tol)


def _check_nondegenerate(B: np.ndarray, tol: float) -> None:
    n = B.shape[0]
    scale = float(np.max(np.abs(B))) if B.size else 0.0
    det = abs(float(np.linalg.det(B)))
    if scale == 0.0 or not det > tol * scale ** n:
        raise DegenerateBivectorError(
            f"bivector is degenerate (|det| = {det:.3e}, scale = {scale:.3e})")


def symplectic_orthogonal(V: Subspace, B_at_m: np.ndarray,
                          nondeg_tol: float = 1e-9) -> Subspace:
    """``V^omega = B(V°)`` for a nondegenerate bivector matrix ``B``."""
    B = np.asarray(B_at_m, dtype=float)
    if B.shape != (V.ambient, V.ambient):
        raise ValueError("bivector shape does not match ambient dimension")
    _check_nondegenerate(B, nondeg_tol)
    ann = annihilator(V)
    if ann.dim == 0:
        return Subspace.zero(V.ambient)
    return column_span(B @ ann.basis, V.tol)


def symplectic_orthogonal_direct(V: Subspace, B_at_m: np.ndarray) -> Subspace:
    """``{w : omega(w, v) = 0 for v in V}`` with ``omega`` the inverse of ``B``."""
    B = np.asarray(B_at_m, dtype=float)
    _check_nondegenerate(B, 1e-9)
    if V.dim == 0:
        return Subspace.full(V.ambient)
    omega = np.linalg.inv(B)
    return nullspace((omega @ V.basis).T, V.tol)


@dataclass(frozen=True)
class SubspaceComparison:
    equal: bool
    max_angle: float
    dims: tuple[int, int]


def _max_angle_smaller_in_larger(V: Subspace, W: Subspace) -> float:
    small, large = (V, W) if V.dim <= W.dim else (W, V)
    if small.dim == 0:
        return 0.0
    if large.dim == 0:
        return math.pi / 2
    resid = small.basis - large.basis @ (large.basis.T @ small.basis)
    s = float(np.linalg.norm(resid, 2))
    return math.asin(min(1.0, s))


def subspace_equal(V: Subspace, W: Subspace, tol: float = ANGLE_TOL) -> SubspaceComparison:
    """Equal iff dimensions match and the largest principal angle is <= ``tol``.

    With unequal dimensions the reported angle is the largest principal angle
    of the smaller space relative to the larger one.
    """
    if V.ambient != W.ambient:
        raise ValueError(f"ambient dimension mismatch: {V.ambient} vs {W.ambient}")
    angle = _max_angle_smaller_in_larger(V, W)
    equal = V.dim == W.dim and angle <= tol
    return SubspaceComparison(equal, angle, (V.dim, W.dim))


def subspace_included(V: Subspace, W: Subspace, tol: float = ANGLE_TOL) -> tuple[bool, float]:
    """Is ``V`` contained in ``W``?  Returns (verdict, max angle of V to W)."""
    if V.ambient != W.ambient:
        raise ValueError(f"ambient dimension mismatch: {V.ambient} vs {W.ambient}")
    if V.dim == 0:
        return True, 0.0
    if W.dim == 0:
        return False, math.pi / 2
    resid = V.basis - W.basis @ (W.basis.T @ V.basis)
    angle = math.asin(min(1.0, float(np.linalg.norm(resid, 2))))
    return (V.dim <= W.dim and angle <= tol), angle


def complement_within(small: Subspace, large: Subspace, tol: float = ANGLE_TOL) -> Subspace:
    """Directions of ``large`` that stay away from ``small``.

    When ``small`` is contained in ``large`` this is the orthogonal complement
    of ``small`` inside ``large``; in general it is the part of ``large`` whose
    distance to ``small`` exceeds ``sin(tol)``.  The result always lies in
    ``large``.
    """
    if large.dim == 0:
        return Subspace.zero(large.ambient)
    resid = large.basis - small.basis @ (small.basis.T @ large.basis)
    _, s, vt = np.linalg.svd(resid, full_matrices=False)
    # Columns of `large` are orthonormal, so singular values are sines of angles.
    keep = vt[s > math.sin(tol)]
    return Subspace(large.basis @ keep.T, RANK_TOL)
