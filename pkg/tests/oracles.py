"""Brute-force centralizer dimensions by collocation.

Independent of the package: basis functions are evaluated with hand-written
gradients, brackets are sampled at random points, and the centralizer
dimension is the kernel dimension of the dense collocation matrix.
"""
import itertools

import numpy as np


def _factor_funcs(kind, order):
    """1-d factors as (value, derivative) callables."""
    out = [(lambda t: np.ones_like(t), lambda t: np.zeros_like(t))]
    if kind == "periodic":
        for k in range(1, order + 1):
            out.append((lambda t, k=k: np.cos(k * t), lambda t, k=k: -k * np.sin(k * t)))
            out.append((lambda t, k=k: np.sin(k * t), lambda t, k=k: k * np.cos(k * t)))
    else:
        for d in range(1, order + 1):
            out.append((lambda t, d=d: t ** d, lambda t, d=d: d * t ** (d - 1)))
    return out


def tensor_basis(kinds, orders, total_degree=None):
    """List of factor-index tuples plus the factor tables."""
    tables = [_factor_funcs(k, o) for k, o in zip(kinds, orders)]
    combos = []
    for idx in itertools.product(*(range(len(t)) for t in tables)):
        if total_degree is not None:
            deg = sum(i for i, k in zip(idx, kinds) if k != "periodic")
            if deg > total_degree:
                continue
        combos.append(idx)
    return tables, combos


def gradients(tables, combos, pts):
    """Array (npoints, nbasis, dim) of basis gradients."""
    npts, dim = pts.shape
    vals = [[f(pts[:, j]) for f, _ in tables[j]] for j in range(dim)]
    ders = [[g(pts[:, j]) for _, g in tables[j]] for j in range(dim)]
    G = np.zeros((npts, len(combos), dim))
    for b, idx in enumerate(combos):
        for j in range(dim):
            term = ders[j][idx[j]].copy()
            for i in range(dim):
                if i != j:
                    term = term * vals[i][idx[i]]
            G[:, b, j] = term
    return G


def centralizer_dim(kinds, orders, B, generator_grads, npts, seed=0, total_degree=None,
                    window=1.0, tol=1e-9):
    """Dimension of ``{c in window : {c, g} = 0 for all generators g}``."""
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(0, 2 * np.pi, npts) if k == "periodic"
                           else rng.uniform(-window, window, npts) for k in kinds])
    tables, combos = tensor_basis(kinds, orders, total_degree)
    G = gradients(tables, combos, pts)
    rows = []
    for grad_g in generator_grads:
        dg = grad_g(pts)  # (npts, dim)
        Bdg = np.einsum("ij,pj->pi", B, dg)
        rows.append(np.einsum("pbi,pi->pb", G, Bdg))
    A = np.vstack(rows)
    A = A / np.max(np.abs(A))
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return len(combos) - rank, len(combos)
