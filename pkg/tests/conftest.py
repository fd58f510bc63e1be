"""Shared oracles and fixtures.

The oracles here are deliberately independent of the package's fast paths:
dense matrix assembly, explicit edge loops, and pseudoinverse solves.  Tests
compare the real implementations against these.
"""

import numpy as np
import pytest

from cycletoggle.core import GeneralTreeGraph, HeavyPathGraph


def all_edges(g):
    """(u, v, r) triples for every edge, tree first, off-tree after."""
    if isinstance(g, HeavyPathGraph):
        tu = np.arange(g.n - 1)
        tv = tu + 1
    else:
        tv = np.arange(1, g.n)
        tu = g.parent[1:]
    edges = list(zip(tu.tolist(), tv.tolist(), g.tree_r.tolist()))
    if g.m_off:
        edges += list(zip(g.off_u.tolist(), g.off_v.tolist(), g.off_r.tolist()))
    return edges


def dense_laplacian(g) -> np.ndarray:
    """Assemble L entry by entry: weighted degrees on the diagonal, -w off it."""
    L = np.zeros((g.n, g.n))
    for u, v, r in all_edges(g):
        w = 1.0 / r
        L[u, u] += w
        L[v, v] += w
        L[u, v] -= w
        L[v, u] -= w
    return L


def dense_solve(g, b) -> np.ndarray:
    """Zero-mean solution of Lx = b via pseudoinverse (small graphs only)."""
    x = np.linalg.lstsq(dense_laplacian(g), np.asarray(b, dtype=float), rcond=None)[0]
    return x - x.mean()


def loop_path_aggregate(tree_r, f_tree, u, v):
    """Reference path query on a path tree: plain edge-by-edge loop."""
    sign = 1.0
    if u > v:
        u, v = v, u
        sign = -1.0
    sum_r = 0.0
    sum_rf = 0.0
    for i in range(u, v):
        sum_r += tree_r[i]
        sum_rf += tree_r[i] * f_tree[i]
    return sum_r, sign * sum_rf


def random_path_graph(rng, n, m_off=None):
    """Random heavy path graph with assigned off-edge resistances."""
    if m_off is None:
        m_off = max(1, n // 2)
    tree_r = rng.uniform(0.5, 10.0, n - 1)
    off = []
    for _ in range(m_off):
        u = int(rng.integers(0, n - 2))
        v = int(rng.integers(u + 2, n))
        off.append((u, v, float(rng.uniform(0.5, 50.0))))
    return HeavyPathGraph(tree_r, off)


def random_general_tree(rng, n, m_off=0):
    """Random rooted tree (random attachment) with optional off edges."""
    parent = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        parent[v] = int(rng.integers(0, v))
    tree_r = rng.uniform(0.5, 10.0, n - 1)
    off = []
    tries = 0
    while len(off) < m_off and tries < 100 * m_off:
        tries += 1
        a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
        u, v = min(a, b), max(a, b)
        if u == v or parent[v] == u or parent[u] == v:
            continue
        off.append((u, v, float(rng.uniform(0.5, 50.0))))
    return GeneralTreeGraph(parent, tree_r, off)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
