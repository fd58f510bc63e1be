"""O(log n) path-tree engine: static perfectly balanced binary tree over the
path edges, stored in heap order, with (sum r, sum r*f) fields and lazy flow
tags.

The edge count is padded to the next power of two with zero-resistance
phantom edges; those are inert in every aggregate and carry zero flow
forever, which keeps parent/child navigation pure index arithmetic.  A lazy
tag at a node is a pending flow increment for its whole subtree, already
reflected in the node's own sum but not in its descendants'; tags are pushed
down iteratively on the descent of both queries and updates, and sums are
rebuilt on the way back up.
"""

from __future__ import annotations

import numpy as np

from .._accel import njit
from ..core import InputError, PathAggregate
from .base import Toggler


class PathBstToggler(Toggler):
    """Balanced-BST engine for path trees; all hot paths are flat-array kernels."""

    def __init__(self, tree_r, f_init):
        tree_r = np.ascontiguousarray(tree_r, dtype=np.float64)
        f_init = np.ascontiguousarray(f_init, dtype=np.float64)
        if tree_r.size == 0:
            raise InputError("path must have at least one edge")
        if f_init.shape != tree_r.shape:
            raise InputError("flow array length mismatch")
        self.n = tree_r.size + 1
        self.m_edges = tree_r.size
        size = 1 << max(0, (tree_r.size - 1)).bit_length()
        self.size = size
        self.log = size.bit_length() - 1
        self.d_r = np.zeros(2 * size)
        self.d_rf = np.zeros(2 * size)
        self.lazy = np.zeros(size)
        self.d_r[size : size + tree_r.size] = tree_r
        self.d_rf[size : size + tree_r.size] = tree_r * f_init
        _pull_all(self.d_r, size)
        _pull_all(self.d_rf, size)
        # instrumentation: cumulative node visits, per-op canonical piece count
        self.ops = 0
        self.nodes_visited = 0
        self.last_pieces = 0

    def _interval(self, u, v):
        self._check_pair(u, v)
        return (u, v, 1.0) if u < v else (v, u, -1.0)

    def query(self, u, v):
        lo, hi, sign = self._interval(u, v)
        sum_r, sum_rf, pieces, nodes = _query(
            self.d_r, self.d_rf, self.lazy, self.size, self.log, lo, hi
        )
        self.ops += 1
        self.nodes_visited += nodes
        self.last_pieces = pieces
        return PathAggregate(sum_r, sign * sum_rf)

    def update(self, u, v, delta):
        lo, hi, sign = self._interval(u, v)
        nodes = _update(self.d_r, self.d_rf, self.lazy, self.size, self.log, lo, hi, sign * delta)
        self.ops += 1
        self.nodes_visited += nodes

    def snapshot_flows(self):
        _flush_all(self.d_r, self.d_rf, self.lazy, self.size)
        leaves_rf = self.d_rf[self.size : self.size + self.m_edges]
        leaves_r = self.d_r[self.size : self.size + self.m_edges]
        return leaves_rf / leaves_r

    def toggle_cycles(self, off_u, off_v, off_r, path_r, f_off, samples):
        _toggle_bst(
            self.d_r, self.d_rf, self.lazy, self.size, self.log,
            off_u, off_v, off_r, path_r, f_off, samples,
        )

    def check_structure(self, rtol=1e-12):
        """Flush all tags and verify every stored sum bottom-up (test hook)."""
        _flush_all(self.d_r, self.d_rf, self.lazy, self.size)
        assert np.all(self.lazy == 0.0)
        for i in range(self.size - 1, 0, -1):
            for d in (self.d_r, self.d_rf):
                expect = d[2 * i] + d[2 * i + 1]
                assert abs(d[i] - expect) <= rtol * max(abs(expect), 1.0)


@njit(cache=True)
def _pull_all(d, size):
    for i in range(size - 1, 0, -1):
        d[i] = d[2 * i] + d[2 * i + 1]


@njit(cache=True)
def _apply(d_r, d_rf, lazy, size, i, t):
    d_rf[i] += t * d_r[i]
    if i < size:
        lazy[i] += t


@njit(cache=True)
def _push(d_r, d_rf, lazy, size, i):
    t = lazy[i]
    if t != 0.0:
        _apply(d_r, d_rf, lazy, size, 2 * i, t)
        _apply(d_r, d_rf, lazy, size, 2 * i + 1, t)
        lazy[i] = 0.0


@njit(cache=True)
def _flush_all(d_r, d_rf, lazy, size):
    for i in range(1, size):
        _push(d_r, d_rf, lazy, size, i)


@njit(cache=True)
def _query(d_r, d_rf, lazy, size, log, l, r):
    l += size
    r += size
    nodes = 0
    for i in range(log, 0, -1):
        if ((l >> i) << i) != l:
            _push(d_r, d_rf, lazy, size, l >> i)
            nodes += 1
        if ((r >> i) << i) != r:
            _push(d_r, d_rf, lazy, size, (r - 1) >> i)
            nodes += 1
    sum_r = 0.0
    sum_rf = 0.0
    pieces = 0
    while l < r:
        if l & 1:
            sum_r += d_r[l]
            sum_rf += d_rf[l]
            l += 1
            pieces += 1
        if r & 1:
            r -= 1
            sum_r += d_r[r]
            sum_rf += d_rf[r]
            pieces += 1
        l >>= 1
        r >>= 1
        nodes += 1
    return sum_r, sum_rf, pieces, nodes


@njit(cache=True)
def _update(d_r, d_rf, lazy, size, log, l, r, delta):
    l += size
    r += size
    nodes = 0
    for i in range(log, 0, -1):
        if ((l >> i) << i) != l:
            _push(d_r, d_rf, lazy, size, l >> i)
            nodes += 1
        if ((r >> i) << i) != r:
            _push(d_r, d_rf, lazy, size, (r - 1) >> i)
            nodes += 1
    l2 = l
    r2 = r
    while l2 < r2:
        if l2 & 1:
            _apply(d_r, d_rf, lazy, size, l2, delta)
            l2 += 1
        if r2 & 1:
            r2 -= 1
            _apply(d_r, d_rf, lazy, size, r2, delta)
        l2 >>= 1
        r2 >>= 1
        nodes += 1
    for i in range(1, log + 1):
        if ((l >> i) << i) != l:
            k = l >> i
            d_rf[k] = d_rf[2 * k] + d_rf[2 * k + 1]
            nodes += 1
        if ((r >> i) << i) != r:
            k = (r - 1) >> i
            d_rf[k] = d_rf[2 * k] + d_rf[2 * k + 1]
            nodes += 1
    return nodes


@njit(cache=True)
def _toggle_bst(d_r, d_rf, lazy, size, log, off_u, off_v, off_r, path_r, f_off, samples):
    for k in range(samples.shape[0]):
        e = samples[k]
        sum_r, sum_rf, _, _ = _query(d_r, d_rf, lazy, size, log, off_u[e], off_v[e])
        num = off_r[e] * f_off[e] - sum_rf
        delta = -num / (off_r[e] + path_r[e])
        f_off[e] += delta
        _update(d_r, d_rf, lazy, size, log, off_u[e], off_v[e], -delta)
