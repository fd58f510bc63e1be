"""Query/update contract shared by all cycle-toggle engines, plus the naive
reference engines used as correctness oracles.

Contract semantics, for the unique tree path between vertices u and v:

* ``query(u, v)`` returns ``(sum of r, sum of r*f)`` with flows signed
  positive in the u -> v traversal direction; queries never change semantics.
* ``update(u, v, delta)`` increments the flow of every path edge by delta in
  the u -> v direction.

Engines also expose ``toggle_cycles``, the solver hot loop: given off-edge
arrays and a preselected sample sequence, bring each sampled fundamental
cycle to its minimum-energy state, in order.
"""

from __future__ import annotations

import numpy as np

from .._accel import njit
from ..core import InputError, PathAggregate


class Toggler:
    """Abstract engine bound to one tree with fixed resistances and mutable flows."""

    n: int

    def query(self, u: int, v: int) -> PathAggregate:
        raise NotImplementedError

    def update(self, u: int, v: int, delta: float) -> None:
        raise NotImplementedError

    def snapshot_flows(self) -> np.ndarray:
        """Current per-edge tree flows with all pending lazy state flushed."""
        raise NotImplementedError

    def toggle_cycles(self, off_u, off_v, off_r, path_r, f_off, samples) -> None:
        """Toggle the sampled cycles in order (default: via query/update)."""
        for e in samples:
            u = int(off_u[e])
            v = int(off_v[e])
            agg = self.query(v, u)  # tree path traversed backward v -> u
            num = off_r[e] * f_off[e] + agg.sum_rf
            delta = -num / (off_r[e] + agg.sum_r)
            f_off[e] += delta
            self.update(v, u, delta)

    def _check_pair(self, u, v):
        if u == v:
            raise InputError("query/update need two distinct vertices")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise InputError(f"vertex out of range: ({u}, {v})")


class NaivePathToggler(Toggler):
    """O(path length) loop engine for path trees; the correctness oracle."""

    def __init__(self, tree_r, f_init):
        self.r = np.ascontiguousarray(tree_r, dtype=np.float64)
        self.f = np.array(f_init, dtype=np.float64)
        if self.f.shape != self.r.shape:
            raise InputError("flow array length mismatch")
        self.n = self.r.size + 1

    def query(self, u, v):
        self._check_pair(u, v)
        lo, hi = (u, v) if u < v else (v, u)
        sum_r, sum_rf = _span_sums(self.r, self.f, lo, hi)
        return PathAggregate(sum_r, sum_rf if u < v else -sum_rf)

    def update(self, u, v, delta):
        self._check_pair(u, v)
        if u < v:
            self.f[u:v] += delta
        else:
            self.f[v:u] -= delta

    def snapshot_flows(self):
        return self.f.copy()

    def toggle_cycles(self, off_u, off_v, off_r, path_r, f_off, samples):
        _toggle_naive_path(self.r, self.f, off_u, off_v, off_r, f_off, samples)


@njit(cache=True)
def _span_sums(r, f, lo, hi):
    sum_r = 0.0
    sum_rf = 0.0
    for i in range(lo, hi):
        sum_r += r[i]
        sum_rf += r[i] * f[i]
    return sum_r, sum_rf


@njit(cache=True)
def _toggle_naive_path(r, f, off_u, off_v, off_r, f_off, samples):
    for k in range(samples.shape[0]):
        e = samples[k]
        lo = off_u[e]
        hi = off_v[e]
        sum_r = off_r[e]
        num = off_r[e] * f_off[e]
        for i in range(lo, hi):
            sum_r += r[i]
            num -= r[i] * f[i]
        delta = -num / sum_r
        f_off[e] += delta
        for i in range(lo, hi):
            f[i] -= delta


class NaiveTreeToggler(Toggler):
    """Parent-pointer walking engine for general rooted trees (oracle)."""

    def __init__(self, parent, tree_r, f_init, depth=None):
        self.parent = np.ascontiguousarray(parent, dtype=np.int64)
        self.r = np.ascontiguousarray(tree_r, dtype=np.float64)
        self.f = np.array(f_init, dtype=np.float64)
        self.n = self.parent.size
        if self.r.shape != (self.n - 1,) or self.f.shape != (self.n - 1,):
            raise InputError("edge array length mismatch")
        if depth is None:
            depth = np.zeros(self.n, dtype=np.int64)
            for v in range(1, self.n):
                depth[v] = depth[self.parent[v]] + 1
        self.depth = depth

    def query(self, u, v):
        self._check_pair(u, v)
        sum_r, sum_rf = _walk_sums(self.parent, self.depth, self.r, self.f, u, v)
        return PathAggregate(sum_r, sum_rf)

    def update(self, u, v, delta):
        self._check_pair(u, v)
        _walk_add(self.parent, self.depth, self.f, u, v, delta)

    def snapshot_flows(self):
        return self.f.copy()

    def lca(self, u, v):
        a, b = u, v
        depth = self.depth
        parent = self.parent
        while a != b:
            if depth[a] >= depth[b]:
                a = parent[a]
            else:
                b = parent[b]
        return a

    def toggle_cycles(self, off_u, off_v, off_r, path_r, f_off, samples):
        _toggle_naive_tree(
            self.parent, self.depth, self.r, self.f, off_u, off_v, off_r, f_off, samples
        )


@njit(cache=True)
def _walk_sums(parent, depth, r, f, a, b):
    # edges climbed from the a side are traversed against parent->child
    sum_r = 0.0
    sum_rf = 0.0
    while a != b:
        if depth[a] >= depth[b]:
            sum_r += r[a - 1]
            sum_rf -= r[a - 1] * f[a - 1]
            a = parent[a]
        else:
            sum_r += r[b - 1]
            sum_rf += r[b - 1] * f[b - 1]
            b = parent[b]
    return sum_r, sum_rf


@njit(cache=True)
def _walk_add(parent, depth, f, a, b, delta):
    while a != b:
        if depth[a] >= depth[b]:
            f[a - 1] -= delta
            a = parent[a]
        else:
            f[b - 1] += delta
            b = parent[b]


@njit(cache=True)
def _toggle_naive_tree(parent, depth, r, f, off_u, off_v, off_r, f_off, samples):
    for k in range(samples.shape[0]):
        e = samples[k]
        # cycle: off-edge forward u -> v, tree path backward v -> u
        a = off_v[e]
        b = off_u[e]
        sum_r = off_r[e]
        num = off_r[e] * f_off[e]
        while a != b:
            if depth[a] >= depth[b]:
                sum_r += r[a - 1]
                num -= r[a - 1] * f[a - 1]
                a = parent[a]
            else:
                sum_r += r[b - 1]
                num += r[b - 1] * f[b - 1]
                b = parent[b]
        delta = -num / sum_r
        f_off[e] += delta
        a = off_v[e]
        b = off_u[e]
        while a != b:
            if depth[a] >= depth[b]:
                f[a - 1] -= delta
                a = parent[a]
            else:
                f[b - 1] += delta
                b = parent[b]


def naive_toggler(graph, f_init) -> Toggler:
    """Build the reference engine matching the graph's tree type."""
    from ..core import GeneralTreeGraph, HeavyPathGraph

    if isinstance(graph, HeavyPathGraph):
        return NaivePathToggler(graph.tree_r, f_init)
    if isinstance(graph, GeneralTreeGraph):
        return NaiveTreeToggler(graph.parent, graph.tree_r, f_init, graph.depth)
    raise InputError(f"unsupported graph type {type(graph).__name__}")
