"""General-tree engine via heavy-light decomposition.

The tree (rooted at vertex 0) is decomposed into heavy chains and light
edges: each vertex's heavy child is the child with the largest subtree (ties
to the smallest vertex id).  Every root path crosses at most ceil(log2 n)
light edges and as many chains, so path operations split into per-chain
interval operations, delegated to the balanced-BST path engine, plus
individually-touched light edges stored as plain scalars.

Building also produces a virtual-tree certificate: per chain, the separator
vertex minimizing the maximum hanging-subtree size.  The certificate checks
that every separator splits its chain's subtree into components of at most
half its size, that every light-edge child subtree is at most half its
parent vertex's subtree, and that the resulting virtual height is
logarithmic.  Operations never consult it; it validates the decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._accel import njit
from ..core import InputError, InternalError, PathAggregate
from .base import Toggler
from .pathbst import _flush_all, _pull_all, _query, _update


@dataclass
class VirtualTreeInfo:
    """Per-chain separator decomposition summary (see module docstring)."""

    separator: np.ndarray  # separator vertex per chain
    node_size: np.ndarray  # subtree size of each chain's head
    chain_parent: np.ndarray  # parent chain id (-1 for the root chain)
    chain_depth: np.ndarray  # light edges crossed from the root, per chain
    height: int


class HldToggler(Toggler):
    """Heavy-light decomposition engine for general rooted trees."""

    def __init__(self, parent, tree_r, f_init, depth=None):
        parent = np.ascontiguousarray(parent, dtype=np.int64)
        tree_r = np.ascontiguousarray(tree_r, dtype=np.float64)
        f_init = np.ascontiguousarray(f_init, dtype=np.float64)
        n = parent.size
        if n < 2 or parent[0] != -1:
            raise InputError("need a rooted tree with parent[0] == -1")
        if tree_r.shape != (n - 1,) or f_init.shape != (n - 1,):
            raise InputError("edge array length mismatch")
        self.n = n
        self.parent = parent
        self.tree_r = tree_r
        if depth is None:
            depth = _depths(parent)
        self.depth = depth

        counts = np.bincount(parent[1:], minlength=n)
        child_off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=child_off[1:])
        child_list = np.argsort(parent[1:], kind="stable").astype(np.int64) + 1
        order = np.argsort(depth, kind="stable").astype(np.int64)
        self.size = _subtree_sizes(parent, order)
        self.heavy = _heavy_children(self.size, child_off, child_list)

        self.chain_of, self.pos, self.head, self.clen = _build_chains(parent, self.heavy)
        n_chains = self.head.size
        self.ce_off = np.zeros(n_chains + 1, dtype=np.int64)
        np.cumsum(self.clen, out=self.ce_off[1:])
        self.chain_edges = _chain_edge_ids(parent, self.chain_of, self.pos, self.ce_off)

        # per-chain BSTs laid out in one flat array; empty chains take no room
        self.sz = np.where(self.clen > 0, _next_pow2(self.clen), 0).astype(np.int64)
        self.lg = np.zeros(n_chains, dtype=np.int64)
        nz = self.sz > 0
        self.lg[nz] = np.log2(self.sz[nz]).astype(np.int64)
        self.d_off = np.zeros(n_chains + 1, dtype=np.int64)
        np.cumsum(2 * self.sz, out=self.d_off[1:])
        self.z_off = np.zeros(n_chains + 1, dtype=np.int64)
        np.cumsum(self.sz, out=self.z_off[1:])
        self.d_r = np.zeros(self.d_off[-1])
        self.d_rf = np.zeros(self.d_off[-1])
        self.lazy = np.zeros(self.z_off[-1])

        # light edge above each non-root chain head, stored as plain scalars
        self.light_r = np.zeros(n_chains)
        self.light_f = np.zeros(n_chains)
        _fill_leaves_and_lights(
            tree_r, f_init, self.head, self.clen, self.ce_off, self.chain_edges,
            self.sz, self.d_off, self.d_r, self.d_rf, self.light_r, self.light_f,
        )

        self.virtual_tree = self._build_certificate()

        self.ops = 0
        self.last_segments = 0

    # -- contract -----------------------------------------------------------

    def query(self, u, v):
        self._check_pair(u, v)
        sum_r, sum_rf, segs = _hld_query(
            self.parent, self.depth, self.chain_of, self.pos, self.head,
            self.light_r, self.light_f, self.d_r, self.d_rf, self.lazy,
            self.d_off, self.z_off, self.sz, self.lg, u, v,
        )
        self.ops += 1
        self.last_segments = segs
        return PathAggregate(sum_r, sum_rf)

    def update(self, u, v, delta):
        self._check_pair(u, v)
        segs = _hld_update(
            self.parent, self.depth, self.chain_of, self.pos, self.head,
            self.light_r, self.light_f, self.d_r, self.d_rf, self.lazy,
            self.d_off, self.z_off, self.sz, self.lg, u, v, delta,
        )
        self.ops += 1
        self.last_segments = segs

    def snapshot_flows(self):
        f = np.zeros(self.n - 1)
        _hld_snapshot(
            self.head, self.clen, self.ce_off, self.chain_edges, self.sz, self.lg,
            self.d_off, self.z_off, self.d_r, self.d_rf, self.lazy,
            self.light_f, f,
        )
        return f

    def lca(self, u, v):
        self._check_pair(u, v)
        return int(_hld_lca(self.parent, self.depth, self.chain_of, self.pos,
                            self.head, u, v))

    def toggle_cycles(self, off_u, off_v, off_r, path_r, f_off, samples):
        _toggle_hld(
            self.parent, self.depth, self.chain_of, self.pos, self.head,
            self.light_r, self.light_f, self.d_r, self.d_rf, self.lazy,
            self.d_off, self.z_off, self.sz, self.lg,
            off_u, off_v, off_r, f_off, samples,
        )

    # -- certificate ---------------------------------------------------------

    def _build_certificate(self) -> VirtualTreeInfo:
        n = self.n
        n_chains = self.head.size
        size = self.size
        heavy = self.heavy
        node_size = size[self.head]
        separator = np.empty(n_chains, dtype=np.int64)
        for c in range(n_chains):
            best_v = -1
            best = np.iinfo(np.int64).max
            w = self.head[c]
            top = node_size[c]
            while w != -1 and self.chain_of[w] == c:
                hang_above = top - size[w]
                hang_below = size[heavy[w]] if heavy[w] != -1 else 0
                worst = max(hang_above, hang_below)
                if worst < best:
                    best = worst
                    best_v = w
                w = heavy[w]
            separator[c] = best_v
            if 2 * best > top:
                raise InternalError(
                    f"chain {c}: no separator halves its subtree ({best} vs {top})"
                )
        chain_parent = np.full(n_chains, -1, dtype=np.int64)
        chain_depth = np.zeros(n_chains, dtype=np.int64)
        root_chain = self.chain_of[0]
        order = np.argsort(self.depth[self.head], kind="stable")
        for c in order:
            h = self.head[c]
            if h == 0:
                continue
            p = self.parent[h]
            if 2 * size[h] > size[p]:
                raise InternalError(f"light edge ({p}, {h}) violates the halving property")
            chain_parent[c] = self.chain_of[p]
            chain_depth[c] = chain_depth[chain_parent[c]] + 1
        height = int(chain_depth.max()) + 1 if n_chains else 1
        if chain_depth.max(initial=0) > math.ceil(math.log2(n)) + 1:
            raise InternalError("virtual tree height exceeds the logarithmic bound")
        assert self.chain_of[0] == root_chain
        return VirtualTreeInfo(separator, node_size, chain_parent, chain_depth, height)


def _next_pow2(x):
    x = np.maximum(np.asarray(x, dtype=np.int64), 1)
    return (1 << np.ceil(np.log2(x)).astype(np.int64)).astype(np.int64)


def _depths(parent):
    n = parent.size
    depth = np.zeros(n, dtype=np.int64)
    for v in range(1, n):
        if parent[v] >= v:
            # fall back to a resolver for arbitrary vertex orderings
            return _depths_resolve(parent)
        depth[v] = depth[parent[v]] + 1
    return depth


def _depths_resolve(parent):
    n = parent.size
    depth = np.full(n, -1, dtype=np.int64)
    depth[0] = 0
    for v in range(n):
        chain = []
        w = v
        while depth[w] < 0:
            chain.append(w)
            w = parent[w]
            if len(chain) > n:
                raise InputError("parent pointers contain a cycle")
        d = depth[w]
        for x in reversed(chain):
            d += 1
            depth[x] = d
    return depth


@njit(cache=True)
def _subtree_sizes(parent, order):
    n = parent.shape[0]
    size = np.ones(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        v = order[i]
        size[parent[v]] += size[v]
    return size


@njit(cache=True)
def _heavy_children(size, child_off, child_list):
    n = size.shape[0]
    heavy = np.full(n, -1, dtype=np.int64)
    for u in range(n):
        best = -1
        best_size = 0
        for k in range(child_off[u], child_off[u + 1]):
            c = child_list[k]
            if size[c] > best_size:  # strict: first max in id order wins ties
                best_size = size[c]
                best = c
        heavy[u] = best
    return heavy


@njit(cache=True)
def _build_chains(parent, heavy):
    n = parent.shape[0]
    chain_of = np.full(n, -1, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    n_chains = 0
    for v in range(n):
        if v == 0 or heavy[parent[v]] != v:
            n_chains += 1
    head = np.empty(n_chains, dtype=np.int64)
    clen = np.zeros(n_chains, dtype=np.int64)
    cid = 0
    for v in range(n):
        if v == 0 or heavy[parent[v]] != v:
            w = v
            p = 0
            while True:
                chain_of[w] = cid
                pos[w] = p
                nxt = heavy[w]
                if nxt == -1:
                    break
                w = nxt
                p += 1
            head[cid] = v
            clen[cid] = p
            cid += 1
    return chain_of, pos, head, clen


@njit(cache=True)
def _chain_edge_ids(parent, chain_of, pos, ce_off):
    n = parent.shape[0]
    out = np.empty(ce_off[ce_off.shape[0] - 1], dtype=np.int64)
    for v in range(1, n):
        if chain_of[v] == chain_of[parent[v]]:
            c = chain_of[v]
            out[ce_off[c] + pos[v] - 1] = v - 1
    return out


@njit(cache=True)
def _fill_leaves_and_lights(tree_r, f_init, head, clen, ce_off, chain_edges,
                            sz, d_off, d_r, d_rf, light_r, light_f):
    n_chains = head.shape[0]
    for c in range(n_chains):
        if clen[c] > 0:
            base = d_off[c]
            s = sz[c]
            for j in range(clen[c]):
                e = chain_edges[ce_off[c] + j]
                d_r[base + s + j] = tree_r[e]
                d_rf[base + s + j] = tree_r[e] * f_init[e]
            _pull_all(d_r[base : base + 2 * s], s)
            _pull_all(d_rf[base : base + 2 * s], s)
        h = head[c]
        if h != 0:
            light_r[c] = tree_r[h - 1]
            light_f[c] = f_init[h - 1]


@njit(cache=True)
def _hld_query(parent, depth, chain_of, pos, head, light_r, light_f,
               d_r, d_rf, lazy, d_off, z_off, sz, lg, u, v):
    sum_r = 0.0
    sum_rf = 0.0
    segs = 0
    a = u
    b = v
    while chain_of[a] != chain_of[b]:
        ca = chain_of[a]
        cb = chain_of[b]
        if depth[head[ca]] >= depth[head[cb]]:
            if pos[a] > 0:
                qr, qrf, _, _ = _query(
                    d_r[d_off[ca] : d_off[ca + 1]], d_rf[d_off[ca] : d_off[ca + 1]],
                    lazy[z_off[ca] : z_off[ca + 1]], sz[ca], lg[ca], 0, pos[a],
                )
                sum_r += qr
                sum_rf -= qrf  # u-side segments are traversed upward
                segs += 1
            sum_r += light_r[ca]
            sum_rf -= light_r[ca] * light_f[ca]
            segs += 1
            a = parent[head[ca]]
        else:
            if pos[b] > 0:
                qr, qrf, _, _ = _query(
                    d_r[d_off[cb] : d_off[cb + 1]], d_rf[d_off[cb] : d_off[cb + 1]],
                    lazy[z_off[cb] : z_off[cb + 1]], sz[cb], lg[cb], 0, pos[b],
                )
                sum_r += qr
                sum_rf += qrf
                segs += 1
            sum_r += light_r[cb]
            sum_rf += light_r[cb] * light_f[cb]
            segs += 1
            b = parent[head[cb]]
    c = chain_of[a]
    if pos[a] > pos[b]:
        qr, qrf, _, _ = _query(
            d_r[d_off[c] : d_off[c + 1]], d_rf[d_off[c] : d_off[c + 1]],
            lazy[z_off[c] : z_off[c + 1]], sz[c], lg[c], pos[b], pos[a],
        )
        sum_r += qr
        sum_rf -= qrf
        segs += 1
    elif pos[b] > pos[a]:
        qr, qrf, _, _ = _query(
            d_r[d_off[c] : d_off[c + 1]], d_rf[d_off[c] : d_off[c + 1]],
            lazy[z_off[c] : z_off[c + 1]], sz[c], lg[c], pos[a], pos[b],
        )
        sum_r += qr
        sum_rf += qrf
        segs += 1
    return sum_r, sum_rf, segs


@njit(cache=True)
def _hld_update(parent, depth, chain_of, pos, head, light_r, light_f,
                d_r, d_rf, lazy, d_off, z_off, sz, lg, u, v, delta):
    segs = 0
    a = u
    b = v
    while chain_of[a] != chain_of[b]:
        ca = chain_of[a]
        cb = chain_of[b]
        if depth[head[ca]] >= depth[head[cb]]:
            if pos[a] > 0:
                _update(
                    d_r[d_off[ca] : d_off[ca + 1]], d_rf[d_off[ca] : d_off[ca + 1]],
                    lazy[z_off[ca] : z_off[ca + 1]], sz[ca], lg[ca], 0, pos[a], -delta,
                )
                segs += 1
            light_f[ca] -= delta
            segs += 1
            a = parent[head[ca]]
        else:
            if pos[b] > 0:
                _update(
                    d_r[d_off[cb] : d_off[cb + 1]], d_rf[d_off[cb] : d_off[cb + 1]],
                    lazy[z_off[cb] : z_off[cb + 1]], sz[cb], lg[cb], 0, pos[b], delta,
                )
                segs += 1
            light_f[cb] += delta
            segs += 1
            b = parent[head[cb]]
    c = chain_of[a]
    if pos[a] > pos[b]:
        _update(
            d_r[d_off[c] : d_off[c + 1]], d_rf[d_off[c] : d_off[c + 1]],
            lazy[z_off[c] : z_off[c + 1]], sz[c], lg[c], pos[b], pos[a], -delta,
        )
        segs += 1
    elif pos[b] > pos[a]:
        _update(
            d_r[d_off[c] : d_off[c + 1]], d_rf[d_off[c] : d_off[c + 1]],
            lazy[z_off[c] : z_off[c + 1]], sz[c], lg[c], pos[a], pos[b], delta,
        )
        segs += 1
    return segs


@njit(cache=True)
def _hld_lca(parent, depth, chain_of, pos, head, u, v):
    a = u
    b = v
    while chain_of[a] != chain_of[b]:
        ca = chain_of[a]
        cb = chain_of[b]
        if depth[head[ca]] >= depth[head[cb]]:
            a = parent[head[ca]]
        else:
            b = parent[head[cb]]
    return a if pos[a] <= pos[b] else b


@njit(cache=True)
def _hld_snapshot(head, clen, ce_off, chain_edges, sz, lg, d_off, z_off,
                  d_r, d_rf, lazy, light_f, f_out):
    n_chains = head.shape[0]
    for c in range(n_chains):
        if clen[c] > 0:
            base = d_off[c]
            s = sz[c]
            _flush_all(d_r[base : base + 2 * s], d_rf[base : base + 2 * s],
                       lazy[z_off[c] : z_off[c + 1]], s)
            for j in range(clen[c]):
                e = chain_edges[ce_off[c] + j]
                f_out[e] = d_rf[base + s + j] / d_r[base + s + j]
        if head[c] != 0:
            f_out[head[c] - 1] = light_f[c]


@njit(cache=True)
def _toggle_hld(parent, depth, chain_of, pos, head, light_r, light_f,
                d_r, d_rf, lazy, d_off, z_off, sz, lg,
                off_u, off_v, off_r, f_off, samples):
    for k in range(samples.shape[0]):
        e = samples[k]
        # tree path traversed backward v -> u
        sum_r, sum_rf, _ = _hld_query(
            parent, depth, chain_of, pos, head, light_r, light_f,
            d_r, d_rf, lazy, d_off, z_off, sz, lg, off_v[e], off_u[e],
        )
        num = off_r[e] * f_off[e] + sum_rf
        delta = -num / (off_r[e] + sum_r)
        f_off[e] += delta
        _hld_update(
            parent, depth, chain_of, pos, head, light_r, light_f,
            d_r, d_rf, lazy, d_off, z_off, sz, lg, off_v[e], off_u[e], delta,
        )
