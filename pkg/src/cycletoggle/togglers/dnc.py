"""Offline divide-and-conquer batch togglers.

Instead of toggling sampled cycles one at a time, a whole batch is preselected
and executed by recursive halving: each half's cycles induce a subgraph of
the tree, contiguous runs of tree edges that are only ever updated together
are contracted into single edges carrying (R = sum r, RF = sum r*f), the
recursion continues on the contracted view, and accumulated flow deltas are
pushed back up afterwards (restriction / prolongation).  Base cases execute
their cycles sequentially on the contracted representation, so the final
flows equal naive sequential toggling of the whole batch in order.

A contracted edge stores RF and its restriction-time baseline F0 = RF/R;
since a toggle moves all constituent edges equally, the prolonged per-edge
delta is just RF/R - F0.  The second half of a split is restricted only
after the first half's prolongation completes, preserving the sequential
data dependence between toggles.

Two variants: the path variant keeps original integer vertex coordinates for
terminals (no relabeling); the general variant works on any rooted tree,
relabeling terminals into dense local ids per recursion node and rebuilding
LCA tables on the contracted forest.
"""

from __future__ import annotations

import time

import numpy as np

from .._accel import njit
from ..core import InputError, InternalError

BASE_THRESHOLD = 32

# Contracted-view vertex budget per cycle.  On a path the terminal set is just
# the cycle endpoints (<= 2 per cycle); on a general tree the LCA closure of k
# endpoints can reach 2k - 1 vertices, so 4 per cycle is the provable ceiling
# there.  Every restriction hard-checks its variant's bound; engines also
# record the largest observed ratio so callers can assert the tighter
# 3-vertices-per-cycle contraction bound, which holds on heavy path graphs.
VERTEX_FACTOR_PATH = 3
_VERTEX_FACTOR_GENERAL = 4


class _DncEngine:
    """Recursion driver, phase timers, and instrumentation shared by both variants."""

    _vertex_factor = VERTEX_FACTOR_PATH

    def __init__(self, base_threshold=BASE_THRESHOLD, record_trace=False):
        if base_threshold < 1:
            raise InputError("base_threshold must be >= 1")
        self.base_threshold = base_threshold
        self.phase_ns = {"restrict": 0, "solve": 0, "prolong": 0}
        self.work = 0
        self.max_vertex_ratio = 0.0
        self.trace = [] if record_trace else None

    def _check_contraction(self, n_vertices, n_cycles):
        ratio = n_vertices / n_cycles
        if ratio > self.max_vertex_ratio:
            self.max_vertex_ratio = ratio
        if n_vertices > self._vertex_factor * n_cycles:
            raise InternalError(
                f"contracted view has {n_vertices} vertices for {n_cycles} cycles "
                f"(> {self._vertex_factor}x)"
            )

    def execute(self, off_u, off_v, off_r, f_off, batch) -> None:
        """Toggle the batch of off-edge indices, in order."""
        batch = np.ascontiguousarray(batch, dtype=np.int64)
        if batch.size == 0:
            return
        self._off = (off_u, off_v, off_r, f_off)
        cu = np.ascontiguousarray(off_u[batch])
        cv = np.ascontiguousarray(off_v[batch])
        self._execute(self._top, cu, cv, batch)
        del self._off

    def _execute(self, view, cu, cv, batch):
        if batch.size <= self.base_threshold:
            t0 = time.perf_counter_ns()
            child, cu2, cv2 = self._restrict(view, cu, cv)
            t1 = time.perf_counter_ns()
            self._base(child, cu2, cv2, batch)
            t2 = time.perf_counter_ns()
            self._prolong(child, view)
            t3 = time.perf_counter_ns()
            self.phase_ns["restrict"] += t1 - t0
            self.phase_ns["solve"] += t2 - t1
            self.phase_ns["prolong"] += t3 - t2
            if self.trace is not None:
                self.trace.append(batch.copy())
            return
        mid = batch.size // 2
        for sl in (slice(None, mid), slice(mid, None)):
            t0 = time.perf_counter_ns()
            child, cu2, cv2 = self._restrict(view, cu[sl], cv[sl])
            self.phase_ns["restrict"] += time.perf_counter_ns() - t0
            self._execute(child, cu2, cv2, batch[sl])
            t0 = time.perf_counter_ns()
            self._prolong(child, view)
            self.phase_ns["prolong"] += time.perf_counter_ns() - t0


# -- path variant -------------------------------------------------------------


class _TopPath:
    """The real path: edge resistances, live flows, static resistance prefix."""

    is_top = True

    def __init__(self, tree_r, f, prefix_r):
        self.r = tree_r
        self.f = f
        self.prefix_r = prefix_r


class ContractedPath:
    """Contracted path view; terminals keep original vertex coordinates.

    Edge j covers original span [lo[j], hi[j]) and parent-edge index range
    [pstart[j], pend[j]); covered spans partition the union of the sub-batch's
    cycle intervals, and uncovered gaps between terminals take no edge.
    """

    is_top = False

    def __init__(self, terminals, lo, hi, pstart, pend, R, RF):
        self.terminals = terminals
        self.lo = lo
        self.hi = hi
        self.pstart = pstart
        self.pend = pend
        self.R = R
        self.RF = RF
        self.F0 = RF / R
        self.prefix_R = np.concatenate([[0.0], np.cumsum(R)])

    @property
    def n_vertices(self):
        return self.terminals.size


class DncPathToggler(_DncEngine):
    def __init__(self, g, f_init, base_threshold=BASE_THRESHOLD, record_trace=False):
        super().__init__(base_threshold, record_trace)
        self.g = g
        self.f = np.array(f_init, dtype=np.float64)
        if self.f.shape != (g.n - 1,):
            raise InputError("flow array length mismatch")
        self._top = _TopPath(g.tree_r, self.f, g.prefix_r)

    def snapshot_flows(self):
        return self.f.copy()

    def _restrict(self, view, cu, cv):
        t = np.unique(np.concatenate([cu, cv]))
        self._check_contraction(t.size, cu.size)
        # a gap between consecutive terminals becomes an edge iff some cycle covers it
        cover = np.zeros(t.size, dtype=np.int64)
        np.add.at(cover, np.searchsorted(t, cu), 1)
        np.add.at(cover, np.searchsorted(t, cv), -1)
        covered = np.cumsum(cover)[:-1] > 0
        lo = t[:-1][covered]
        hi = t[1:][covered]
        if view.is_top:
            pstart, pend = lo, hi
            prefix_rf = np.concatenate([[0.0], np.cumsum(view.r * view.f)])
            R = view.prefix_r[hi] - view.prefix_r[lo]
            RF = prefix_rf[hi] - prefix_rf[lo]
        else:
            pstart = np.searchsorted(view.lo, lo)
            pend = np.searchsorted(view.lo, hi)
            prefix_rf = np.concatenate([[0.0], np.cumsum(view.RF)])
            R = view.prefix_R[pend] - view.prefix_R[pstart]
            RF = prefix_rf[pend] - prefix_rf[pstart]
        self.work += t.size + lo.size
        return ContractedPath(t, lo, hi, pstart, pend, R, RF), cu, cv

    def _base(self, ct, cu, cv, batch):
        cs = np.searchsorted(ct.lo, cu)
        ce = np.searchsorted(ct.lo, cv)
        off_u, off_v, off_r, f_off = self._off
        self.work += int((ce - cs).sum()) + batch.size
        _toggle_base_path(ct.R, ct.RF, cs, ce, batch, off_r, f_off)

    def _prolong(self, ct, view):
        delta = ct.RF / ct.R - ct.F0
        self.work += ct.R.size
        if view.is_top:
            df = np.zeros(view.f.size + 1)
            df[ct.pstart] += delta
            df[ct.pend] -= delta
            view.f += np.cumsum(df[:-1])
        else:
            df = np.zeros(view.R.size + 1)
            df[ct.pstart] += delta
            df[ct.pend] -= delta
            view.RF += np.cumsum(df[:-1]) * view.R

    # test hook: exact (sum R, sum RF) per cycle on any path view
    def cycle_path_sums(self, view, cu, cv):
        out = np.empty((cu.size, 2))
        if view.is_top:
            prefix_rf = np.concatenate([[0.0], np.cumsum(view.r * view.f)])
            out[:, 0] = view.prefix_r[cv] - view.prefix_r[cu]
            out[:, 1] = prefix_rf[cv] - prefix_rf[cu]
        else:
            cs = np.searchsorted(view.lo, cu)
            ce = np.searchsorted(view.lo, cv)
            prefix_rf = np.concatenate([[0.0], np.cumsum(view.RF)])
            out[:, 0] = view.prefix_R[ce] - view.prefix_R[cs]
            out[:, 1] = prefix_rf[ce] - prefix_rf[cs]
        return out


@njit(cache=True)
def _toggle_base_path(R, RF, cs, ce, batch, off_r, f_off):
    for k in range(batch.shape[0]):
        e = batch[k]
        sum_r = off_r[e]
        num = off_r[e] * f_off[e]
        for j in range(cs[k], ce[k]):
            sum_r += R[j]
            num -= RF[j]
        delta = -num / sum_r
        f_off[e] += delta
        for j in range(cs[k], ce[k]):
            RF[j] -= delta * R[j]


# -- general-tree variant ------------------------------------------------------


class _TopTree:
    """The real rooted tree: parent pointers, live flows, LCA tables."""

    is_top = True

    def __init__(self, parent, tree_r, f, depth):
        n = parent.size
        self.parent = parent
        self.r = tree_r
        self.f = f
        self.depth = depth
        counts = np.bincount(parent[1:], minlength=n)
        child_off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=child_off[1:])
        child_list = np.argsort(parent[1:], kind="stable").astype(np.int64) + 1
        self.tin, self.tout, self.preorder = _dfs_order(parent, child_off, child_list)
        self.rsum = _root_prefix(parent, self.preorder, tree_r)
        self.lift, self.log = _build_lifting(parent, self.depth)

    def current_rfsum(self):
        return _root_prefix(self.parent, self.preorder, self.r * self.f)


class ContractedTree:
    """Contracted virtual forest with dense local ids in tin order.

    Vertex i maps to parent-view vertex pmap[i]; edge i (for non-root i)
    covers the parent-view tree path vparent[i] -> i and carries (R, RF, F0).
    """

    is_top = False

    def __init__(self, pmap, vparent, depth, tout, R, RF):
        self.pmap = pmap
        self.parent = vparent
        self.depth = depth
        self.tin = np.arange(pmap.size, dtype=np.int64)
        self.tout = tout
        self.R = R
        self.RF = RF
        self.F0 = RF / R
        self.rsum = None
        self.lift = None
        self.log = 0

    @property
    def n_vertices(self):
        return self.pmap.size

    def ensure_search_tables(self):
        """LCA lifting + static resistance prefix, needed only when recursing."""
        if self.lift is None:
            self.rsum = _prefix_by_index(self.parent, self.R)
            self.lift, self.log = _build_lifting(self.parent, self.depth)

    def current_rfsum(self):
        return _prefix_by_index(self.parent, self.RF)


class DncTreeToggler(_DncEngine):
    _vertex_factor = _VERTEX_FACTOR_GENERAL

    def __init__(self, parent, tree_r, f_init, depth=None,
                 base_threshold=BASE_THRESHOLD, record_trace=False):
        super().__init__(base_threshold, record_trace)
        parent = np.ascontiguousarray(parent, dtype=np.int64)
        tree_r = np.ascontiguousarray(tree_r, dtype=np.float64)
        self.f = np.array(f_init, dtype=np.float64)
        n = parent.size
        if parent[0] != -1:
            raise InputError("need a rooted tree with parent[0] == -1")
        if tree_r.shape != (n - 1,) or self.f.shape != (n - 1,):
            raise InputError("edge array length mismatch")
        if depth is None:
            depth = np.zeros(n, dtype=np.int64)
            for v in range(1, n):
                depth[v] = depth[parent[v]] + 1
        self._top = _TopTree(parent, tree_r, self.f, depth)

    def snapshot_flows(self):
        return self.f.copy()

    def _restrict(self, view, cu, cv):
        verts = np.unique(np.concatenate([cu, cv]))
        verts = verts[np.argsort(view.tin[verts], kind="stable")]
        if not view.is_top:
            view.ensure_search_tables()
        lcas = _pair_lcas(verts, view.tin, view.tout, view.depth, view.lift, view.log)
        term = np.unique(np.concatenate([verts, lcas]))
        term = term[np.argsort(view.tin[term], kind="stable")]
        self._check_contraction(term.size, cu.size)
        vparent, vdepth = _virtual_parents(term, view.tin, view.tout)
        tout = _virtual_touts(vparent)
        rfsum = view.current_rfsum()
        R = np.ones(term.size)
        RF = np.zeros(term.size)
        edge = vparent >= 0
        R[edge] = view.rsum[term[edge]] - view.rsum[term[vparent[edge]]]
        RF[edge] = rfsum[term[edge]] - rfsum[term[vparent[edge]]]
        child = ContractedTree(term, vparent, vdepth, tout, R, RF)
        term_tins = view.tin[term]
        cu2 = np.searchsorted(term_tins, view.tin[cu])
        cv2 = np.searchsorted(term_tins, view.tin[cv])
        self.work += term.size + int(edge.sum())
        return child, cu2, cv2

    def _base(self, ct, cu, cv, batch):
        off_u, off_v, off_r, f_off = self._off
        self.work += batch.size
        self.work += _toggle_base_tree(ct.parent, ct.depth, ct.R, ct.RF,
                                       cu, cv, batch, off_r, f_off)

    def _prolong(self, ct, view):
        delta = ct.RF / ct.R - ct.F0
        if view.is_top:
            self.work += _prolong_top(view.parent, view.f, ct.pmap, ct.parent, delta)
        else:
            self.work += _prolong_mid(view.parent, view.R, view.RF, ct.pmap, ct.parent, delta)

    # test hook: exact (sum R, sum RF) per cycle on any tree view
    def cycle_path_sums(self, view, cu, cv):
        if not view.is_top:
            view.ensure_search_tables()
        rsum = view.rsum
        rfsum = view.current_rfsum()
        lca = np.array([
            _lca_one(int(a), int(b), view.depth, view.lift, view.log)
            for a, b in zip(cu, cv)
        ])
        out = np.empty((cu.size, 2))
        out[:, 0] = rsum[cu] + rsum[cv] - 2 * rsum[lca]
        out[:, 1] = rfsum[cu] + rfsum[cv] - 2 * rfsum[lca]
        return out


@njit(cache=True)
def _dfs_order(parent, child_off, child_list):
    n = parent.shape[0]
    tin = np.empty(n, dtype=np.int64)
    tout = np.empty(n, dtype=np.int64)
    preorder = np.empty(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    cursor = child_off[:-1].copy()
    stack[0] = 0
    top = 0
    t = 0
    tin[0] = 0
    preorder[0] = 0
    t = 1
    while top >= 0:
        v = stack[top]
        if cursor[v] < child_off[v + 1]:
            c = child_list[cursor[v]]
            cursor[v] += 1
            tin[c] = t
            preorder[t] = c
            t += 1
            top += 1
            stack[top] = c
        else:
            tout[v] = t - 1
            top -= 1
    return tin, tout, preorder


@njit(cache=True)
def _root_prefix(parent, preorder, edge_vals):
    n = parent.shape[0]
    out = np.zeros(n)
    for i in range(1, n):
        v = preorder[i]
        out[v] = out[parent[v]] + edge_vals[v - 1]
    return out


@njit(cache=True)
def _prefix_by_index(vparent, edge_vals):
    # dense-id views are already in topological (tin) order
    n = vparent.shape[0]
    out = np.zeros(n)
    for i in range(1, n):
        p = vparent[i]
        if p >= 0:
            out[i] = out[p] + edge_vals[i]
    return out


@njit(cache=True)
def _build_lifting(parent, depth):
    n = parent.shape[0]
    log = 1
    while (1 << log) < n:
        log += 1
    lift = np.empty((log, n), dtype=np.int64)
    for v in range(n):
        p = parent[v]
        lift[0, v] = v if p < 0 else p
    for k in range(1, log):
        for v in range(n):
            lift[k, v] = lift[k - 1, lift[k - 1, v]]
    return lift, log


@njit(cache=True)
def _lca_one(a, b, depth, lift, log):
    if depth[a] < depth[b]:
        a, b = b, a
    d = depth[a] - depth[b]
    k = 0
    while d:
        if d & 1:
            a = lift[k, a]
        d >>= 1
        k += 1
    if a == b:
        return a
    for k in range(log - 1, -1, -1):
        if lift[k, a] != lift[k, b]:
            a = lift[k, a]
            b = lift[k, b]
    return lift[0, a]


@njit(cache=True)
def _pair_lcas(verts, tin, tout, depth, lift, log):
    # views may be forests: keep a candidate only if it really covers both sides
    out = np.empty(max(verts.shape[0] - 1, 0), dtype=np.int64)
    for i in range(verts.shape[0] - 1):
        a = verts[i]
        b = verts[i + 1]
        c = _lca_one(a, b, depth, lift, log)
        if tin[c] <= tin[b] and tin[b] <= tout[c]:
            out[i] = c
        else:
            out[i] = a
    return out


@njit(cache=True)
def _virtual_parents(term, tin, tout):
    # term is sorted by tin and closed under pairwise LCAs
    k = term.shape[0]
    vparent = np.full(k, -1, dtype=np.int64)
    vdepth = np.zeros(k, dtype=np.int64)
    stack = np.empty(k, dtype=np.int64)
    top = -1
    for i in range(k):
        w = term[i]
        while top >= 0:
            anc = term[stack[top]]
            if tin[anc] <= tin[w] and tin[w] <= tout[anc]:
                break
            top -= 1
        if top >= 0:
            vparent[i] = stack[top]
            vdepth[i] = vdepth[stack[top]] + 1
        top += 1
        stack[top] = i
    return vparent, vdepth


@njit(cache=True)
def _virtual_touts(vparent):
    k = vparent.shape[0]
    tout = np.arange(k, dtype=np.int64)
    for i in range(k - 1, 0, -1):
        p = vparent[i]
        if p >= 0 and tout[i] > tout[p]:
            tout[p] = tout[i]
    return tout


@njit(cache=True)
def _toggle_base_tree(vparent, depth, R, RF, cu, cv, batch, off_r, f_off):
    work = 0
    for k in range(batch.shape[0]):
        e = batch[k]
        a = cv[k]  # cycle tree path traversed backward v -> u
        b = cu[k]
        sum_r = off_r[e]
        num = off_r[e] * f_off[e]
        while a != b:
            if depth[a] >= depth[b]:
                sum_r += R[a]
                num -= RF[a]
                a = vparent[a]
            else:
                sum_r += R[b]
                num += RF[b]
                b = vparent[b]
            work += 1
        delta = -num / sum_r
        f_off[e] += delta
        a = cv[k]
        b = cu[k]
        while a != b:
            if depth[a] >= depth[b]:
                RF[a] -= delta * R[a]
                a = vparent[a]
            else:
                RF[b] += delta * R[b]
                b = vparent[b]
    return work


@njit(cache=True)
def _prolong_top(parent, f, pmap, vparent, delta):
    work = 0
    for i in range(pmap.shape[0]):
        p = vparent[i]
        if p < 0:
            continue
        d = delta[i]
        if d == 0.0:
            continue
        w = pmap[i]
        stop = pmap[p]
        while w != stop:
            f[w - 1] += d
            w = parent[w]
            work += 1
    return work


@njit(cache=True)
def _prolong_mid(parent, R, RF, pmap, vparent, delta):
    work = 0
    for i in range(pmap.shape[0]):
        p = vparent[i]
        if p < 0:
            continue
        d = delta[i]
        if d == 0.0:
            continue
        w = pmap[i]
        stop = pmap[p]
        while w != stop:
            RF[w] += d * R[w]
            w = parent[w]
            work += 1
    return work
