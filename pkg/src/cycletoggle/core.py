"""Core graph, flow, and stretch primitives shared by every solver.

Sign conventions, fixed once for the whole package:

* tree edges are positive in the low-index -> high-index direction
  (for a path, edge ``i`` carries flow from vertex ``i`` to ``i+1``;
  for a rooted tree, from parent to child);
* off-tree edges are positive in the ``u -> v`` direction (``u < v``);
* a fundamental cycle is oriented so the off-tree edge is traversed
  forward ``u -> v`` and the tree path backward ``v -> u``.

Vertex potentials are reported zero-mean, and the residual norm is the
relative 2-norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from ._accel import njit

BALANCE_RTOL = 1e-12


class InputError(ValueError):
    """A caller-supplied value violates an operation's contract."""


class InternalError(RuntimeError):
    """An internal consistency check failed; indicates a bug."""


class GraphFormatError(InputError):
    """Malformed graph file; carries the offending line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class PathAggregate(NamedTuple):
    """Pair (sum of r, sum of r*f) over a tree path, flows signed in query direction."""

    sum_r: float
    sum_rf: float


def _as_resistances(r, what):
    r = np.ascontiguousarray(r, dtype=np.float64)
    if r.ndim != 1:
        raise InputError(f"{what} must be 1-dimensional")
    if r.size and not (np.all(np.isfinite(r)) and np.all(r > 0)):
        raise InputError(f"{what} must be strictly positive and finite")
    return r


class HeavyPathGraph:
    """A weighted path spanning tree plus off-tree edges.

    Vertices are path positions ``0..n-1``; ``tree_r[i]`` is the resistance of
    the path edge ``(i, i+1)``.  Off-tree edges ``(u, v, r)`` satisfy ``u < v``
    and ``v - u >= 2`` so they never duplicate a path edge; each one closes a
    fundamental cycle with the path segment between its endpoints.

    ``off_r`` may be None while a generator has not yet assigned off-edge
    resistances; operations that need them raise :class:`InputError`.
    """

    __slots__ = ("n", "tree_r", "off_u", "off_v", "off_r", "_prefix_r", "_path_r")

    def __init__(self, tree_r, off_edges: Iterable[tuple] = ()):
        tree_r = _as_resistances(tree_r, "tree resistances")
        if tree_r.size == 0:
            raise InputError("path needs at least one tree edge")
        edges = list(off_edges)
        off_u = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
        off_v = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
        if edges and len(edges[0]) > 2 and edges[0][2] is not None:
            off_r = np.fromiter((e[2] for e in edges), dtype=np.float64, count=len(edges))
        else:
            off_r = None
        self._init_arrays(tree_r, off_u, off_v, off_r)

    @classmethod
    def from_arrays(cls, tree_r, off_u, off_v, off_r=None) -> "HeavyPathGraph":
        g = cls.__new__(cls)
        g._init_arrays(
            _as_resistances(tree_r, "tree resistances"),
            np.ascontiguousarray(off_u, dtype=np.int64),
            np.ascontiguousarray(off_v, dtype=np.int64),
            None if off_r is None else _as_resistances(off_r, "off-edge resistances"),
        )
        return g

    def _init_arrays(self, tree_r, off_u, off_v, off_r):
        n = tree_r.size + 1
        if off_u.shape != off_v.shape:
            raise InputError("off-edge endpoint arrays differ in length")
        if off_u.size:
            if not (np.all(off_u >= 0) & np.all(off_v <= n - 1)):
                raise InputError("off-edge endpoint out of range")
            if not np.all(off_v - off_u >= 2):
                raise InputError("off-tree edges must span >= 2 path edges (u < v, v-u >= 2)")
        if off_r is not None and off_r.shape != off_u.shape:
            raise InputError("off-edge resistance array length mismatch")
        self.n = n
        self.tree_r = tree_r
        self.off_u = off_u
        self.off_v = off_v
        self.off_r = off_r
        self._prefix_r = None
        self._path_r = None

    @property
    def m_off(self) -> int:
        return self.off_u.size

    @property
    def m(self) -> int:
        """Total edge count (tree plus off-tree)."""
        return self.n - 1 + self.m_off

    @property
    def prefix_r(self) -> np.ndarray:
        """prefix_r[i] = sum of tree_r[0:i]; length n."""
        if self._prefix_r is None:
            p = np.zeros(self.n)
            np.cumsum(self.tree_r, out=p[1:])
            self._prefix_r = p
        return self._prefix_r

    @property
    def off_path_r(self) -> np.ndarray:
        """Tree-path resistance under each off-edge: sum of tree_r over [u, v)."""
        if self._path_r is None:
            p = self.prefix_r
            self._path_r = p[self.off_v] - p[self.off_u]
        return self._path_r

    def require_off_r(self) -> np.ndarray:
        if self.off_r is None and self.m_off:
            raise InputError("off-edge resistances are unset; assign a stretch first")
        return self.off_r if self.off_r is not None else np.empty(0)

    def with_off_r(self, off_r) -> "HeavyPathGraph":
        return HeavyPathGraph.from_arrays(self.tree_r, self.off_u, self.off_v, off_r)

    def __repr__(self):
        return f"HeavyPathGraph(n={self.n}, m_off={self.m_off})"


class GeneralTreeGraph:
    """A rooted spanning tree (root = vertex 0) plus off-tree edges.

    ``parent[v]`` is the parent of vertex ``v`` (``parent[0] == -1``); tree
    edge ``i`` connects ``(parent[i+1], i+1)`` with resistance ``tree_r[i]``
    and positive flow direction parent -> child.  A heavy path graph embeds
    with ``parent[v] = v - 1``, which keeps edge indices and signs identical.
    """

    __slots__ = ("n", "parent", "tree_r", "off_u", "off_v", "off_r", "_depth", "_order")

    def __init__(self, parent, tree_r, off_edges: Iterable[tuple] = ()):
        parent = np.ascontiguousarray(parent, dtype=np.int64)
        tree_r = _as_resistances(tree_r, "tree resistances")
        n = parent.size
        if n < 2 or tree_r.size != n - 1:
            raise InputError("need parent array of length n and n-1 tree resistances")
        if parent[0] != -1:
            raise InputError("vertex 0 must be the root (parent[0] == -1)")
        if np.any(parent[1:] < 0) or np.any(parent[1:] >= n):
            raise InputError("parent pointer out of range")
        depth = _tree_depths(parent)
        if depth is None:
            raise InputError("parent pointers do not form a single rooted tree")
        edges = list(off_edges)
        off_u = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
        off_v = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
        if edges and len(edges[0]) > 2 and edges[0][2] is not None:
            off_r = _as_resistances([e[2] for e in edges], "off-edge resistances")
        else:
            off_r = None
        for u, v in zip(off_u, off_v):
            if u == v or parent[u] == v or parent[v] == u:
                raise InputError(f"off-tree edge ({u}, {v}) duplicates a tree edge or is a loop")
        self.n = n
        self.parent = parent
        self.tree_r = tree_r
        self.off_u = off_u
        self.off_v = off_v
        self.off_r = off_r
        self._depth = depth
        self._order = None

    @classmethod
    def from_path(cls, g: HeavyPathGraph) -> "GeneralTreeGraph":
        parent = np.arange(-1, g.n - 1, dtype=np.int64)
        t = cls.__new__(cls)
        t.n = g.n
        t.parent = parent
        t.tree_r = g.tree_r
        t.off_u = g.off_u
        t.off_v = g.off_v
        t.off_r = g.off_r
        t._depth = np.arange(g.n, dtype=np.int64)
        t._order = np.arange(g.n, dtype=np.int64)
        return t

    @property
    def m_off(self) -> int:
        return self.off_u.size

    @property
    def m(self) -> int:
        return self.n - 1 + self.m_off

    @property
    def depth(self) -> np.ndarray:
        return self._depth

    @property
    def preorder(self) -> np.ndarray:
        """Vertices in an order where every parent precedes its children."""
        if self._order is None:
            self._order = np.argsort(self._depth, kind="stable").astype(np.int64)
        return self._order

    def require_off_r(self) -> np.ndarray:
        if self.off_r is None and self.m_off:
            raise InputError("off-edge resistances are unset")
        return self.off_r if self.off_r is not None else np.empty(0)

    def __repr__(self):
        return f"GeneralTreeGraph(n={self.n}, m_off={self.m_off})"


def _tree_depths(parent):
    """Depth per vertex, or None if the parent pointers contain a cycle."""
    n = parent.size
    depth = np.full(n, -1, dtype=np.int64)
    depth[0] = 0
    for v in range(1, n):
        # chase to a resolved ancestor, then unwind
        chain = []
        w = v
        while depth[w] < 0:
            chain.append(w)
            w = parent[w]
            if len(chain) > n:
                return None
        d = depth[w]
        for x in reversed(chain):
            d += 1
            depth[x] = d
    return depth


@dataclass
class FlowState:
    """Signed flow on every tree edge and off-tree edge (the dual iterate)."""

    f_tree: np.ndarray
    f_off: np.ndarray

    def copy(self) -> "FlowState":
        return FlowState(self.f_tree.copy(), self.f_off.copy())


def _check_dims(g, f: FlowState):
    if f.f_tree.shape != (g.n - 1,) or f.f_off.shape != (g.m_off,):
        raise InputError("flow state dimensions do not match graph")


def _tree_endpoints(g):
    """(tail, head) arrays per tree edge, positive direction tail -> head."""
    if isinstance(g, HeavyPathGraph):
        return np.arange(g.n - 1), np.arange(1, g.n)
    return g.parent[1:], np.arange(1, g.n)


def validate_demand(b, n=None) -> np.ndarray:
    """Check that a demand vector is balanced (entries sum to ~zero)."""
    b = np.ascontiguousarray(b, dtype=np.float64)
    if n is not None and b.shape != (n,):
        raise InputError(f"demand vector has length {b.size}, expected {n}")
    l1 = np.abs(b).sum()
    if abs(b.sum()) > BALANCE_RTOL * max(l1, 1.0):
        raise InputError("demand vector entries must sum to zero")
    return b


def laplacian_apply(g, x) -> np.ndarray:
    """Multiply by the graph Laplacian (weights w = 1/r), never materializing it."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise InputError(f"vector has length {x.size}, expected {g.n}")
    tu, tv = _tree_endpoints(g)
    d = (x[tu] - x[tv]) / g.tree_r
    out = np.bincount(tu, weights=d, minlength=g.n)
    out -= np.bincount(tv, weights=d, minlength=g.n)
    if g.m_off:
        d = (x[g.off_u] - x[g.off_v]) / g.require_off_r()
        out += np.bincount(g.off_u, weights=d, minlength=g.n)
        out -= np.bincount(g.off_v, weights=d, minlength=g.n)
    return out


def flow_energy(g, f: FlowState) -> float:
    """Total dissipated energy: sum of r_e * f_e^2 over all edges."""
    _check_dims(g, f)
    e = float(np.dot(g.tree_r, f.f_tree * f.f_tree))
    if g.m_off:
        e += float(np.dot(g.require_off_r(), f.f_off * f.f_off))
    return e


def init_tree_flow(g, b) -> FlowState:
    """Route the demands b through the tree alone (off-tree flows start at 0).

    The result is the unique tree flow with net out-flow b at every vertex;
    for a path this is the prefix-sum flow.
    """
    b = validate_demand(b, g.n)
    if isinstance(g, HeavyPathGraph):
        f_tree = np.cumsum(b)[:-1]
    else:
        sub = _subtree_sums(g.parent, g.preorder, b)
        f_tree = -sub[1:]
    return FlowState(f_tree, np.zeros(g.m_off))


def _subtree_sums(parent, preorder, values):
    s = values.astype(np.float64).copy()
    return _subtree_sums_kernel(parent, preorder, s)


@njit(cache=True)
def _subtree_sums_kernel(parent, preorder, s):
    for i in range(preorder.shape[0] - 1, 0, -1):
        v = preorder[i]
        s[parent[v]] += s[v]
    return s


def tree_induced_potentials(g, f: FlowState) -> np.ndarray:
    """Potentials induced by the tree flows via Ohm's law, shifted to zero mean.

    Along every tree edge (u, v) with positive direction u -> v,
    x[v] = x[u] - r * f, so reading voltage drops back reproduces r*f.
    """
    _check_dims(g, f)
    if isinstance(g, HeavyPathGraph):
        x = np.empty(g.n)
        x[0] = 0.0
        np.cumsum(-g.tree_r * f.f_tree, out=x[1:])
    else:
        drop = g.tree_r * f.f_tree
        x = _accumulate_potentials(g.parent, g.preorder, drop)
    x -= x.mean()
    return x


@njit(cache=True)
def _accumulate_potentials(parent, preorder, drop):
    n = parent.shape[0]
    x = np.zeros(n)
    for i in range(1, n):
        v = preorder[i]
        x[v] = x[parent[v]] - drop[v - 1]
    return x


def relative_residual(g, x, b) -> float:
    """||b - L x||_2 / ||b||_2."""
    b = np.ascontiguousarray(b, dtype=np.float64)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        raise InputError("residual undefined for b = 0")
    return float(np.linalg.norm(b - laplacian_apply(g, x)) / nb)


def net_vertex_flow(g, f: FlowState) -> np.ndarray:
    """Net out-flow per vertex; equals b for any feasible flow."""
    _check_dims(g, f)
    tu, tv = _tree_endpoints(g)
    out = np.bincount(tu, weights=f.f_tree, minlength=g.n)
    out -= np.bincount(tv, weights=f.f_tree, minlength=g.n)
    if g.m_off:
        out += np.bincount(g.off_u, weights=f.f_off, minlength=g.n)
        out -= np.bincount(g.off_v, weights=f.f_off, minlength=g.n)
    return out


def edge_stretch(g: HeavyPathGraph, off_index: int) -> float:
    """Stretch of one off-tree edge: tree-path resistance / its own resistance."""
    if not 0 <= off_index < g.m_off:
        raise IndexError(f"off-edge index {off_index} out of range")
    return float(g.off_path_r[off_index] / g.require_off_r()[off_index])


def edge_stretches(g: HeavyPathGraph) -> np.ndarray:
    """Stretch of every off-tree edge, vectorized."""
    if g.m_off == 0:
        return np.empty(0)
    return g.off_path_r / g.require_off_r()


def total_stretch(g: HeavyPathGraph) -> float:
    """Total stretch: n-1 (tree edges stretch 1 each) plus all off-edge stretches."""
    return float(g.n - 1 + edge_stretches(g).sum())


def cycle_imbalance(g, f: FlowState, off_index: int) -> tuple[float, float]:
    """(numerator, sum_r) of one fundamental cycle; the optimal toggle is
    delta = -numerator / sum_r.

    The cycle is oriented off-edge forward (u -> v), tree path backward
    (v -> u), so tree edges traversed against their positive direction enter
    the numerator with a minus sign.
    """
    _check_dims(g, f)
    if not 0 <= off_index < g.m_off:
        raise IndexError(f"off-edge index {off_index} out of range")
    r_e = float(g.require_off_r()[off_index])
    u = int(g.off_u[off_index])
    v = int(g.off_v[off_index])
    num = r_e * float(f.f_off[off_index])
    if isinstance(g, HeavyPathGraph):
        num -= float(np.dot(g.tree_r[u:v], f.f_tree[u:v]))
        den = r_e + float(g.tree_r[u:v].sum())
    else:
        rf, rr = _tree_path_sums(g, f.f_tree, v, u)
        num += rf
        den = r_e + rr
    return num, den


def apply_cycle_toggle(g, f: FlowState, off_index: int, delta: float) -> None:
    """Add a circulation of ``delta`` around one fundamental cycle, in place."""
    u = int(g.off_u[off_index])
    v = int(g.off_v[off_index])
    f.f_off[off_index] += delta
    if isinstance(g, HeavyPathGraph):
        f.f_tree[u:v] -= delta
    else:
        _tree_path_add(g, f.f_tree, v, u, delta)


def _tree_path_sums(g: GeneralTreeGraph, f_tree, a, b):
    """(sum r*f signed in a->b traversal direction, sum r) over tree path a->b."""
    depth = g.depth
    parent = g.parent
    rf = 0.0
    rr = 0.0
    while a != b:
        if depth[a] >= depth[b]:
            rf -= g.tree_r[a - 1] * f_tree[a - 1]  # upward: against parent->child
            rr += g.tree_r[a - 1]
            a = parent[a]
        else:
            rf += g.tree_r[b - 1] * f_tree[b - 1]  # b-side edges are walked downward
            rr += g.tree_r[b - 1]
            b = parent[b]
    return rf, rr


def _tree_path_add(g: GeneralTreeGraph, f_tree, a, b, delta):
    """Increment flows by delta along the a->b traversal direction."""
    depth = g.depth
    parent = g.parent
    while a != b:
        if depth[a] >= depth[b]:
            f_tree[a - 1] -= delta
            a = parent[a]
        else:
            f_tree[b - 1] += delta
            b = parent[b]


# -- graph text format ------------------------------------------------------
#
# line 1: "n m_off"; lines 2..n: tree resistances in path order; then m_off
# lines "u v r", whitespace separated, resistances parsed as 64-bit floats.


def write_graph(g: HeavyPathGraph, path) -> None:
    off_r = g.require_off_r()
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m_off}\n")
        fh.write("\n".join(map(repr, g.tree_r.tolist())))
        fh.write("\n")
        if g.m_off:
            rows = (
                f"{u} {v} {r!r}"
                for u, v, r in zip(g.off_u.tolist(), g.off_v.tolist(), off_r.tolist())
            )
            fh.write("\n".join(rows))
            fh.write("\n")


def read_graph(path) -> HeavyPathGraph:
    with open(path) as fh:
        text = fh.read()
    tokens = text.split()
    try:
        vals = np.array(tokens, dtype=np.float64)
    except ValueError:
        _reparse_for_error(path, text)
        raise  # unreachable; _reparse always raises
    if vals.size < 2:
        raise GraphFormatError(path, 1, "expected header 'n m_off'")
    n, m_off = int(vals[0]), int(vals[1])
    expected = 2 + (n - 1) + 3 * m_off
    if n < 2 or m_off < 0 or vals.size != expected:
        _reparse_for_error(path, text, n, m_off)
    tree_r = vals[2 : 2 + n - 1]
    triples = vals[2 + n - 1 :].reshape(m_off, 3)
    try:
        return HeavyPathGraph.from_arrays(
            tree_r, triples[:, 0].astype(np.int64), triples[:, 1].astype(np.int64), triples[:, 2]
        )
    except InputError as exc:
        raise GraphFormatError(path, 1, str(exc)) from exc


def _reparse_for_error(path, text, n=None, m_off=None):
    """Slow line-by-line pass that pins a parse problem to a line number."""
    lines = text.splitlines()
    for lineno, line in enumerate(lines, start=1):
        for tok in line.split():
            try:
                float(tok)
            except ValueError:
                raise GraphFormatError(path, lineno, f"invalid number {tok!r}") from None
    if n is None:
        raise GraphFormatError(path, 1, "expected header 'n m_off'")
    expected = 2 + (n - 1) + 3 * m_off
    have = len(text.split())
    raise GraphFormatError(
        path,
        len(lines),
        f"token count mismatch: header declares n={n}, m_off={m_off} "
        f"({expected} tokens), file has {have}",
    )


def write_metadata(path, fields: dict) -> None:
    """Sidecar metadata: one key=value per line."""
    with open(path, "w") as fh:
        for k, v in fields.items():
            fh.write(f"{k}={v}\n")


def read_metadata(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and "=" in line:
                k, v = line.split("=", 1)
                out[k] = v
    return out
