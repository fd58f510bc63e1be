"""Heavy-path benchmark graph family, stretch assignment, and RHS builders.

Five models over a weighted path: fixed cycle length (off-edges (i, i+hop)),
random cycle length, and serpentine path embeddings of 2D/3D meshes.  Off-edge
resistances are assigned afterwards to give each fundamental cycle either
stretch exactly 1 ("uniform") or stretch drawn from an exponential
distribution.

All randomness comes from numpy's PCG64 via ``default_rng``, seeded with
``[purpose-constant, seed]`` so tree resistances, off-edge endpoints, stretch
draws, and right-hand sides consume independent streams: changing one option
never perturbs the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HeavyPathGraph, InputError, laplacian_apply

_STREAM_TREE = 1
_STREAM_ENDPOINTS = 2
_STREAM_STRETCH = 3
_STREAM_RHS = 4

DEFAULT_EXP_MEAN = 10.0
MIN_STRETCH = 1e-6

MODEL_NAMES = ("fixed:<hop>", "random", "random:2n", "random:<k>", "mesh2d", "mesh3d")


def _rng(stream: int, seed: int) -> np.random.Generator:
    return np.random.default_rng([stream, seed])


def _draw_tree_r(n: int, seed: int, tree_r_range) -> np.ndarray:
    lo, hi = tree_r_range
    if not (1.0 <= lo < hi):
        raise InputError(f"invalid tree resistance range {tree_r_range}")
    return _rng(_STREAM_TREE, seed).uniform(lo, hi, n - 1)


def gen_fixed_length(n: int, hop: int, seed: int = 0, tree_r_range=(1.0, 10000.0)) -> HeavyPathGraph:
    """Path with off-tree edges between every pair (i, i+hop); off_r unset."""
    if hop < 2:
        raise InputError(f"hop must be >= 2, got {hop}")
    if n <= hop:
        raise InputError(f"need n > hop, got n={n}, hop={hop}")
    off_u = np.arange(n - hop, dtype=np.int64)
    return HeavyPathGraph.from_arrays(_draw_tree_r(n, seed, tree_r_range), off_u, off_u + hop)


def gen_random_length(n: int, k_off: int, seed: int = 0, tree_r_range=(1.0, 1000.0)) -> HeavyPathGraph:
    """Path with k_off uniformly random off-tree edges (duplicates allowed); off_r unset."""
    if n < 3:
        raise InputError(f"need n >= 3, got {n}")
    if k_off < 0:
        raise InputError("k_off must be nonnegative")
    rng = _rng(_STREAM_ENDPOINTS, seed)
    us = np.empty(0, dtype=np.int64)
    vs = np.empty(0, dtype=np.int64)
    while us.size < k_off:
        want = k_off - us.size
        a = rng.integers(0, n, size=2 * want + 8)
        b = rng.integers(0, n, size=2 * want + 8)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        keep = hi - lo >= 2
        us = np.concatenate([us, lo[keep]])
        vs = np.concatenate([vs, hi[keep]])
    return HeavyPathGraph.from_arrays(
        _draw_tree_r(n, seed, tree_r_range), us[:k_off], vs[:k_off]
    )


def _serpentine_2d(side: int) -> np.ndarray:
    """pos[i, j] = path position of grid point (i, j); rows alternate direction."""
    pos = np.arange(side * side, dtype=np.int64).reshape(side, side)
    pos[1::2] = pos[1::2, ::-1]
    return pos


def gen_mesh(n: int, dims: int, seed: int = 0, tree_r_range=(1.0, 1000.0)) -> HeavyPathGraph:
    """Serpentine path through a 2D/3D mesh; grid edges off the path become
    off-tree edges (off_r unset)."""
    if dims == 2:
        side = math.isqrt(n)
        if side * side != n:
            raise InputError(f"2D mesh needs a perfect square vertex count, got {n}")
        if side < 2:
            raise InputError("mesh side must be >= 2")
        pos = _serpentine_2d(side)
        pairs = [
            (pos[:, :-1], pos[:, 1:]),
            (pos[:-1, :], pos[1:, :]),
        ]
    elif dims == 3:
        side = round(n ** (1 / 3))
        if side**3 != n:
            raise InputError(f"3D mesh needs a perfect cube vertex count, got {n}")
        if side < 2:
            raise InputError("mesh side must be >= 2")
        plane = _serpentine_2d(side)
        pos = np.empty((side, side, side), dtype=np.int64)
        for z in range(side):
            within = plane if z % 2 == 0 else side * side - 1 - plane
            pos[z] = z * side * side + within
        pairs = [
            (pos[:, :, :-1], pos[:, :, 1:]),
            (pos[:, :-1, :], pos[:, 1:, :]),
            (pos[:-1, :, :], pos[1:, :, :]),
        ]
    else:
        raise InputError(f"dims must be 2 or 3, got {dims}")

    a = np.concatenate([p.ravel() for p, _ in pairs])
    b = np.concatenate([q.ravel() for _, q in pairs])
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    off = hi - lo >= 2  # grid edges at path distance 1 are exactly the path edges
    lo, hi = lo[off], hi[off]
    order = np.lexsort((hi, lo))
    return HeavyPathGraph.from_arrays(_draw_tree_r(n, seed, tree_r_range), lo[order], hi[order])


def assign_uniform_stretch(g: HeavyPathGraph) -> HeavyPathGraph:
    """Set each off-edge resistance to its tree-path resistance (stretch 1)."""
    if g.off_r is not None:
        raise InputError("off-edge resistances already assigned")
    return g.with_off_r(g.off_path_r.copy())


def assign_exponential_stretch(g: HeavyPathGraph, mean: float = DEFAULT_EXP_MEAN, seed: int = 0) -> HeavyPathGraph:
    """Give each cycle a stretch drawn from Exponential(mean), clamped below."""
    if g.off_r is not None:
        raise InputError("off-edge resistances already assigned")
    if mean <= 0:
        raise InputError("exponential stretch mean must be positive")
    s = _rng(_STREAM_STRETCH, seed).exponential(mean, g.m_off)
    np.clip(s, MIN_STRETCH, None, out=s)
    return g.with_off_r(g.off_path_r / s)


def gen_rhs(g: HeavyPathGraph, kind: str, seed: int = 0) -> np.ndarray:
    """Demand vector: 'random' forms b = Lx for uniform random x; 'unit'
    routes one unit of flow across the whole path."""
    if kind == "random":
        x = _rng(_STREAM_RHS, seed).random(g.n)
        return laplacian_apply(g, x)
    if kind == "unit":
        b = np.zeros(g.n)
        b[0] = 1.0
        b[-1] = -1.0
        return b
    raise InputError(f"unknown rhs kind {kind!r} (expected 'random' or 'unit')")


@dataclass(frozen=True)
class RhsSpec:
    kind: str  # "random" | "unit"
    seed: int = 0

    def build(self, g: HeavyPathGraph) -> np.ndarray:
        return gen_rhs(g, self.kind, self.seed)


@dataclass(frozen=True)
class ModelSpec:
    """One benchmark problem family member; ``build`` is fully deterministic.

    model: "fixed:<hop>", "random", "random:2n", "random:<k>", "mesh2d", "mesh3d"
    stretch: "uniform", "exp" or "exp:<mean>"
    """

    model: str
    n: int
    stretch: str = "uniform"
    seed: int = 0

    def build(self) -> HeavyPathGraph:
        g = self._skeleton()
        kind, mean = parse_stretch(self.stretch)
        if kind == "uniform":
            return assign_uniform_stretch(g)
        return assign_exponential_stretch(g, mean, self.seed)

    def _skeleton(self) -> HeavyPathGraph:
        name = self.model
        if name.startswith("fixed:"):
            return gen_fixed_length(self.n, int(name.split(":", 1)[1]), self.seed)
        if name == "random":
            return gen_random_length(self.n, self.n, self.seed)
        if name.startswith("random:"):
            arg = name.split(":", 1)[1]
            k = 2 * self.n if arg == "2n" else int(arg)
            return gen_random_length(self.n, k, self.seed)
        if name == "mesh2d":
            return gen_mesh(self.n, 2, self.seed)
        if name == "mesh3d":
            return gen_mesh(self.n, 3, self.seed)
        raise InputError(f"unknown model {name!r} (expected one of {MODEL_NAMES})")


def parse_stretch(spec: str) -> tuple[str, float]:
    if spec == "uniform":
        return "uniform", 0.0
    if spec == "exp":
        return "exp", DEFAULT_EXP_MEAN
    if spec.startswith("exp:"):
        mean = float(spec.split(":", 1)[1])
        if mean <= 0:
            raise InputError("exponential stretch mean must be positive")
        return "exp", mean
    raise InputError(f"unknown stretch spec {spec!r} (expected 'uniform' or 'exp:<mean>')")
