"""Sampling cycle-toggling solver driver.

Initializes a feasible tree flow for the demands, then repeatedly samples a
fundamental cycle with probability proportional to 1 + stretch and brings it
to its minimum-energy state through one of the interchangeable engines.  The
driver owns the off-tree edge flows and hands engines only tree paths; every
``check_interval`` toggles it extracts potentials from the tree flow and stops
once the relative residual meets the tolerance.

Engine lanes: the online engines (naive, path-bst, hld) toggle one sampled
cycle at a time; the offline engines (dnc-path, dnc-general) preselect a
batch from the same distribution and execute it by recursive contraction,
checking the residual between batches only.  With a fixed seed the sample
stream is identical across all online engines.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    FlowState,
    GeneralTreeGraph,
    HeavyPathGraph,
    InputError,
    InternalError,
    edge_stretches,
    flow_energy,
    init_tree_flow,
    net_vertex_flow,
    relative_residual,
    total_stretch,
    tree_induced_potentials,
    validate_demand,
)
from .togglers.base import NaivePathToggler
from .togglers.dnc import DncPathToggler, DncTreeToggler
from .togglers.hld import HldToggler
from .togglers.pathbst import PathBstToggler

_STREAM_SAMPLER = 5

ONLINE_ENGINES = ("naive", "path-bst", "hld")
DNC_ENGINES = ("dnc-path", "dnc-general")
ENGINES = ONLINE_ENGINES + DNC_ENGINES

# Toggle budget: sampling solvers are expected to converge well inside
# 50 * (m + S); non-convergence past that cap is reported, not raised.
MAX_TOGGLE_FACTOR = 50


class SamplingTable:
    """Inverse-CDF sampler over off-edges with weight 1 + stretch."""

    def __init__(self, weights):
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if weights.size == 0:
            raise InputError("sampler needs at least one off-edge")
        if not np.all(weights > 0):
            raise InputError("sampling weights must be positive")
        self.cumulative = np.cumsum(weights)
        if weights.size > 1 and not np.all(np.diff(self.cumulative) > 0):
            raise InputError("cumulative weights must be strictly increasing")
        self.total = float(self.cumulative[-1])

    def sample(self, rng, k: int) -> np.ndarray:
        """Draw k off-edge indices i.i.d. via binary search on uniform variates."""
        u = rng.random(k) * self.total
        return np.searchsorted(self.cumulative, u, side="right").astype(np.int64)

    def probabilities(self) -> np.ndarray:
        p = np.diff(self.cumulative, prepend=0.0)
        return p / self.total


def build_sampler(g: HeavyPathGraph) -> SamplingTable:
    return SamplingTable(1.0 + edge_stretches(g))


def preselect_batch(g, sampler: SamplingTable, size: int, rng) -> np.ndarray:
    """Preselect a cycle batch for the offline engines; order is significant."""
    return sampler.sample(rng, size)


@dataclass
class SolveConfig:
    engine: str = "path-bst"
    tolerance: float = 1e-5
    check_interval: int | None = None  # default: total edge count
    max_toggles: int | None = None  # default: 50 * (m + S)
    batch_size: int | None = None  # dnc engines; default: off-edge count
    base_threshold: int = 32
    seed: int = 0
    validate_invariants: bool = False  # per-toggle energy/conservation checks (slow)

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise InputError(f"unknown engine {self.engine!r} (expected one of {ENGINES})")
        if self.tolerance <= 0:
            raise InputError("tolerance must be positive")
        if self.check_interval is not None and self.check_interval < 1:
            raise InputError("check_interval must be >= 1")


@dataclass
class SolveReport:
    engine: str
    converged: bool
    toggles: int
    wall_ns: int
    residuals: list  # [(toggle count, relative residual), ...]
    x: np.ndarray | None = None
    flow: FlowState | None = None
    energy: float | None = None
    phase_ns: dict = field(default_factory=lambda: {"restrict": 0, "solve": 0, "prolong": 0})
    check_ns: int = 0
    setup_ns: int = 0

    @property
    def avg_toggle_ns(self) -> float:
        return self.wall_ns / self.toggles if self.toggles else 0.0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1][1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "engine": self.engine,
                "converged": self.converged,
                "toggles": self.toggles,
                "wall_ns": self.wall_ns,
                "avg_toggle_ns": self.avg_toggle_ns,
                "residuals": [[int(t), float(r)] for t, r in self.residuals],
                "phase_ns": dict(self.phase_ns),
            }
        )


def make_engine(g: HeavyPathGraph, name: str, f_tree, base_threshold=32):
    """Bind an engine to the graph's tree with the given initial tree flows."""
    if name == "naive":
        return NaivePathToggler(g.tree_r, f_tree)
    if name == "path-bst":
        return PathBstToggler(g.tree_r, f_tree)
    if name == "hld":
        t = GeneralTreeGraph.from_path(g)
        return HldToggler(t.parent, t.tree_r, f_tree, t.depth)
    if name == "dnc-path":
        return DncPathToggler(g, f_tree, base_threshold=base_threshold)
    if name == "dnc-general":
        t = GeneralTreeGraph.from_path(g)
        return DncTreeToggler(t.parent, t.tree_r, f_tree, t.depth, base_threshold=base_threshold)
    raise InputError(f"unknown engine {name!r}")


def toggle_once(engine, off_u, off_v, off_r, f_off, e: int) -> float:
    """Bring one fundamental cycle to its minimum-energy state; returns the delta."""
    u = int(off_u[e])
    v = int(off_v[e])
    agg = engine.query(v, u)  # tree path traversed backward v -> u
    num = off_r[e] * f_off[e] + agg.sum_rf
    delta = -num / (off_r[e] + agg.sum_r)
    f_off[e] += delta
    engine.update(v, u, delta)
    return delta


def solve(g: HeavyPathGraph, b, cfg: SolveConfig | None = None) -> SolveReport:
    """Solve Lx = b by cycle toggling; never raises on non-convergence."""
    cfg = cfg or SolveConfig()
    b = validate_demand(b, g.n)
    f0 = init_tree_flow(g, b)

    if g.m_off == 0:
        # tree systems are solved exactly by the routing initialization
        x = tree_induced_potentials(g, f0)
        res = relative_residual(g, x, b)
        return SolveReport(
            engine=cfg.engine, converged=res <= cfg.tolerance, toggles=0, wall_ns=0,
            residuals=[(0, res)], x=x, flow=f0, energy=flow_energy(g, f0),
        )

    t_setup = time.perf_counter_ns()
    off_r = g.require_off_r()
    path_r = g.off_path_r
    sampler = build_sampler(g)
    engine = make_engine(g, cfg.engine, f0.f_tree, cfg.base_threshold)
    rng = np.random.default_rng([_STREAM_SAMPLER, cfg.seed])
    setup_ns = time.perf_counter_ns() - t_setup

    check_interval = cfg.check_interval or g.m
    if cfg.max_toggles is not None:
        max_toggles = cfg.max_toggles
    else:
        max_toggles = math.ceil(MAX_TOGGLE_FACTOR * (g.m + total_stretch(g)))
    if cfg.engine in DNC_ENGINES:
        block = cfg.batch_size or g.m_off
    else:
        block = check_interval

    f_off = f0.f_off
    report = SolveReport(
        engine=cfg.engine, converged=False, toggles=0, wall_ns=0, residuals=[],
        setup_ns=setup_ns,
    )
    validator = _InvariantValidator(g, b) if cfg.validate_invariants else None

    def check_residual(toggles):
        t0 = time.perf_counter_ns()
        f_tree = engine.snapshot_flows()
        x = tree_induced_potentials(g, FlowState(f_tree, f_off))
        res = relative_residual(g, x, b)
        report.residuals.append((toggles, res))
        report.check_ns += time.perf_counter_ns() - t0
        return f_tree, x, res

    f_tree, x, res = check_residual(0)
    toggles = 0
    while res > cfg.tolerance and toggles < max_toggles:
        k = min(block, max_toggles - toggles)
        t0 = time.perf_counter_ns()
        samples = sampler.sample(rng, k)
        if validator is not None:
            validator.run(engine, g, f_off, samples, cfg)
        elif cfg.engine in DNC_ENGINES:
            engine.execute(g.off_u, g.off_v, off_r, f_off, samples)
        else:
            engine.toggle_cycles(g.off_u, g.off_v, off_r, path_r, f_off, samples)
        report.wall_ns += time.perf_counter_ns() - t0
        toggles += k
        f_tree, x, res = check_residual(toggles)

    report.toggles = toggles
    report.converged = bool(res <= cfg.tolerance)
    report.x = x
    report.flow = FlowState(f_tree, f_off)
    report.energy = flow_energy(g, report.flow)
    if cfg.engine in DNC_ENGINES:
        report.phase_ns = dict(engine.phase_ns)
    return report


class _InvariantValidator:
    """Per-toggle energy monotonicity and flow-conservation checking (test mode)."""

    def __init__(self, g, b):
        self.b = b
        self.b_scale = max(float(np.abs(b).sum()), 1.0)
        self.energy = None

    def run(self, engine, g, f_off, samples, cfg):
        if cfg.engine in DNC_ENGINES:
            # contracted state is not observable mid-batch; check per batch
            before = self._energy(engine, g, f_off)
            engine.execute(g.off_u, g.off_v, g.off_r, f_off, samples)
            after = self._energy(engine, g, f_off)
            self._check(before, after, engine, g, f_off)
            return
        for e in samples:
            before = self._energy(engine, g, f_off)
            toggle_once(engine, g.off_u, g.off_v, g.off_r, f_off, int(e))
            after = self._energy(engine, g, f_off)
            self._check(before, after, engine, g, f_off)

    def _energy(self, engine, g, f_off):
        return flow_energy(g, FlowState(engine.snapshot_flows(), f_off))

    def _check(self, before, after, engine, g, f_off):
        if after > before * (1 + 1e-9) + 1e-12:
            raise InternalError(f"energy increased: {before} -> {after}")
        net = net_vertex_flow(g, FlowState(engine.snapshot_flows(), f_off))
        if np.abs(net - self.b).max() > 1e-10 * self.b_scale:
            raise InternalError("flow conservation violated")
