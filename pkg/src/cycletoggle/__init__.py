"""Cycle-toggling dual-flow Laplacian solvers on heavy path graphs.

Public surface: graph types and flow math (:mod:`cycletoggle.core`), the
benchmark graph family (:mod:`cycletoggle.generators`), four interchangeable
cycle-toggle engines (:mod:`cycletoggle.togglers`), the sampling solver driver
(:mod:`cycletoggle.solver`), a Jacobi-PCG baseline (:mod:`cycletoggle.pcg`), and
the benchmark harness (:mod:`cycletoggle.bench`, CLI in
:mod:`cycletoggle.cli`).
"""

from .core import (
    FlowState,
    GeneralTreeGraph,
    GraphFormatError,
    HeavyPathGraph,
    InputError,
    InternalError,
    PathAggregate,
    apply_cycle_toggle,
    cycle_imbalance,
    edge_stretch,
    edge_stretches,
    flow_energy,
    init_tree_flow,
    laplacian_apply,
    read_graph,
    relative_residual,
    total_stretch,
    tree_induced_potentials,
    write_graph,
)
from .generators import ModelSpec, RhsSpec, gen_rhs
from .solver import SamplingTable, SolveConfig, SolveReport, build_sampler, solve
from .pcg import PcgConfig, pcg_solve

__all__ = [
    "FlowState",
    "GeneralTreeGraph",
    "GraphFormatError",
    "HeavyPathGraph",
    "InputError",
    "InternalError",
    "ModelSpec",
    "PathAggregate",
    "PcgConfig",
    "RhsSpec",
    "SamplingTable",
    "SolveConfig",
    "SolveReport",
    "apply_cycle_toggle",
    "build_sampler",
    "cycle_imbalance",
    "edge_stretch",
    "edge_stretches",
    "flow_energy",
    "gen_rhs",
    "init_tree_flow",
    "laplacian_apply",
    "pcg_solve",
    "read_graph",
    "relative_residual",
    "solve",
    "total_stretch",
    "tree_induced_potentials",
    "write_graph",
]

__version__ = "0.1.0"
