"""Benchmark harness: suite runner, CSV records, performance profiles, and
the stretch / weak-scaling / phase-breakdown tables.

A suite is a list of blocks, each a cross product of models x sizes x stretch
kinds x RHS kinds x engines.  Every (problem, solver) cell yields one
:class:`BenchRecord` row; partial failures are recorded in the row's ``error``
column and the suite continues.  Timing isolation: ``wall_ns`` covers cycle
toggling only; residual checking and sampler/engine setup are separately
columned, so per-toggle comparisons measure toggling alone.

Analysis outputs are plot-ready CSVs; plotting itself is out of scope.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import pcg
from .core import InputError, total_stretch
from .generators import ModelSpec, gen_rhs
from .solver import ENGINES, SolveConfig, solve

TOGGLER_ENGINES = ("path-bst", "hld", "dnc-path", "dnc-general")
ALL_SOLVERS = ENGINES + ("pcg",)

CSV_COLUMNS = [
    "model", "n", "stretch", "rhs", "seed", "engine", "converged", "toggles",
    "wall_ns", "avg_toggle_ns", "check_ns", "setup_ns", "m_off", "total_stretch",
    "final_residual", "phase_restrict_ns", "phase_solve_ns", "phase_prolong_ns",
    "error",
]


@dataclass
class BenchRecord:
    """One (problem, solver) run; one CSV row."""

    model: str
    n: int
    stretch: str
    rhs: str
    seed: int
    engine: str
    converged: bool = False
    toggles: int = 0
    wall_ns: int = 0
    avg_toggle_ns: float = 0.0
    check_ns: int = 0
    setup_ns: int = 0
    m_off: int = 0
    total_stretch: float = 0.0
    final_residual: float = math.inf
    phase_restrict_ns: int = 0
    phase_solve_ns: int = 0
    phase_prolong_ns: int = 0
    error: str = ""

    def problem_key(self):
        return (self.model, self.n, self.stretch, self.rhs, self.seed)

    def to_row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]

    @classmethod
    def from_row(cls, row):
        kw = {}
        for f, val in zip(fields(cls), row):
            if f.type == "int":
                kw[f.name] = int(val)
            elif f.type == "float":
                kw[f.name] = float(val)
            elif f.type == "bool":
                kw[f.name] = val in ("True", "true", "1")
            else:
                kw[f.name] = val
        return cls(**kw)


def valid_size(model: str, n: int) -> int:
    """Snap a requested size to the nearest valid one for the model."""
    if model.startswith("fixed:"):
        # below 2*hop the instance degenerates to a handful of cycles
        hop = int(model.split(":", 1)[1])
        return max(n, 2 * hop)
    if model == "mesh2d":
        return max(2, round(math.sqrt(n))) ** 2
    if model == "mesh3d":
        return max(2, round(n ** (1 / 3))) ** 3
    return n


def run_cell(model: str, n: int, stretch: str, rhs: str, engine: str,
             seed: int = 0, tolerance: float = 1e-5):
    """Run one (problem, solver) cell; returns (record, report-or-None).
    Failures land in the record's error column, never raised."""
    n = valid_size(model, n)
    rec = BenchRecord(model=model, n=n, stretch=stretch, rhs=rhs, seed=seed, engine=engine)
    try:
        g = ModelSpec(model, n, stretch, seed).build()
        b = gen_rhs(g, rhs, seed)
        rec.m_off = g.m_off
        rec.total_stretch = total_stretch(g)
        if engine == "pcg":
            rep = pcg.solve_report(g, b, pcg.PcgConfig(tolerance=tolerance))
        else:
            rep = solve(g, b, SolveConfig(engine=engine, tolerance=tolerance, seed=seed))
        rec.converged = rep.converged
        rec.toggles = rep.toggles
        rec.wall_ns = rep.wall_ns
        rec.avg_toggle_ns = rep.avg_toggle_ns
        rec.check_ns = rep.check_ns
        rec.setup_ns = rep.setup_ns
        rec.final_residual = rep.final_residual
        rec.phase_restrict_ns = rep.phase_ns.get("restrict", 0)
        rec.phase_solve_ns = rep.phase_ns.get("solve", 0)
        rec.phase_prolong_ns = rep.phase_ns.get("prolong", 0)
        return rec, rep
    except Exception as exc:  # record and continue: one bad cell must not kill a suite
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec, None


@dataclass
class SuiteBlock:
    models: list
    sizes: list
    stretches: list
    rhs_kinds: list
    engines: list

    def cells(self):
        for model in self.models:
            for n in self.sizes:
                for stretch in self.stretches:
                    for rhs in self.rhs_kinds:
                        for engine in self.engines:
                            yield model, n, stretch, rhs, engine


@dataclass
class SuiteSpec:
    blocks: list
    seed: int = 0
    tolerance: float = 1e-5

    def cells(self):
        for block in self.blocks:
            yield from block.cells()


ALL_MODELS = ("fixed:1000", "fixed:2", "random", "mesh2d", "mesh3d")


def suite_preset(name: str) -> SuiteSpec:
    """Named suites: 'desk' (full engine matrix at small sizes plus a scaling
    block up to 1e5), 'fig4' (toggles-vs-stretch sizes), 'smoke' (seconds)."""
    if name == "desk":
        return SuiteSpec(blocks=[
            SuiteBlock(list(ALL_MODELS), [1000, 10_000], ["uniform", "exp"],
                       ["unit", "random"], list(TOGGLER_ENGINES) + ["pcg"]),
            SuiteBlock(["fixed:2", "random"], [50_000, 100_000], ["uniform", "exp"],
                       ["unit"], ["path-bst"]),
        ])
    if name == "fig4":
        return SuiteSpec(blocks=[
            SuiteBlock(["fixed:2", "random"], [1000, 10_000, 50_000, 100_000],
                       ["uniform", "exp"], ["unit"], ["path-bst"]),
        ])
    if name == "smoke":
        return SuiteSpec(blocks=[
            SuiteBlock(["fixed:2", "random"], [500], ["uniform"], ["unit"],
                       list(TOGGLER_ENGINES) + ["naive", "pcg"]),
        ])
    raise InputError(f"unknown suite preset {name!r} (expected desk, fig4, or smoke)")


def run_suite(suite: SuiteSpec, out_csv=None, log_path=None, workers: int = 1,
              progress=None) -> list:
    """Run every cell; returns records.  Sequential runs stream the CSV and
    JSONL log row by row, so long suites are observable (and salvageable)
    while they run."""
    cells = list(suite.cells())
    records = []
    log = open(log_path, "w") if log_path else None
    csv_fh = open(out_csv, "w", newline="") if out_csv and workers == 1 else None
    try:
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [
                    pool.submit(run_cell, model, n, stretch, rhs, engine,
                                suite.seed, suite.tolerance)
                    for model, n, stretch, rhs, engine in cells
                ]
                results = [f.result() for f in futs]
        else:
            if csv_fh:
                csv.writer(csv_fh).writerow(CSV_COLUMNS)
            results = []
            for model, n, stretch, rhs, engine in cells:
                result = run_cell(model, n, stretch, rhs, engine,
                                  suite.seed, suite.tolerance)
                results.append(result)
                if csv_fh:
                    csv.writer(csv_fh).writerow(result[0].to_row())
                    csv_fh.flush()
                if log and result[1] is not None:
                    log.write(result[1].to_json() + "\n")
                    log.flush()
                if progress:
                    progress(result[0])
        for rec, rep in results:
            records.append(rec)
            if workers > 1 and log and rep is not None:
                log.write(rep.to_json() + "\n")
    finally:
        if log:
            log.close()
        if csv_fh:
            csv_fh.close()
    if out_csv and workers > 1:
        write_records(records, out_csv)
    return records


def write_records(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow(rec.to_row())


def read_records(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_COLUMNS:
        raise InputError(f"{path}: not a benchmark CSV (header mismatch)")
    return [BenchRecord.from_row(r) for r in rows[1:]]


# -- analysis -----------------------------------------------------------------


@dataclass
class PerfProfile:
    """Dolan-More performance profile: per solver, the fraction of problems
    within a factor tau of the per-problem best."""

    solvers: list
    taus: np.ndarray
    rho: dict  # solver -> np.ndarray aligned with taus

    def value(self, solver, tau):
        i = np.searchsorted(self.taus, tau, side="right") - 1
        return float(self.rho[solver][i]) if i >= 0 else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau"] + list(self.solvers))
            for i, tau in enumerate(self.taus):
                w.writerow([tau] + [self.rho[s][i] for s in self.solvers])


def perf_profile(records, metric: str = "avg_toggle_ns") -> PerfProfile:
    records = [r for r in records if not r.error]
    if not records:
        raise InputError("no records to profile")
    solvers = sorted({r.engine for r in records})
    if len(solvers) < 2:
        raise InputError("performance profiles need at least two solvers")
    by_problem = {}
    for r in records:
        by_problem.setdefault(r.problem_key(), {})[r.engine] = r
    ratios = {s: [] for s in solvers}
    single = 0
    for key, runs in by_problem.items():
        if len(runs) < 2:
            single += 1  # nothing to compare against on this problem
            continue
        best = min((getattr(r, metric) for r in runs.values() if r.converged), default=None)
        if best is None:
            raise InputError(f"problem {key} was solved by no solver")
        if best == 0:
            # e.g. a system solved by tree routing alone: no toggle time to compare
            warnings.warn(f"dropping degenerate problem {key} (best {metric} is 0)")
            continue
        for s in solvers:
            r = runs.get(s)
            if r is None or not r.converged:
                ratios[s].append(math.inf)
            else:
                ratios[s].append(getattr(r, metric) / best)
    if single:
        warnings.warn(f"dropped {single} problems attempted by fewer than two solvers")
    if not any(ratios[s] for s in solvers):
        raise InputError("no non-degenerate problems to profile")
    finite = sorted({v for vals in ratios.values() for v in vals if math.isfinite(v)})
    taus = np.array(finite if finite else [1.0])
    rho = {
        s: np.array([np.mean([v <= t for v in ratios[s]]) for t in taus])
        for s in solvers
    }
    assert all(np.all(np.diff(r) >= 0) for r in rho.values())
    return PerfProfile(solvers, taus, rho)


def _empty(table_name):
    warnings.warn(f"insufficient data for {table_name}; emitting empty table")
    return []


def stretch_vs_toggles(records):
    """Toggles-to-convergence vs m + S, with log-log slopes.

    Returns (rows, slopes): rows (model, stretch, rhs, n, m_plus_s, toggles);
    slopes per (model, stretch, rhs) group with >= 2 sizes, plus 'pooled'.
    """
    rows = []
    for r in records:
        if r.converged and r.toggles > 0 and r.engine != "pcg" and not r.error:
            m_plus_s = (r.n - 1 + r.m_off) + r.total_stretch
            rows.append((r.model, r.stretch, r.rhs, r.n, m_plus_s, r.toggles))
    if not rows:
        return _empty("stretch_vs_toggles"), {}
    groups = {}
    for model, stretch, rhs, n, ms, tg in rows:
        groups.setdefault((model, stretch, rhs), []).append((ms, tg))
    slopes = {}
    pooled = []
    for key, pts in groups.items():
        pooled.extend(pts)
        if len({ms for ms, _ in pts}) >= 2:
            lx = np.log([ms for ms, _ in pts])
            ly = np.log([tg for _, tg in pts])
            slopes[key] = float(np.polyfit(lx, ly, 1)[0])
    if len({ms for ms, _ in pooled}) >= 2:
        lx = np.log([ms for ms, _ in pooled])
        ly = np.log([tg for _, tg in pooled])
        slopes["pooled"] = float(np.polyfit(lx, ly, 1)[0])
    return rows, slopes


def weak_scaling(records):
    """Average per-toggle time as a function of problem size, per solver."""
    rows = [
        (r.model, r.stretch, r.rhs, r.engine, r.n, r.avg_toggle_ns)
        for r in sorted(records, key=lambda r: (r.model, r.stretch, r.rhs, r.engine, r.n))
        if r.converged and not r.error
    ]
    return rows if rows else _empty("weak_scaling")


def phase_breakdown(records):
    """Restrict / solve / prolong time shares for divide-and-conquer runs."""
    rows = []
    for r in records:
        if r.engine.startswith("dnc") and not r.error:
            total = r.phase_restrict_ns + r.phase_solve_ns + r.phase_prolong_ns
            if total > 0:
                rows.append((
                    r.model, r.stretch, r.rhs, r.engine, r.n,
                    r.phase_restrict_ns, r.phase_solve_ns, r.phase_prolong_ns,
                    r.phase_restrict_ns / total, r.phase_solve_ns / total,
                    r.phase_prolong_ns / total,
                ))
    return rows if rows else _empty("phase_breakdown")


def write_table(rows, header, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
