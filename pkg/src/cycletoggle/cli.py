"""Command-line interface.

Subcommands: ``generate`` writes a graph file plus a key=value metadata
sidecar; ``solve`` runs one solver on a graph file and prints its JSON report
(exit 0 on convergence, 3 on clean non-convergence); ``bench`` runs a suite
into a CSV (plus an optional JSONL report log); ``analyze`` turns a results
CSV into plot-ready profile/table CSVs.

Relative output paths resolve against $CYCLETOGGLE_OUT when it is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench
from .core import (
    GraphFormatError,
    InputError,
    read_graph,
    total_stretch,
    write_graph,
    write_metadata,
)
from .generators import ModelSpec, gen_rhs
from .solver import ENGINES, SolveConfig, solve
from .pcg import PcgConfig, solve_report

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 3


def _out_path(p) -> Path:
    p = Path(p)
    base = os.environ.get("CYCLETOGGLE_OUT")
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def cmd_generate(args) -> int:
    spec = ModelSpec(args.model, args.n, args.stretch, args.seed)
    g = spec.build()
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_graph(g, out)
    write_metadata(
        out.with_suffix(out.suffix + ".meta"),
        {
            "model": args.model,
            "n": g.n,
            "m_off": g.m_off,
            "stretch": args.stretch,
            "seed": args.seed,
            "total_stretch": repr(total_stretch(g)),
        },
    )
    print(f"wrote {out} (n={g.n}, m_off={g.m_off}, total_stretch={total_stretch(g):.6g})")
    return EXIT_OK


def cmd_solve(args) -> int:
    g = read_graph(args.graph)
    b = gen_rhs(g, args.rhs, args.seed)
    if args.engine == "pcg":
        rep = solve_report(g, b, PcgConfig(tolerance=args.tol))
    else:
        rep = solve(
            g,
            b,
            SolveConfig(
                engine=args.engine,
                tolerance=args.tol,
                seed=args.seed,
                check_interval=args.check_interval,
                max_toggles=args.max_toggles,
                batch_size=args.batch_size,
            ),
        )
    print(rep.to_json())
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_bench(args) -> int:
    if args.suite.endswith(".json"):
        with open(args.suite) as fh:
            doc = json.load(fh)
        blocks = [bench.SuiteBlock(**blk) for blk in doc["blocks"]]
        suite = bench.SuiteSpec(
            blocks, seed=doc.get("seed", args.seed), tolerance=doc.get("tolerance", 1e-5)
        )
    else:
        suite = bench.suite_preset(args.suite)
        suite.seed = args.seed
    workers = 1 if args.sequential_timing else args.workers
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log = _out_path(args.log) if args.log else None

    def progress(rec):
        status = "ok" if not rec.error else "ERROR"
        conv = "converged" if rec.converged else "not-converged"
        print(
            f"[{rec.model} n={rec.n} {rec.stretch} rhs={rec.rhs} {rec.engine}] "
            f"{status} {conv} toggles={rec.toggles}",
            file=sys.stderr,
        )

    records = bench.run_suite(suite, out_csv=out, log_path=log, workers=workers,
                              progress=progress if args.verbose else None)
    bad = sum(1 for r in records if r.error)
    print(f"wrote {out}: {len(records)} rows ({bad} failed cells)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    records = bench.read_records(args.records)
    out_dir = _out_path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profile_records = [r for r in records if r.engine in bench.TOGGLER_ENGINES]
    if profile_records:
        prof = bench.perf_profile(profile_records, metric=args.metric)
        prof.to_csv(out_dir / "perf_profile.csv")
    rows, slopes = bench.stretch_vs_toggles(records)
    bench.write_table(
        rows, ["model", "stretch", "rhs", "n", "m_plus_s", "toggles"],
        out_dir / "stretch_vs_toggles.csv",
    )
    with open(out_dir / "stretch_slopes.csv", "w") as fh:
        fh.write("group,slope\n")
        for key, slope in slopes.items():
            name = key if isinstance(key, str) else "/".join(map(str, key))
            fh.write(f"{name},{slope}\n")
    bench.write_table(
        bench.weak_scaling(records),
        ["model", "stretch", "rhs", "engine", "n", "avg_toggle_ns"],
        out_dir / "weak_scaling.csv",
    )
    bench.write_table(
        bench.phase_breakdown(records),
        ["model", "stretch", "rhs", "engine", "n", "restrict_ns", "solve_ns",
         "prolong_ns", "restrict_share", "solve_share", "prolong_share"],
        out_dir / "phase_breakdown.csv",
    )
    print(f"wrote analysis CSVs to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cycletoggle",
        description="Cycle-toggling Laplacian solvers on heavy path graphs",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a benchmark graph file")
    g.add_argument("--model", required=True,
                   help="fixed:<hop> | random | random:2n | random:<k> | mesh2d | mesh3d")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--stretch", default="uniform", help="uniform | exp | exp:<mean>")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    s = sub.add_parser("solve", help="solve one system and print a JSON report")
    s.add_argument("--graph", required=True)
    s.add_argument("--rhs", choices=["random", "unit"], default="unit")
    s.add_argument("--engine", choices=list(ENGINES) + ["pcg"], default="path-bst")
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--check-interval", type=int, default=None)
    s.add_argument("--max-toggles", type=int, default=None)
    s.add_argument("--batch-size", type=int, default=None)
    s.set_defaults(fn=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark suite into a CSV")
    b.add_argument("--suite", default="desk", help="desk | fig4 | smoke | <file>.json")
    b.add_argument("--out", required=True)
    b.add_argument("--log", default=None, help="JSONL per-run report log")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--sequential-timing", action="store_true",
                   help="pin cells to one worker for low-noise timing")
    b.add_argument("--verbose", action="store_true")
    b.set_defaults(fn=cmd_bench)

    a = sub.add_parser("analyze", help="emit profile/table CSVs from a results CSV")
    a.add_argument("--records", required=True)
    a.add_argument("--out-dir", required=True)
    a.add_argument("--metric", default="avg_toggle_ns")
    a.set_defaults(fn=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except GraphFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
