import csv
import math

import numpy as np
import pytest

from cycletoggle.bench import (
    BenchRecord,
    SuiteBlock,
    SuiteSpec,
    perf_profile,
    phase_breakdown,
    read_records,
    run_cell,
    run_suite,
    stretch_vs_toggles,
    suite_preset,
    valid_size,
    weak_scaling,
    write_records,
)
from cycletoggle.core import InputError


def rec(model="fixed:2", n=100, stretch="uniform", rhs="unit", seed=0, engine="path-bst",
        converged=True, toggles=100, avg=1000.0, **kw):
    return BenchRecord(model=model, n=n, stretch=stretch, rhs=rhs, seed=seed,
                       engine=engine, converged=converged, toggles=toggles,
                       avg_toggle_ns=avg, **kw)


class TestValidSize:
    def test_snapping(self):
        assert valid_size("mesh2d", 1000) == 1024
        assert valid_size("mesh2d", 10_000) == 10_000
        assert valid_size("mesh3d", 1000) == 1000
        assert valid_size("mesh3d", 10_000) == 10648
        assert valid_size("fixed:1000", 1000) == 2000
        assert valid_size("fixed:2", 1000) == 1000
        assert valid_size("random", 777) == 777


class TestRunCell:
    def test_success(self):
        record, report = run_cell("fixed:2", 200, "uniform", "unit", "path-bst", seed=1)
        assert record.converged
        assert record.error == ""
        assert record.toggles == report.toggles
        assert record.avg_toggle_ns == pytest.approx(report.wall_ns / report.toggles)
        assert record.m_off == 198
        assert record.total_stretch == pytest.approx(2 * 200 - 3)

    def test_pcg_cell(self):
        record, report = run_cell("fixed:2", 200, "uniform", "unit", "pcg", seed=1)
        assert record.engine == "pcg"
        assert record.converged
        assert record.toggles > 0  # iterations

    def test_failure_recorded_not_raised(self):
        record, report = run_cell("bogus-model", 100, "uniform", "unit", "path-bst")
        assert report is None
        assert record.error != ""
        assert not record.converged


class TestSuite:
    def test_cell_count(self):
        suite = SuiteSpec([SuiteBlock(["fixed:2", "random"], [100, 200], ["uniform"],
                                      ["unit"], ["naive", "path-bst", "hld", "dnc-path",
                                                 "dnc-general"])])
        assert len(list(suite.cells())) == 2 * 2 * 5

    def test_run_suite_roundtrip(self, tmp_path):
        suite = SuiteSpec([SuiteBlock(["fixed:2"], [150], ["uniform"], ["unit"],
                                      ["naive", "path-bst", "pcg"])], seed=3)
        out = tmp_path / "results.csv"
        log = tmp_path / "runs.jsonl"
        records = run_suite(suite, out_csv=out, log_path=log)
        assert len(records) == 3
        assert all(r.converged for r in records)
        back = read_records(out)
        assert [r.to_row() for r in back] == [r.to_row() for r in records]
        assert len(log.read_text().splitlines()) == 3

    def test_rerun_same_toggle_counts(self, tmp_path):
        suite = SuiteSpec([SuiteBlock(["random"], [200], ["exp"], ["unit"],
                                      ["path-bst", "hld"])], seed=9)
        a = run_suite(suite)
        b = run_suite(suite)
        assert [r.toggles for r in a] == [r.toggles for r in b]

    def test_presets_exist(self):
        for name in ("desk", "fig4", "smoke"):
            suite = suite_preset(name)
            assert len(list(suite.cells())) > 0
        with pytest.raises(InputError):
            suite_preset("galaxy")

    def test_csv_header_stable(self, tmp_path):
        out = tmp_path / "r.csv"
        write_records([rec()], out)
        with open(out) as fh:
            header = next(csv.reader(fh))
        assert header[:6] == ["model", "n", "stretch", "rhs", "seed", "engine"]


class TestPerfProfile:
    def test_single_best_everywhere(self):
        records = []
        for i in range(4):
            records.append(rec(n=100 + i, engine="path-bst", avg=100.0))
            records.append(rec(n=100 + i, engine="hld", avg=250.0))
        prof = perf_profile(records)
        assert prof.value("path-bst", 1.0) == 1.0
        assert prof.value("hld", 1.0) == 0.0
        assert prof.value("hld", 2.5) == 1.0

    def test_split_wins(self):
        # two solvers, times (1, 2) and (2, 1) on two problems
        records = [
            rec(n=1, engine="a", avg=1.0), rec(n=1, engine="b", avg=2.0),
            rec(n=2, engine="a", avg=2.0), rec(n=2, engine="b", avg=1.0),
        ]
        prof = perf_profile(records)
        for s in ("a", "b"):
            assert prof.value(s, 1.0) == 0.5
            assert prof.value(s, 2.0) == 1.0

    def test_hand_computed_three_solvers(self):
        # problem 1: a=1, b=3, c=4 ; problem 2: a=4, b=2, c=2 ; problem 3: only b converges
        records = [
            rec(n=1, engine="a", avg=1.0), rec(n=1, engine="b", avg=3.0), rec(n=1, engine="c", avg=4.0),
            rec(n=2, engine="a", avg=4.0), rec(n=2, engine="b", avg=2.0), rec(n=2, engine="c", avg=2.0),
            rec(n=3, engine="a", avg=1.0, converged=False),
            rec(n=3, engine="b", avg=5.0),
            rec(n=3, engine="c", avg=1.0, converged=False),
        ]
        prof = perf_profile(records)
        assert prof.value("a", 1.0) == pytest.approx(1 / 3)
        assert prof.value("b", 1.0) == pytest.approx(2 / 3)
        assert prof.value("c", 1.0) == pytest.approx(1 / 3)
        assert prof.value("a", 2.0) == pytest.approx(2 / 3)
        assert prof.value("a", 100.0) == pytest.approx(2 / 3)  # non-converged never counts
        assert prof.value("b", 1.5) == pytest.approx(2 / 3)
        assert prof.value("b", 3.0) == pytest.approx(1.0)
        assert prof.value("c", 1.0001) == pytest.approx(1 / 3)
        assert prof.value("c", 4.0) == pytest.approx(2 / 3)

    def test_monotone_and_terminal(self):
        rng = np.random.default_rng(0)
        records = []
        for i in range(10):
            for s in ("a", "b", "c"):
                records.append(rec(n=i, engine=s, avg=float(rng.uniform(1, 5))))
        prof = perf_profile(records)
        for s in prof.solvers:
            assert np.all(np.diff(prof.rho[s]) >= 0)
            assert prof.rho[s][-1] == 1.0

    def test_errors(self):
        with pytest.raises(InputError):
            perf_profile([])
        with pytest.raises(InputError):
            perf_profile([rec(engine="a")])

    def test_zero_toggle_problems_dropped(self):
        # a system solved by tree routing alone has no toggle time to compare
        records = [
            rec(n=1, engine="a", avg=0.0, toggles=0),
            rec(n=1, engine="b", avg=0.0, toggles=0),
            rec(n=2, engine="a", avg=1.0),
            rec(n=2, engine="b", avg=3.0),
        ]
        with pytest.warns(UserWarning):
            prof = perf_profile(records)
        assert prof.value("a", 1.0) == 1.0
        assert prof.value("b", 1.0) == 0.0
        with pytest.raises(InputError):
            with pytest.warns(UserWarning):
                perf_profile(records[:2])


class TestTables:
    def test_stretch_vs_toggles_constructed_slope(self):
        # toggles = 7 * (m + S) exactly -> slope 1
        records = []
        for n in (1000, 2000, 4000, 8000):
            m_off = n - 2
            s_total = float(2 * n - 3)
            toggles = int(7 * ((n - 1 + m_off) + s_total))
            records.append(rec(model="fixed:2", n=n, toggles=toggles,
                               m_off=m_off, total_stretch=s_total))
        rows, slopes = stretch_vs_toggles(records)
        assert len(rows) == 4
        assert slopes[("fixed:2", "uniform", "unit")] == pytest.approx(1.0, abs=0.01)
        assert slopes["pooled"] == pytest.approx(1.0, abs=0.01)

    def test_single_record_table(self):
        rows, slopes = stretch_vs_toggles([rec(m_off=98, total_stretch=197.0)])
        assert len(rows) == 1
        assert "pooled" not in slopes

    def test_empty_tables_warn(self):
        with pytest.warns(UserWarning):
            rows, _ = stretch_vs_toggles([])
        assert rows == []
        with pytest.warns(UserWarning):
            assert weak_scaling([]) == []
        with pytest.warns(UserWarning):
            assert phase_breakdown([rec()]) == []

    def test_weak_scaling_rows(self):
        records = [rec(n=n, engine="path-bst", avg=100.0 + n) for n in (100, 200)]
        rows = weak_scaling(records)
        assert [r[4] for r in rows] == [100, 200]

    def test_phase_breakdown_shares(self):
        r = rec(engine="dnc-path", phase_restrict_ns=60, phase_solve_ns=10,
                phase_prolong_ns=30)
        rows = phase_breakdown([r])
        assert rows[0][8] == pytest.approx(0.6)
        assert rows[0][9] == pytest.approx(0.1)
        assert rows[0][10] == pytest.approx(0.3)
