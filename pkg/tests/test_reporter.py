"""
test_reporter.py — Unit tests for run reports, CSV tables and the workbook.

Tests cover:
    - Report assembly, required keys and software stamp
    - Conversion of numpy values to plain YAML types
    - Schema and name-resolution validation
    - YAML round trip and CSV tables
    - Workbook sheets, KPI tiles and fold rows
"""

import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook

sys.path.insert(0, str(Path(__file__).parent.parent))

from src import __version__
from src.errors import PipelineError
from src.learn import EvalResult, FoldResult
from src.reporter import (
    REPORT_SCHEMA_VERSION,
    REQUIRED_KEYS,
    build_report,
    generate_workbook,
    load_report,
    to_plain,
    validate_report,
    write_report_yaml,
    write_run_outputs,
    write_table_csv,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _make_eval(auc: float = 0.8) -> EvalResult:
    folds = [
        FoldResult(subject_id="S01", n_train=10, n_test=5, seed=11, train_time_s=0.01,
                   weighted_f1=0.7, kappa=0.4, auc=0.8),
        FoldResult(subject_id="S02", n_train=10, n_test=5, seed=12, train_time_s=0.02,
                   weighted_f1=0.6, kappa=0.2, auc=None),
    ]
    return EvalResult(weighted_f1=0.65, kappa=0.3, auc=auc, folds=folds,
                      classifier={"kind": "random_forest"}, n_features=10)


def _make_report(**sections) -> dict:
    base = {
        "channels": ["FP1", "F7"],
        "evaluations": {"random_forest": _make_eval().to_dict()},
    }
    base.update(sections)
    return build_report(
        "evaluate",
        {"runtime": {"seed": 1, "threads": 2}},
        {"master": 1},
        2,
        {"features": 0.1234567, "loso_random_forest": 2.5},
        **base,
    )


def _selection_sections() -> dict:
    return {
        "channel_rankings": {
            "pvalue": {"method": "pvalue", "channels": [{"channel": "F7", "score": 12.0},
                                                        {"channel": "FP1", "score": 3.0}]},
        },
        "channel_curve": [
            {"k": 1, "channels": "F7", "n_features": 5, "weighted_f1": 0.7, "kappa": 0.4, "auc": 0.81,
             "total_train_time_s": 0.5, "median_train_time_s": 0.1},
            {"k": 2, "channels": "F7+FP1", "n_features": 10, "weighted_f1": 0.72, "kappa": 0.42, "auc": 0.83,
             "total_train_time_s": 0.9, "median_train_time_s": 0.2},
        ],
        "feature_selection": [{"method": "IFE", "selected": [{"name": "F7_Mean", "importance": 0.4}]}],
        "selection_comparison": [{"method": "IFE", "k": 1, "time_s": 0.05, "auc": 0.8}],
    }


# ---------------------------------------------------------------------------
# build_report / to_plain
# ---------------------------------------------------------------------------

class TestBuildReport:

    def test_required_keys_present(self):
        """Every required key is present and the schema version is current."""
        report = _make_report()
        for key in REQUIRED_KEYS:
            assert key in report
        assert report["schema_version"] == REPORT_SCHEMA_VERSION

    def test_software_stamp_has_package_version(self):
        """The software stamp names the package and the numerical stack."""
        software = _make_report()["software"]
        assert software["package"] == __version__
        for lib in ("python", "numpy", "scipy", "scikit-learn", "pywavelets"):
            assert lib in software

    def test_timings_rounded(self):
        """Stage timings are rounded to milliseconds."""
        assert _make_report()["timing"]["features"] == 0.123

    def test_none_sections_omitted(self):
        """A section passed as None is left out of the report."""
        report = _make_report(search=None)
        assert "search" not in report

    def test_no_wall_clock_timestamp(self):
        """Reports carry no creation time so reruns compare equal apart from timings."""
        report = _make_report()
        assert not any("time" == k or "created" in k for k in report)


class TestToPlain:

    def test_numpy_scalars_become_python(self):
        """numpy integers and floats convert to builtin int / float."""
        out = to_plain({"a": np.int64(3), "b": np.float64(0.5)})
        assert type(out["a"]) is int
        assert type(out["b"]) is float

    def test_arrays_and_tuples_become_lists(self):
        """Arrays and tuples convert to lists, recursively."""
        out = to_plain({"x": np.array([1, 2]), "y": (1, (2, 3))})
        assert out == {"x": [1, 2], "y": [1, [2, 3]]}

    def test_non_finite_becomes_none(self):
        """NaN and infinities are written as null."""
        out = to_plain([float("nan"), np.float64(np.inf), 1.0])
        assert out == [None, None, 1.0]

    def test_paths_become_strings(self):
        """Path values are written as strings."""
        assert to_plain({"p": Path("a/b.csv")}) == {"p": str(Path("a/b.csv"))}


# ---------------------------------------------------------------------------
# validate_report
# ---------------------------------------------------------------------------

class TestValidateReport:

    def test_valid_report_passes(self):
        """A complete report with resolvable names validates."""
        validate_report(_make_report(**_selection_sections()))

    def test_missing_key_raises(self):
        """A report without a required key is rejected."""
        report = _make_report()
        del report["seeds"]
        with pytest.raises(PipelineError, match="missing"):
            validate_report(report)

    def test_wrong_schema_version_raises(self):
        """An unknown schema version is rejected."""
        report = _make_report()
        report["schema_version"] = 99
        with pytest.raises(PipelineError, match="schema_version"):
            validate_report(report)

    def test_unknown_ranking_channel_raises(self):
        """A ranking naming a channel outside the report's channels is rejected."""
        sections = _selection_sections()
        sections["channel_rankings"]["pvalue"]["channels"].append({"channel": "O2", "score": 1.0})
        with pytest.raises(PipelineError, match="O2"):
            validate_report(_make_report(**sections))

    def test_invalid_feature_name_raises(self):
        """A selected name that is not a feature name is rejected."""
        sections = _selection_sections()
        sections["feature_selection"] = [{"method": "IFE", "selected": ["bogus"]}]
        with pytest.raises(PipelineError, match="bogus"):
            validate_report(_make_report(**sections))

    def test_selected_feature_on_unknown_channel_raises(self):
        """A selected feature on a channel outside the report is rejected."""
        sections = _selection_sections()
        sections["feature_selection"] = [{"method": "IFE", "selected": ["O2_Mean"]}]
        with pytest.raises(PipelineError, match="O2"):
            validate_report(_make_report(**sections))


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

class TestReportFiles:

    def test_yaml_round_trip(self, tmp_path):
        """A written report loads back equal to its plain form."""
        report = _make_report(**_selection_sections())
        path = write_report_yaml(report, tmp_path / "run.yaml")
        assert load_report(path) == to_plain(report)

    def test_written_twice_identical(self, tmp_path):
        """The same report written twice gives identical bytes."""
        report = _make_report(**_selection_sections())
        a = write_report_yaml(report, tmp_path / "a.yaml")
        b = write_report_yaml(report, tmp_path / "b.yaml")
        assert a.read_bytes() == b.read_bytes()

    def test_load_missing_raises(self, tmp_path):
        """Loading a missing report raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_report(tmp_path / "missing.yaml")

    def test_invalid_report_not_written(self, tmp_path):
        """An invalid report is rejected before anything is written."""
        report = _make_report()
        del report["config"]
        with pytest.raises(PipelineError):
            write_report_yaml(report, tmp_path / "bad.yaml")
        assert not (tmp_path / "bad.yaml").exists()

    def test_table_csv(self, tmp_path):
        """Records are written one per line under a single header."""
        rows = _selection_sections()["channel_curve"]
        path = write_table_csv(rows, tmp_path / "curve.csv")
        frame = pd.read_csv(path)
        assert len(frame) == 2
        assert list(frame.columns) == list(rows[0].keys())
        assert frame["auc"].tolist() == [0.81, 0.83]


class TestWorkbook:

    def test_sheet_names(self, tmp_path):
        """The workbook has Summary, Folds, Timing and Selection sheets."""
        path = generate_workbook(_make_report(**_selection_sections()), tmp_path / "run.xlsx")
        wb = load_workbook(path)
        assert wb.sheetnames == ["Summary", "Folds", "Timing", "Selection"]

    def test_kpi_tiles(self, tmp_path):
        """The Summary sheet shows the primary evaluation's AUC, F1 and kappa."""
        path = generate_workbook(_make_report(), tmp_path / "run.xlsx")
        ws = load_workbook(path)["Summary"]
        assert ws.cell(row=4, column=1).value == "AUC"
        assert ws.cell(row=5, column=1).value == "0.800"
        assert ws.cell(row=5, column=2).value == "0.650"
        assert ws.cell(row=5, column=3).value == "0.300"
        assert ws.cell(row=5, column=4).value == "2"

    def test_fold_rows(self, tmp_path):
        """The Folds sheet lists one row per LOSO fold."""
        path = generate_workbook(_make_report(), tmp_path / "run.xlsx")
        ws = load_workbook(path)["Folds"]
        assert ws.cell(row=3, column=2).value == "S01"
        assert ws.cell(row=4, column=2).value == "S02"
        assert ws.cell(row=4, column=7).value is None

    def test_bench_tables_on_timing_sheet(self, tmp_path):
        """Benchmark tables are appended below the stage timings."""
        bench = {"tables": {"channels": [{"channels": 2, "median_s": 0.1}, {"channels": 8, "median_s": 0.3}]}}
        path = generate_workbook(_make_report(bench=bench), tmp_path / "run.xlsx")
        ws = load_workbook(path)["Timing"]
        titles = [c.value for c in ws["A"] if isinstance(c.value, str)]
        assert "STAGE TIMINGS" in titles
        assert any(t.startswith("BENCH") and "CHANNELS" in t for t in titles)

    def test_selection_sheet_sections(self, tmp_path):
        """Rankings, the channel curve and the comparison all appear on the Selection sheet."""
        path = generate_workbook(_make_report(**_selection_sections()), tmp_path / "run.xlsx")
        ws = load_workbook(path)["Selection"]
        titles = [c.value for c in ws["A"] if isinstance(c.value, str)]
        assert any("PVALUE" in t for t in titles)
        assert "CHANNEL CURVE" in titles
        assert "FEATURE SELECTION COMPARISON" in titles

    def test_report_without_evaluations(self, tmp_path):
        """A report with no evaluation still produces all four sheets."""
        report = build_report("bench", {}, {"master": 0}, 1, {"bench_channels": 1.0})
        path = generate_workbook(report, tmp_path / "bench.xlsx")
        assert len(load_workbook(path).sheetnames) == 4


class TestWriteRunOutputs:

    def test_paths_returned(self, tmp_path):
        """Report, non-empty tables and the workbook are written under the stem."""
        paths = write_run_outputs(
            _make_report(**_selection_sections()),
            tmp_path,
            "select",
            tables={"curve": _selection_sections()["channel_curve"], "empty": []},
        )
        assert set(paths) == {"report", "curve", "workbook"}
        assert paths["report"].name == "select.yaml"
        assert paths["curve"].name == "select_curve.csv"
        assert all(p.exists() for p in paths.values())

    def test_workbook_optional(self, tmp_path):
        """workbook=False skips the .xlsx file."""
        paths = write_run_outputs(_make_report(), tmp_path, "evaluate", workbook=False)
        assert "workbook" not in paths
        assert not (tmp_path / "evaluate.xlsx").exists()

    def test_nan_metrics_written_as_null(self, tmp_path):
        """A NaN metric is written as null and reloads as None."""
        report = _make_report(extra={"value": math.nan})
        paths = write_run_outputs(report, tmp_path, "nan", workbook=False)
        assert load_report(paths["report"])["extra"]["value"] is None
