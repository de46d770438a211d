"""
reporter.py — Run Reports, Curve Files and Excel Summary.

Every subcommand ends by writing:

    <stem>.yaml     schema-versioned run report (config echo, seeds, metrics,
                    rankings, selections, timing table, software stamp)
    <stem>_*.csv    delimited curve / table data for external plotting
    <stem>.xlsx     workbook mirroring the report

Workbook sheets:
    1. Summary      — KPI tiles (AUC, weighted F1, kappa) and run context
    2. Folds        — Per-subject LOSO breakdown for each evaluated classifier
    3. Timing       — Stage timings and benchmark tables
    4. Selection    — Channel rankings, channel curve and feature-selection comparison
"""

import logging
import platform
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
import pywt
import scipy
import sklearn
import yaml
from openpyxl import Workbook
from openpyxl.chart import LineChart, Reference
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from src import __version__
from src.errors import PipelineError
from src.feature_bank import parse_feature_name

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
REQUIRED_KEYS = ("schema_version", "command", "software", "config", "seeds", "threads", "timing")

# ---------------------------------------------------------------------------
# Colour palette
# ---------------------------------------------------------------------------
COLOURS = {
    "navy":        "1F4E79",
    "teal":        "1B7F79",
    "plum":        "6A3D9A",
    "amber":       "BF8F00",
    "slate":       "44546A",
    "light_grey":  "F2F2F2",
    "white":       "FFFFFF",
    "good_row":    "E2EFDA",
    "weak_row":    "FFE5CC",
}

THIN_BORDER = Border(
    left=Side(style="thin"),
    right=Side(style="thin"),
    top=Side(style="thin"),
    bottom=Side(style="thin"),
)


# ---------------------------------------------------------------------------
# Report document
# ---------------------------------------------------------------------------

def software_stamp() -> dict[str, str]:
    """Versions of the package and the numerical stack."""
    return {
        "package": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "pywavelets": pywt.__version__,
    }


def to_plain(obj: Any) -> Any:
    """Recursively convert numpy / pandas / tuple values to YAML-safe Python types."""
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def build_report(
    command: str,
    config: Mapping[str, Any],
    seeds: Mapping[str, int],
    threads: int,
    timing: Mapping[str, float],
    **sections: Any,
) -> dict[str, Any]:
    """Assemble a run report; extra keyword sections are appended in order."""
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "software": software_stamp(),
        "config": to_plain(config),
        "seeds": to_plain(seeds),
        "threads": int(threads),
        "timing": {k: round(float(v), 3) for k, v in timing.items()},
    }
    for name, value in sections.items():
        if value is not None:
            report[name] = to_plain(value)
    return report


def validate_report(report: Mapping[str, Any]) -> None:
    """Check the report schema and that referenced names resolve.

    Raises:
        PipelineError: On a missing key, wrong schema version or unresolvable name.
    """
    missing = [k for k in REQUIRED_KEYS if k not in report]
    if missing:
        raise PipelineError(f"Report missing keys: {missing}")
    if report["schema_version"] != REPORT_SCHEMA_VERSION:
        raise PipelineError(f"Unsupported report schema_version {report['schema_version']}")

    known_channels = set(report.get("channels") or [])
    for ranking in report.get("channel_rankings", {}).values():
        for entry in ranking["channels"]:
            if known_channels and entry["channel"] not in known_channels:
                raise PipelineError(f"Ranking references unknown channel {entry['channel']}")
    for selection in report.get("feature_selection", []):
        for item in selection["selected"]:
            name = item["name"] if isinstance(item, Mapping) else item
            try:
                channel = parse_feature_name(name).channel
            except ValueError as exc:
                raise PipelineError(f"Selection references invalid feature {name!r}") from exc
            if known_channels and channel not in known_channels:
                raise PipelineError(f"Selection references unknown channel {channel}")


def write_report_yaml(report: Mapping[str, Any], path: str | Path) -> Path:
    """Validate and write the report as YAML."""
    validate_report(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(to_plain(report), fh, sort_keys=False, allow_unicode=True)
    logger.info("Run report written to %s", path)
    return path


def load_report(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Report not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        report = yaml.safe_load(fh)
    validate_report(report)
    return report


def write_table_csv(rows: Sequence[Mapping[str, Any]], path: str | Path) -> Path:
    """Write a list of flat records as CSV (one header row, one line per record)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([to_plain(r) for r in rows]).to_csv(path, index=False)
    logger.info("Table written to %s (%d rows)", path, len(rows))
    return path


# ---------------------------------------------------------------------------
# Workbook styling
# ---------------------------------------------------------------------------

def _fill(hex_colour: str) -> PatternFill:
    return PatternFill(fill_type="solid", fgColor=hex_colour)


def _header_font() -> Font:
    return Font(name="Calibri", bold=True, color=COLOURS["white"], size=11)


def _title_font(size: int = 13) -> Font:
    return Font(name="Calibri", bold=True, color=COLOURS["navy"], size=size)


def _auto_fit_columns(ws, min_width: int = 10, max_width: int = 48) -> None:
    """Size each column to its longest rendered value, within bounds."""
    for col in ws.columns:
        longest = max((len(str(c.value)) for c in col if c.value is not None), default=0)
        ws.column_dimensions[get_column_letter(col[0].column)].width = min(max(longest + 3, min_width), max_width)


def _write_kpi_tile(ws, row: int, col: int, label: str, value: str, colour: str) -> None:
    """Label cell above a large value cell."""
    label_cell = ws.cell(row=row, column=col, value=label)
    label_cell.fill = _fill(colour)
    label_cell.font = _header_font()
    label_cell.alignment = Alignment(horizontal="center", vertical="center")
    label_cell.border = THIN_BORDER

    value_cell = ws.cell(row=row + 1, column=col, value=value)
    value_cell.font = Font(name="Calibri", bold=True, size=16, color=colour)
    value_cell.alignment = Alignment(horizontal="center", vertical="center")
    value_cell.fill = _fill(COLOURS["light_grey"])
    value_cell.border = THIN_BORDER


def _write_table(
    ws,
    start_row: int,
    title: str,
    headers: Sequence[str],
    rows: Iterable[Sequence[Any]],
    colour: str,
    start_col: int = 1,
) -> int:
    """Titled, bordered table. Returns the first free row below it."""
    ws.cell(row=start_row, column=start_col, value=title).font = _title_font()
    for i, h in enumerate(headers):
        cell = ws.cell(row=start_row + 1, column=start_col + i, value=h)
        cell.fill = _fill(colour)
        cell.font = _header_font()
        cell.alignment = Alignment(horizontal="center")
        cell.border = THIN_BORDER
    row_i = start_row + 2
    for row in rows:
        for i, val in enumerate(row):
            cell = ws.cell(row=row_i, column=start_col + i, value=val)
            cell.fill = _fill(COLOURS["light_grey"])
            cell.border = THIN_BORDER
            if isinstance(val, float):
                cell.number_format = "0.000"
        row_i += 1
    return row_i + 1


def _fmt(value: Any) -> str:
    return f"{value:.3f}" if isinstance(value, (int, float)) and value is not None else "n/a"


# ---------------------------------------------------------------------------
# Sheets
# ---------------------------------------------------------------------------

def _primary_evaluation(report: Mapping[str, Any]) -> Mapping[str, Any] | None:
    evaluations = report.get("evaluations") or {}
    if evaluations:
        return next(iter(evaluations.values()))
    return None


def _build_summary_sheet(ws, report: Mapping[str, Any]) -> None:
    ws.sheet_properties.tabColor = COLOURS["navy"]
    ws.merge_cells("A1:F1")
    title = ws["A1"]
    title.value = f"MIND-WANDERING PIPELINE — {report['command'].upper()}"
    title.font = Font(name="Calibri", bold=True, size=16, color=COLOURS["white"])
    title.fill = _fill(COLOURS["navy"])
    title.alignment = Alignment(horizontal="center", vertical="center")
    ws.row_dimensions[1].height = 30

    ws.merge_cells("A2:F2")
    seeds = ", ".join(f"{k}={v}" for k, v in report["seeds"].items())
    sub = ws["A2"]
    sub.value = f"Seeds: {seeds}  |  Threads: {report['threads']}  |  Package {report['software']['package']}"
    sub.font = Font(name="Calibri", italic=True, size=10, color=COLOURS["navy"])
    sub.alignment = Alignment(horizontal="center")

    primary = _primary_evaluation(report)
    if primary is not None:
        tiles = [
            ("AUC", _fmt(primary["auc"]), COLOURS["teal"]),
            ("WEIGHTED F1", _fmt(primary["weighted_f1"]), COLOURS["navy"]),
            ("KAPPA", _fmt(primary["kappa"]), COLOURS["plum"]),
            ("FOLDS", str(primary["n_folds"]), COLOURS["slate"]),
            ("FEATURES", str(primary["n_features"]), COLOURS["slate"]),
            ("TRAIN TIME (s)", _fmt(primary["total_train_time_s"]), COLOURS["amber"]),
        ]
        for i, (label, value, colour) in enumerate(tiles, start=1):
            _write_kpi_tile(ws, row=4, col=i, label=label, value=value, colour=colour)
        ws.row_dimensions[5].height = 30

    row = 8
    evaluations = report.get("evaluations") or {}
    if evaluations:
        row = _write_table(
            ws, row, "CLASSIFIER COMPARISON",
            ["Classifier", "AUC", "Weighted F1", "Kappa", "Train time (s)"],
            [[name, r["auc"], r["weighted_f1"], r["kappa"], r["total_train_time_s"]] for name, r in evaluations.items()],
            COLOURS["navy"],
        )
    categories = report.get("categories") or {}
    if categories:
        row = _write_table(
            ws, row, "CATEGORY EVALUATION",
            ["Features", "Columns", "AUC", "Weighted F1", "Kappa"],
            [[name, r["n_features"], r["auc"], r["weighted_f1"], r["kappa"]] for name, r in categories.items()],
            COLOURS["teal"],
        )
    dataset = report.get("dataset") or {}
    if dataset:
        _write_table(ws, row, "DATASET", ["Key", "Value"],
                     [[k, str(v)] for k, v in dataset.items()], COLOURS["slate"])
    _auto_fit_columns(ws)


def _build_folds_sheet(ws, report: Mapping[str, Any]) -> None:
    ws.sheet_properties.tabColor = COLOURS["teal"]
    headers = ["Classifier", "Subject", "Train rows", "Test rows", "Seed", "Train time (s)", "AUC", "Weighted F1", "Kappa"]
    rows = [
        [name, f["subject_id"], f["n_train"], f["n_test"], f["seed"], f["train_time_s"], f["auc"], f["weighted_f1"], f["kappa"]]
        for name, result in (report.get("evaluations") or {}).items()
        for f in result["folds"]
    ]
    _write_table(ws, 1, "LEAVE-ONE-SUBJECT-OUT FOLDS", headers, rows, COLOURS["teal"])
    ws.freeze_panes = "A3"
    for row in ws.iter_rows(min_row=3, max_row=ws.max_row):
        auc = row[6].value
        if isinstance(auc, float):
            colour = COLOURS["good_row"] if auc >= 0.5 else COLOURS["weak_row"]
            for cell in row:
                cell.fill = _fill(colour)
    _auto_fit_columns(ws)


def _build_timing_sheet(ws, report: Mapping[str, Any]) -> None:
    ws.sheet_properties.tabColor = COLOURS["amber"]
    row = _write_table(ws, 1, "STAGE TIMINGS", ["Stage", "Seconds"],
                       [[k, v] for k, v in report["timing"].items()], COLOURS["amber"])
    bench = report.get("bench") or {}
    for name, table in bench.get("tables", {}).items():
        if table:
            headers = list(table[0].keys())
            row = _write_table(ws, row, f"BENCH — {name.upper()}", headers,
                               [[r.get(h) for h in headers] for r in table], COLOURS["slate"])
    _auto_fit_columns(ws)


def _build_selection_sheet(ws, report: Mapping[str, Any]) -> None:
    ws.sheet_properties.tabColor = COLOURS["plum"]
    row = 1
    for method, ranking in (report.get("channel_rankings") or {}).items():
        row = _write_table(ws, row, f"CHANNEL RANKING — {method.upper()}", ["Rank", "Channel", "Score"],
                           [[i, e["channel"], e["score"]] for i, e in enumerate(ranking["channels"], start=1)],
                           COLOURS["plum"])

    curve = report.get("channel_curve") or []
    if curve:
        curve_start = row
        row = _write_table(ws, row, "CHANNEL CURVE", ["K", "Channels", "AUC", "Weighted F1", "Kappa", "Train time (s)"],
                           [[p["k"], p["channels"], p["auc"], p["weighted_f1"], p["kappa"], p["total_train_time_s"]] for p in curve],
                           COLOURS["teal"])
        if len(curve) > 1:
            chart = LineChart()
            chart.title = "AUC vs number of channels"
            chart.y_axis.title = "AUC"
            chart.x_axis.title = "K"
            chart.height, chart.width = 8, 16
            chart.add_data(Reference(ws, min_col=3, min_row=curve_start + 1, max_row=curve_start + 1 + len(curve)),
                           titles_from_data=True)
            chart.set_categories(Reference(ws, min_col=1, min_row=curve_start + 2, max_row=curve_start + 1 + len(curve)))
            ws.add_chart(chart, f"H{curve_start}")

    comparison = report.get("selection_comparison") or []
    if comparison:
        headers = list(comparison[0].keys())
        _write_table(ws, row, "FEATURE SELECTION COMPARISON", headers,
                     [[r.get(h) for h in headers] for r in comparison], COLOURS["navy"])
    _auto_fit_columns(ws)


def generate_workbook(report: Mapping[str, Any], path: str | Path) -> Path:
    """Write the four-sheet workbook for a run report.

    Returns:
        Path to the generated .xlsx file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wb = Workbook()
    wb.remove(wb.active)

    _build_summary_sheet(wb.create_sheet("Summary"), report)
    _build_folds_sheet(wb.create_sheet("Folds"), report)
    _build_timing_sheet(wb.create_sheet("Timing"), report)
    _build_selection_sheet(wb.create_sheet("Selection"), report)

    wb.save(path)
    logger.info("Excel summary saved to %s", path)
    return path


def write_run_outputs(
    report: Mapping[str, Any],
    out_dir: str | Path,
    stem: str,
    tables: Mapping[str, Sequence[Mapping[str, Any]]] | None = None,
    workbook: bool = True,
) -> dict[str, Path]:
    """Write the YAML report, its CSV tables and (optionally) the workbook."""
    out_dir = Path(out_dir)
    paths = {"report": write_report_yaml(report, out_dir / f"{stem}.yaml")}
    for name, rows in (tables or {}).items():
        if rows:
            paths[name] = write_table_csv(rows, out_dir / f"{stem}_{name}.csv")
    if workbook:
        paths["workbook"] = generate_workbook(report, out_dir / f"{stem}.xlsx")
    return paths
