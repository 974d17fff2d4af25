"""Comparison tables of metric reports, as fixed-width text and as JSON."""
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Optional, Union

import pydantic
from pydantic import ConfigDict, model_validator

from .timbre_metrics import METRIC_NAMES, MetricReport

COLUMN_TITLES = {
    "global_silhouette": "Global Sil.",
    "purity": "Purity",
    "compactness": "Compact.",
    "magnitude_silhouette": "Magn. Sil.",
    "within_pitch_silhouette": "Within-Pitch Sil.",
    "cross_pitch_consistency": "Cross-Pitch Cons.",
    "linearity": "Linearity",
    "step_consistency": "Step Cons.",
}
DEFAULT_MARKER = "*"
UNDEFINED_CELL = "—"
COLUMN_GAP = "  "


class ComparisonTable(pydantic.BaseModel):
    """
    Reports of several models, one row each, with the winning row of every metric column.

    Every metric is higher-is-better, silhouettes included (the least negative wins). Undefined
    metrics never win; ties go to the earlier row.
    """

    model_config = ConfigDict(frozen=True)

    rows: list[MetricReport]
    best_per_column: dict[str, int]

    @model_validator(mode="after")
    def _check_rows(self) -> "ComparisonTable":
        if not self.rows:
            raise ValueError("a comparison needs at least one report")
        return self

    @classmethod
    def from_reports(cls, reports: Iterable[MetricReport]) -> "ComparisonTable":
        reports = list(reports)
        best = {}
        for name in METRIC_NAMES:
            candidates = [(report.metric(name).aggregate, -index)
                          for index, report in enumerate(reports) if report.metric(name).defined]
            if candidates:
                best[name] = -max(candidates)[1]
        return cls(rows=reports, best_per_column=best)


def format_value(value: float) -> str:
    """Four decimals, rounding half to even on the shortest decimal spelling of the value."""
    text = str(Decimal(repr(float(value))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_EVEN))
    return "0.0000" if text == "-0.0000" else text


def _layout(lines: list[list[str]], right_aligned_from: int = 1) -> list[str]:
    widths = [max(len(line[column]) for line in lines) for column in range(len(lines[0]))]
    rendered = []
    for line in lines:
        cells = [cell.rjust(width) if column >= right_aligned_from else cell.ljust(width)
                 for column, (cell, width) in enumerate(zip(line, widths))]
        rendered.append(COLUMN_GAP.join(cells))
    return rendered


def render_table(cmp: ComparisonTable, marker: str = DEFAULT_MARKER) -> str:
    """
    Render one row per model and the eight metric columns.

    The best value of each column carries the marker; undefined metrics show a dash and a numbered
    footnote with the reason.

    :param cmp: The comparison, at least one row.
    :param marker: Suffix of the best value per column.
    :return: The table text, newline terminated.
    """
    if not cmp.rows:
        raise ValueError("cannot render an empty comparison")
    header = ["Model", *(COLUMN_TITLES[name] for name in METRIC_NAMES)]
    lines = [header]
    footnotes = []
    for index, report in enumerate(cmp.rows):
        cells = [report.model_name]
        for name in METRIC_NAMES:
            value = report.metric(name)
            if not value.defined:
                footnotes.append(f"[{len(footnotes) + 1}] {report.model_name}, {COLUMN_TITLES[name]}: {value.reason}")
                cells.append(f"{UNDEFINED_CELL}[{len(footnotes)}]")
                continue
            suffix = marker if cmp.best_per_column.get(name) == index else " " * len(marker)
            cells.append(format_value(value.aggregate) + suffix)
        lines.append(cells)
    rendered = _layout(lines)
    rendered.insert(1, "-" * max(len(line) for line in rendered))
    rendered.append("")
    rendered.append(f"{marker} best value in column")
    rendered.extend(footnotes)
    return "\n".join(rendered) + "\n"


def render_skips(report: MetricReport) -> str:
    """List, per metric, the groups left out of the aggregate and why."""
    lines = []
    for name in METRIC_NAMES:
        by_reason: dict[str, list[str]] = {}
        for group in report.metric(name).skipped:
            by_reason.setdefault(group.reason, []).append(group.key)
        for reason, keys in by_reason.items():
            lines.append(f"{COLUMN_TITLES[name]}: skipped {len(keys)} group(s), {reason}: {', '.join(keys)}")
    if not lines:
        return ""
    return "\nSkipped groups\n" + "\n".join(lines) + "\n"


def relative_change(cmp: ComparisonTable, baseline: str) -> dict[str, dict[str, Optional[float]]]:
    """
    Relative difference of every row's aggregates against the baseline row.

    (value - base) / |base| per metric; None where either side is undefined or the base is 0.

    :param cmp: The comparison.
    :param baseline: model_name of the baseline row.
    :return: model_name -> metric -> relative change.
    """
    base = next((report for report in cmp.rows if report.model_name == baseline), None)
    if base is None:
        raise ValueError(f"baseline '{baseline}' is not among the compared models")
    changes = {}
    for report in cmp.rows:
        row = {}
        for name in METRIC_NAMES:
            value, reference = report.metric(name), base.metric(name)
            if value.defined and reference.defined and reference.aggregate != 0:
                row[name] = (value.aggregate - reference.aggregate) / abs(reference.aggregate)
            else:
                row[name] = None
        changes[report.model_name] = row
    return changes


def render_relative(cmp: ComparisonTable, baseline: str) -> str:
    """Render relative_change as a table of signed percentages."""
    changes = relative_change(cmp, baseline)
    lines = [[f"vs {baseline}", *(COLUMN_TITLES[name] for name in METRIC_NAMES)]]
    for model_name, row in changes.items():
        lines.append([model_name, *(UNDEFINED_CELL if row[name] is None else f"{row[name] * 100:+.1f}%"
                                    for name in METRIC_NAMES)])
    rendered = _layout(lines)
    rendered.insert(1, "-" * max(len(line) for line in rendered))
    return "\n" + "\n".join(rendered) + "\n"


def to_json(cmp: ComparisonTable) -> bytes:
    """UTF-8 JSON of the full comparison, fields in declaration order, breakdowns in schema order."""
    return cmp.model_dump_json(indent=2).encode("utf-8") + b"\n"


def from_json(data: Union[bytes, str]) -> ComparisonTable:
    return ComparisonTable.model_validate_json(data)


def report_to_json(report: MetricReport) -> bytes:
    return report.model_dump_json(indent=2).encode("utf-8") + b"\n"


def report_from_json(data: Union[bytes, str]) -> MetricReport:
    return MetricReport.model_validate_json(data)
