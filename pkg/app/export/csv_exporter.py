from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_fixed

from app.custom_logging import get_logger, stage_log
from app.experiments.manifest import ExperimentManifest, manifest_digest, serialize_manifest
from app.utils.formatting import format_cell

log = get_logger(__name__)

CSV_ENCODING = "utf-8"
CSV_DELIMITER = ","


@dataclass
class Table:
    """Таблица результата: имя файла без расширения, колонки и строки-словари."""

    name: str
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)
    # таблица попадает в сводный Excel
    summary: bool = False

    def add(self, **values: Any) -> None:
        self.rows.append(values)


def header_lines(manifest: ExperimentManifest, failures: int) -> list[str]:
    lines = [f"# {line}" for line in serialize_manifest(manifest)]
    lines.append(f"# verlet_variant = {manifest.verlet_variant}")
    lines.append(f"# manifest_digest = {manifest_digest(manifest)}")
    lines.append(f"# failures = {failures}")
    return lines


@retry(stop=stop_after_attempt(3), wait=wait_fixed(0.2), retry=retry_if_exception_type(OSError), reraise=True)
def write_csv(path: Path, table: Table, header: Sequence[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding=CSV_ENCODING) as f:
        for line in header:
            f.write(line + "\n")
        writer = csv.DictWriter(f, fieldnames=table.columns, delimiter=CSV_DELIMITER, lineterminator="\n")
        writer.writeheader()
        for row in table.rows:
            writer.writerow({c: format_cell(row.get(c)) for c in table.columns})
    return path


#Унифицированное форматирование Excel-листа
def format_excel_sheet(ws) -> None:
    header_fill = PatternFill(start_color="DDEBF7", end_color="DDEBF7", fill_type="solid")
    for cell in ws[1]:
        cell.font = Font(bold=True)
        cell.fill = header_fill
        cell.alignment = Alignment(horizontal="center", vertical="center", wrap_text=True)

    for col in range(1, ws.max_column + 1):
        letter = get_column_letter(col)
        max_len = max(len(str(c.value)) if c.value is not None else 0 for c in ws[letter])
        ws.column_dimensions[letter].width = min(max_len + 2, 40)

    if ws.max_row > 1:
        ws.auto_filter.ref = f"A1:{get_column_letter(ws.max_column)}{ws.max_row}"
    ws.freeze_panes = "A2"


def _excel_value(value: Any) -> Any:
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        # nan/inf в ячейку Excel не записать
        return value if value == value and abs(value) != float("inf") else format_cell(value)
    return format_cell(value)


@retry(stop=stop_after_attempt(3), wait=wait_fixed(0.2), retry=retry_if_exception_type(OSError), reraise=True)
def write_xlsx_summary(path: Path, manifest: ExperimentManifest, tables: Sequence[Table], failures: int) -> Path:
    """Сводка для просмотра; договором остаётся CSV."""
    wb = Workbook()
    ws = wb.active
    ws.title = "Манифест"
    ws.append(["Параметр", "Значение"])
    for line in serialize_manifest(manifest):
        key, value = line.split(" = ", 1)
        ws.append([key, value])
    ws.append(["failures", failures])
    format_excel_sheet(ws)

    for table in tables:
        sheet = wb.create_sheet(title=table.name[:31])
        sheet.append(table.columns)
        for row in table.rows:
            sheet.append([_excel_value(row.get(c)) for c in table.columns])
        format_excel_sheet(sheet)

    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(path)
    return path


def export_tables(
    out_dir: Path,
    manifest: ExperimentManifest,
    tables: Sequence[Table],
    failures: int,
) -> list[Path]:
    """CSV на каждую таблицу с манифестом в заголовке и сводный xlsx для итоговых таблиц."""
    header = header_lines(manifest, failures)
    written = []
    for table in tables:
        path = write_csv(out_dir / f"{table.name}.csv", table, header)
        log.info(f"Создан CSV-файл: {path} ({len(table.rows)} строк)")
        written.append(path)

    summary = [t for t in tables if t.summary]
    if summary:
        path = write_xlsx_summary(out_dir / f"{manifest.name}_summary.xlsx", manifest, summary, failures)
        log.info(f"Создан Excel-файл: {path}")
        written.append(path)

    stage_log("Экспорт", status="успех", эксперимент=manifest.name, файлов=len(written), отказов=failures)
    return written
