# segmentation_cellulaire/exports.py
"""
Ce module contient les fonctions d'exportation des résultats d'évaluation.

Il est indépendant du pipeline et se concentre uniquement sur la mise en
forme : CSV d'évaluation (une ligne par image) et classeur Excel formaté
(feuille des résultats par image et feuille de synthèse).
"""

import csv
import io
from pathlib import Path
from typing import Any, TextIO, cast

import openpyxl
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter
from openpyxl.worksheet.worksheet import Worksheet

from .exceptions import IoFailureError
from .models import EvaluationRow, EvaluationSummary

EVALUATION_COLUMNS = [
    "name",
    "category",
    "decoder",
    "tp",
    "fp",
    "fn",
    "precision",
    "recall",
    "f1",
    "seconds",
    "tolerance",
    "out_of_tolerance",
    "error",
]


def evaluation_row_values(row: EvaluationRow) -> dict[str, Any]:
    """Valeurs d'une ligne d'évaluation, indexées par colonne (None pour les colonnes vides)."""
    values: dict[str, Any] = dict.fromkeys(EVALUATION_COLUMNS)
    values["name"] = row.name
    values["category"] = int(row.category) if row.category is not None else None
    values["decoder"] = str(row.decoder) if row.decoder is not None else None
    if row.report is not None:
        values.update(
            tp=row.report.tp,
            fp=row.report.fp,
            fn=row.report.fn_,
            precision=row.report.precision,
            recall=row.report.recall,
            f1=row.report.f1,
        )
    if row.timing is not None:
        values.update(seconds=row.timing.real_time, tolerance=row.timing.tolerance, out_of_tolerance=row.timing.out_of_tolerance)
    values["error"] = row.error
    return values


def _format_csv_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_evaluation_csv(rows: list[EvaluationRow], target: str | Path | TextIO) -> None:
    """Écrit le CSV d'évaluation dans un fichier (chemin) ou un flux texte déjà ouvert."""
    if not isinstance(target, str | Path):
        _write_csv(rows, target)
        return
    path = Path(target)
    try:
        with path.open("w", newline="", encoding="utf-8") as f:
            _write_csv(rows, f)
    except OSError as e:
        raise IoFailureError(f"Impossible d'écrire '{path}' : {e}") from e


def _write_csv(rows: list[EvaluationRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EVALUATION_COLUMNS)
    for row in rows:
        values = evaluation_row_values(row)
        writer.writerow([_format_csv_value(values[column]) for column in EVALUATION_COLUMNS])


def _apply_border_to_range(sheet: Worksheet, start_row: int, end_row: int, start_col: int, end_col: int) -> None:
    """Applique une bordure fine autour d'une plage de cellules."""
    thin_border_side = Side(style="thin")
    box_border = Border(left=thin_border_side, right=thin_border_side, top=thin_border_side, bottom=thin_border_side)
    for row_iter in sheet.iter_rows(min_row=start_row, max_row=end_row, min_col=start_col, max_col=end_col):
        for cell in row_iter:
            cell.border = box_border


def _write_header(sheet: Worksheet, headers: list[str]) -> None:
    header_font = Font(bold=True, color="FFFFFF", name="Calibri", size=11)
    header_fill = PatternFill("solid", fgColor="4F81BD")
    header_align = Alignment(horizontal="center", vertical="center")
    for col_idx, header_text in enumerate(headers, start=1):
        cell = sheet.cell(row=1, column=col_idx, value=header_text)
        cell.font = header_font
        cell.fill = header_fill
        cell.alignment = header_align
        sheet.column_dimensions[get_column_letter(col_idx)].width = max(12, len(header_text) + 4)
    sheet.freeze_panes = "A2"


def generer_export_evaluation(rows: list[EvaluationRow], summary: EvaluationSummary) -> io.BytesIO:
    """
    Génère un classeur Excel des résultats d'évaluation.

    Args:
        rows: Les lignes d'évaluation, une par image.
        summary: La synthèse (F1 moyen, F1 par classe, temps hors tolérance).

    Returns:
        Un objet io.BytesIO contenant le fichier Excel (.xlsx) en mémoire.
    """
    workbook = openpyxl.Workbook()
    workbook.remove(cast(Worksheet, workbook.active))

    cell_font = Font(name="Calibri", size=11)
    error_font = Font(name="Calibri", size=11, color="C00000")
    number_format_ratio = "0.0000"
    number_format_seconds = "0.00"

    # --- Résultats par image ---
    sheet: Worksheet = workbook.create_sheet(title="Résultats")
    _write_header(sheet, EVALUATION_COLUMNS)
    for row_idx, row in enumerate(rows, start=2):
        values = evaluation_row_values(row)
        for col_idx, column in enumerate(EVALUATION_COLUMNS, start=1):
            cell = sheet.cell(row=row_idx, column=col_idx, value=values[column])
            cell.font = error_font if column == "error" else cell_font
            if column in ("precision", "recall", "f1"):
                cell.number_format = number_format_ratio
            elif column in ("seconds", "tolerance", "out_of_tolerance"):
                cell.number_format = number_format_seconds
    if rows:
        _apply_border_to_range(sheet, 1, len(rows) + 1, 1, len(EVALUATION_COLUMNS))

    # --- Synthèse ---
    summary_sheet: Worksheet = workbook.create_sheet(title="Synthèse")
    _write_header(summary_sheet, ["Indicateur", "Valeur"])
    summary_sheet.column_dimensions["A"].width = 40
    lines: list[tuple[str, Any]] = [
        ("Images", summary.images),
        ("Images évaluées", summary.evaluated),
        ("Images en échec", summary.failed),
        ("F1 moyen", summary.mean_f1),
    ]
    lines += [(f"F1 moyen classe {int(category)}", value) for category, value in summary.classwise_f1.items()]
    lines.append(("Temps total hors tolérance (s)", summary.total_out_of_tolerance))
    if summary.classification is not None:
        lines.append(("Exactitude globale du classement", summary.classification.overall))
        lines += [(f"Exactitude classe {int(category)}", value) for category, value in summary.classification.per_class.items()]

    for row_idx, (label, value) in enumerate(lines, start=2):
        summary_sheet.cell(row=row_idx, column=1, value=label).font = Font(bold=True, name="Calibri", size=11)
        cell = summary_sheet.cell(row=row_idx, column=2, value=value)
        cell.font = cell_font
        if isinstance(value, float):
            cell.number_format = number_format_ratio
    _apply_border_to_range(summary_sheet, 1, len(lines) + 1, 1, 2)

    output = io.BytesIO()
    workbook.save(output)
    output.seek(0)
    return output


def save_evaluation_workbook(rows: list[EvaluationRow], summary: EvaluationSummary, path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_bytes(generer_export_evaluation(rows, summary).getvalue())
    except OSError as e:
        raise IoFailureError(f"Impossible d'écrire '{path}' : {e}") from e
