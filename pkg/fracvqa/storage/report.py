"""Relatórios de uma execução: gráfico SVG das métricas e resumo em PDF."""
from pathlib import Path
from typing import Optional, Sequence

from reportlab.graphics import renderSVG
from reportlab.graphics.charts.legends import Legend
from reportlab.graphics.charts.lineplots import LinePlot
from reportlab.graphics.shapes import Drawing, String
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.lib.units import mm
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

_SERIES_COLORS = (colors.HexColor("#0f766e"), colors.HexColor("#b45309"), colors.HexColor("#1d4ed8"))


def metrics_drawing(rows: Sequence[dict], title: str = "metrics", series=("trace_error", "norm_fidelity")) -> Drawing:
    """Linhas por passo k para cada coluna em ``series`` (valores ausentes são ignorados)."""
    drawing = Drawing(480, 300)
    drawing.add(String(240, 280, title, textAnchor="middle", fontSize=12))

    data = []
    names = []
    for name in series:
        points = []
        for row in rows:
            value = row.get(name)
            if value in (None, ""):
                continue
            points.append((float(row["k"]), float(value)))
        if points:
            data.append(points)
            names.append(name)
    if not data:
        return drawing

    plot = LinePlot()
    plot.x, plot.y = 50, 50
    plot.width, plot.height = 380, 200
    plot.data = data
    for i in range(len(data)):
        plot.lines[i].strokeColor = _SERIES_COLORS[i % len(_SERIES_COLORS)]
        plot.lines[i].strokeWidth = 1.2
    plot.xValueAxis.labelTextFormat = "%d"
    drawing.add(plot)

    legend = Legend()
    legend.x, legend.y = 60, 275
    legend.fontSize = 8
    legend.alignment = "right"
    legend.colorNamePairs = [(_SERIES_COLORS[i % len(_SERIES_COLORS)], n) for i, n in enumerate(names)]
    drawing.add(legend)
    return drawing


def write_metrics_svg(rows: Sequence[dict], path, title: str = "metrics") -> Path:
    path = Path(path)
    renderSVG.drawToFile(metrics_drawing(rows, title), str(path))
    return path


def write_summary_pdf(path, titulo: str, summary: dict, rows: Optional[Sequence[Sequence]] = None, header=None) -> Path:
    """Resumo tabular (chave/valor) seguido de uma tabela opcional de séries."""
    path = Path(path)
    doc = SimpleDocTemplate(str(path), pagesize=A4, leftMargin=20 * mm, rightMargin=20 * mm,
                            topMargin=20 * mm, bottomMargin=20 * mm, invariant=1)
    styles = getSampleStyleSheet()
    story = [Paragraph(titulo, styles["Title"]), Spacer(1, 8)]

    data = [["Quantidade", "Valor"]]
    for key, value in summary.items():
        data.append([str(key), f"{value:.6g}" if isinstance(value, float) else str(value)])
    story.append(_styled_table(data))

    if rows:
        story.append(Spacer(1, 12))
        table_data = [list(header or [])] + [
            [f"{v:.6g}" if isinstance(v, float) else str(v) for v in row] for row in rows
        ]
        story.append(_styled_table(table_data))

    doc.build(story)
    return path


def _styled_table(data) -> Table:
    table = Table(data, repeatRows=1)
    table.setStyle(TableStyle([
        ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#0f766e")),
        ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
        ("ALIGN", (0, 0), (-1, -1), "LEFT"),
        ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
        ("FONTSIZE", (0, 0), (-1, 0), 10),
        ("BOTTOMPADDING", (0, 0), (-1, 0), 8),
        ("GRID", (0, 0), (-1, -1), 0.25, colors.grey),
        ("FONTSIZE", (0, 1), (-1, -1), 9),
    ]))
    return table
