"""Self-contained HTML study reports.

One page per study: status badges, the variation table, the merged
secondary table, the latest comparison verdict when present, and inline
SVG line charts. No script tags, no external fetches, so the file can be
archived and will render identically decades from now. Generation is
deterministic: the only timestamp on the page comes from an injectable
clock, and regenerating with unchanged inputs reproduces the bytes.
"""

from __future__ import annotations

import html
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import project
from .datastore import SecondaryTable, load_study_secondary
from .errors import DataError, ReportError
from .paramspace import CaseStatus

INDEX_FILE = "index.html"
MAX_TABLE_ROWS = 200

_PALETTE = ("#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed", "#0891b2")

_STATUS_COLORS = {
    "Pending": "#9ca3af",
    "Running": "#2563eb",
    "Succeeded": "#059669",
    "Failed": "#dc2626",
    "Cancelled": "#d97706",
}

_CSS = """
body { font-family: system-ui, sans-serif; margin: 2rem auto; max-width: 60rem;
       padding: 0 1rem; color: #111827; }
h1, h2 { font-weight: 600; }
table { border-collapse: collapse; margin: 0.75rem 0; }
th, td { border: 1px solid #d1d5db; padding: 0.25rem 0.6rem; text-align: left;
         font-variant-numeric: tabular-nums; }
th { background: #f3f4f6; }
.badge { display: inline-block; padding: 0.1rem 0.55rem; border-radius: 999px;
         color: #fff; font-size: 0.85rem; margin-right: 0.35rem; }
.verdict-pass { color: #059669; font-weight: 700; }
.verdict-fail { color: #dc2626; font-weight: 700; }
.note { color: #6b7280; font-size: 0.9rem; }
figure { margin: 1rem 0; }
figcaption { font-size: 0.9rem; color: #374151; }
"""


@dataclass(frozen=True)
class ChartSpec:
    """One line chart: y over x, one polyline per value of the group column."""

    x: str
    y: str
    group: str

    @classmethod
    def parse(cls, text: str) -> "ChartSpec":
        parts = text.split(":")
        if len(parts) != 3 or not all(parts):
            raise ReportError(
                f"chart spec must be X:Y:GROUP column names, got {text!r}"
            )
        return cls(x=parts[0], y=parts[1], group=parts[2])


def _esc(value: Any) -> str:
    return html.escape(str(value), quote=True)


def _fmt_coord(value: float) -> str:
    return f"{value:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if lo == hi:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _fmt_tick(value: float) -> str:
    return f"{value:.4g}"


def render_chart_svg(table: SecondaryTable, spec: ChartSpec) -> str:
    """Build one inline SVG chart from the table.

    x and y must be numeric columns; group must be a metadata column.
    Each distinct group value becomes one polyline whose points are that
    group's rows in table order.
    """
    for col in (spec.x, spec.y):
        if col not in table.columns:
            raise ReportError(f"chart column {col!r} not in table")
        if table.column_types.get(col) not in ("int", "float"):
            raise ReportError(f"chart column {col!r} is not numeric")
    if spec.group not in table.columns:
        raise ReportError(f"chart group column {spec.group!r} not in table")
    if spec.group not in table.metadata_columns and spec.group != "ID":
        raise ReportError(
            f"chart group column {spec.group!r} must be a metadata column"
        )

    xi = table.column_index(spec.x)
    yi = table.column_index(spec.y)
    gi = table.column_index(spec.group)

    groups: dict[str, list[tuple[float, float]]] = {}
    for row in table.rows:
        groups.setdefault(row[gi], []).append((float(row[xi]), float(row[yi])))
    if not groups:
        raise ReportError("chart has no rows to plot")

    xs = [p[0] for pts in groups.values() for p in pts]
    ys = [p[1] for pts in groups.values() for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad_y = 0.05 * (y_hi - y_lo)
    y_lo -= pad_y
    y_hi += pad_y

    width, height = 640, 360
    ml, mr, mt, mb = 70, 160, 20, 45
    plot_w = width - ml - mr
    plot_h = height - mt - mb

    def sx(x: float) -> float:
        return ml + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return mt + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg class="chart" viewBox="0 0 {width} {height}" role="img" '
        f'aria-label="{_esc(spec.y)} over {_esc(spec.x)}">',
        f'<rect x="{ml}" y="{mt}" width="{plot_w}" height="{plot_h}" '
        'fill="#f9fafb" stroke="#d1d5db"/>',
    ]
    for tick in _nice_ticks(x_lo, x_hi):
        px = _fmt_coord(sx(tick))
        parts.append(
            f'<line x1="{px}" y1="{mt}" x2="{px}" y2="{mt + plot_h}" '
            'stroke="#e5e7eb"/>'
        )
        parts.append(
            f'<text x="{px}" y="{mt + plot_h + 18}" font-size="11" '
            f'text-anchor="middle" fill="#374151">{_esc(_fmt_tick(tick))}</text>'
        )
    for tick in _nice_ticks(y_lo, y_hi):
        py = _fmt_coord(sy(tick))
        parts.append(
            f'<line x1="{ml}" y1="{py}" x2="{ml + plot_w}" y2="{py}" '
            'stroke="#e5e7eb"/>'
        )
        parts.append(
            f'<text x="{ml - 8}" y="{py}" font-size="11" text-anchor="end" '
            f'dominant-baseline="middle" fill="#374151">{_esc(_fmt_tick(tick))}</text>'
        )
    parts.append(
        f'<text x="{ml + plot_w / 2:.0f}" y="{height - 8}" font-size="12" '
        f'text-anchor="middle" fill="#111827">{_esc(spec.x)}</text>'
    )
    parts.append(
        f'<text x="16" y="{mt + plot_h / 2:.0f}" font-size="12" text-anchor="middle" '
        f'fill="#111827" transform="rotate(-90 16 {mt + plot_h / 2:.0f})">'
        f"{_esc(spec.y)}</text>"
    )

    for i, (value, points) in enumerate(groups.items()):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{_fmt_coord(sx(x))},{_fmt_coord(sy(y))}" for x, y in points)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" '
            f'points="{coords}"/>'
        )
        for x, y in points:
            parts.append(
                f'<circle cx="{_fmt_coord(sx(x))}" cy="{_fmt_coord(sy(y))}" r="3" '
                f'fill="{color}"/>'
            )
        ly = mt + 14 + i * 18
        parts.append(
            f'<line x1="{ml + plot_w + 12}" y1="{ly}" x2="{ml + plot_w + 34}" '
            f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{ml + plot_w + 40}" y="{ly + 4}" font-size="11" '
            f'fill="#111827">{_esc(spec.group)}={_esc(value)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def _badges(counts: dict[str, int]) -> str:
    out = []
    for status in CaseStatus:
        n = counts.get(status.value, 0)
        if n:
            color = _STATUS_COLORS[status.value]
            out.append(
                f'<span class="badge" style="background:{color}">'
                f"{_esc(status.value)}: {n}</span>"
            )
    return "".join(out) or '<span class="note">no cases</span>'


def _html_table(columns: list[str], rows: list[list[str]], limit: int = MAX_TABLE_ROWS) -> str:
    parts = ["<table>", "<tr>" + "".join(f"<th>{_esc(c)}</th>" for c in columns) + "</tr>"]
    for row in rows[:limit]:
        parts.append("<tr>" + "".join(f"<td>{_esc(c)}</td>" for c in row) + "</tr>")
    parts.append("</table>")
    if len(rows) > limit:
        parts.append(
            f'<p class="note">showing first {limit} of {len(rows)} rows; the full'
            " table is in secondary.csv</p>"
        )
    return "\n".join(parts)


def _render_description(text: str) -> str:
    """Minimal rendering: paragraphs, with # headings mapped to h3."""
    blocks = []
    for block in text.split("\n\n"):
        stripped = block.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            title = stripped.lstrip("#").strip()
            blocks.append(f"<h3>{_esc(title)}</h3>")
        else:
            blocks.append(f"<p>{_esc(stripped)}</p>")
    return "\n".join(blocks)


def generate_study_report(
    root: Path,
    study: str,
    charts: list[ChartSpec] | None = None,
    clock: datetime | None = None,
) -> tuple[Path, Path]:
    """Write report.html and summary.json at the study root.

    clock fixes the generated-at stamp; passing the same clock with the
    same inputs reproduces the report byte for byte. Charts need a merged
    secondary.csv; without one the report still renders status and the
    variation table.
    """
    root = Path(root)
    sdir = project.require_study(root, study)
    status = project.read_status(root, study)
    when = (clock or datetime.now(timezone.utc)).isoformat(timespec="seconds")
    charts = charts or []

    table: SecondaryTable | None = None
    try:
        table = load_study_secondary(root, study)
    except DataError:
        if charts:
            raise ReportError(
                f"study {study} has no merged secondary.csv; charts need collected data"
            ) from None

    verdict: str | None = None
    comparison_path = sdir / project.COMPARISON_FILE
    if comparison_path.is_file():
        try:
            verdict = json.loads(comparison_path.read_text(encoding="utf-8")).get("verdict")
        except (json.JSONDecodeError, OSError):
            verdict = None

    body: list[str] = [f"<h1>Study: {_esc(study)}</h1>"]
    body.append(f'<p class="note">generated at {_esc(when)}</p>')

    desc_path = sdir / project.DESCRIPTION_FILE
    if desc_path.is_file():
        body.append(_render_description(desc_path.read_text(encoding="utf-8")))

    body.append("<h2>Cases</h2>")
    body.append(_badges(status.counts))
    cancelled = status.counts.get(CaseStatus.CANCELLED.value, 0)
    failed = status.counts.get(CaseStatus.FAILED.value, 0)
    if table is not None and (cancelled or failed):
        skipped = []
        if failed:
            skipped.append(f"{failed} failed")
        if cancelled:
            skipped.append(f"{cancelled} cancelled")
        body.append(
            f'<p class="note">secondary table excludes {" and ".join(skipped)}'
            " case(s); their files remain on disk</p>"
        )

    if verdict is not None:
        klass = "verdict-pass" if verdict == "Pass" else "verdict-fail"
        body.append(
            f'<h2>Regression check</h2><p class="{klass}">{_esc(verdict)}</p>'
        )

    variation = sdir / "variation.csv"
    if variation.is_file():
        from .paramspace import parse_variation_table
        from .values import serialize_scalar

        cases = parse_variation_table(variation.read_bytes(), "csv")
        columns = ["ID", *cases[0].params.keys(), "status"] if cases else []
        rows = []
        for case in cases:
            state = status.cases.get(case.id)
            rows.append(
                [case.id]
                + [serialize_scalar(v) for v in case.params.values()]
                + [state.value if state else "?"]
            )
        body.append("<h2>Variation</h2>")
        body.append(_html_table(columns, rows))

    for spec in charts:
        assert table is not None
        body.append("<figure>")
        body.append(render_chart_svg(table, spec))
        body.append(
            f"<figcaption>{_esc(spec.y)} over {_esc(spec.x)}, one line per "
            f"{_esc(spec.group)}</figcaption>"
        )
        body.append("</figure>")

    if table is not None:
        body.append("<h2>Secondary data</h2>")
        body.append(_html_table(table.columns, table.rows))

    page = (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n<head>\n<meta charset="utf-8">\n'
        f"<title>{_esc(study)}</title>\n"
        f"<style>{_CSS}</style>\n</head>\n<body>\n" + "\n".join(body) + "\n</body>\n</html>\n"
    )
    report_path = sdir / project.REPORT_FILE
    project.atomic_write_bytes(report_path, page.encode("utf-8"))

    summary = {
        "schema": 1,
        "study": study,
        "generated_at": when,
        "total": status.total,
        "counts": status.counts,
        "verdict": verdict,
        "secondary": (
            {"rows": len(table.rows), "columns": table.columns} if table is not None else None
        ),
        "charts": [f"{c.x}:{c.y}:{c.group}" for c in charts],
    }
    summary_path = sdir / project.SUMMARY_FILE
    project.atomic_write_bytes(
        summary_path, (json.dumps(summary, indent=2) + "\n").encode("utf-8")
    )
    return report_path, summary_path


def generate_index(root: Path) -> Path:
    """Cross-study index over every study that has a report.

    Carries no timestamp of its own, so regenerating without changes is
    byte identical.
    """
    root = Path(root)
    studies = []
    for name in project.list_studies(root):
        sdir = project.study_dir(root, name)
        if (sdir / project.REPORT_FILE).is_file():
            summary = {}
            summary_path = sdir / project.SUMMARY_FILE
            if summary_path.is_file():
                try:
                    summary = json.loads(summary_path.read_text(encoding="utf-8"))
                except json.JSONDecodeError:
                    summary = {}
            studies.append((name, summary))
    if not studies:
        raise ReportError(f"no study under {root} has a report yet")

    body = ["<h1>Studies</h1>", "<table>", "<tr><th>study</th><th>cases</th><th>verdict</th></tr>"]
    for name, summary in studies:
        counts = summary.get("counts", {})
        badge = _badges(counts)
        verdict = summary.get("verdict")
        if verdict is None:
            verdict_html = '<span class="note">none</span>'
        else:
            klass = "verdict-pass" if verdict == "Pass" else "verdict-fail"
            verdict_html = f'<span class="{klass}">{_esc(verdict)}</span>'
        body.append(
            f'<tr><td><a href="{_esc(name)}/report.html">{_esc(name)}</a></td>'
            f"<td>{badge}</td><td>{verdict_html}</td></tr>"
        )
    body.append("</table>")

    page = (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n<head>\n<meta charset="utf-8">\n'
        "<title>Study index</title>\n"
        f"<style>{_CSS}</style>\n</head>\n<body>\n" + "\n".join(body) + "\n</body>\n</html>\n"
    )
    out = root / INDEX_FILE
    project.atomic_write_bytes(out, page.encode("utf-8"))
    return out
