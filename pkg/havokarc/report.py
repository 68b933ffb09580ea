# AIDEV-NOTE: Artifact writers and summary-table renderers.
# Every file goes through write_text_atomic (temp file in the destination
# directory, then os.replace) so a crashed run never leaves half a CSV behind.
# The HTML twin of the summary is self-contained: inline CSS, no assets.

from __future__ import annotations

import contextlib
import html
import math
import os
import tempfile
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from havokarc.common import CSV_FLOAT_FORMAT, SUMMARY_COLUMNS


def escape(text: Any) -> str:
    """HTML-escape a value."""
    return html.escape(str(text))


def write_text_atomic(path: str | Path, content: str) -> None:
    """Write content to path via a temp file and an atomic rename."""
    dest = os.fspath(path)
    dest_dir = os.path.dirname(dest) or "."
    fd, tmp_path = tempfile.mkstemp(dir=dest_dir)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        os.replace(tmp_path, dest)
    except Exception:
        with contextlib.suppress(OSError):
            os.unlink(tmp_path)
        raise


def format_number(value: Any) -> str:
    """Render a cell: 9 significant digits for floats, blank for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return CSV_FLOAT_FORMAT % float(value)
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], columns: Sequence[Any]) -> None:
    """Write equally long numeric columns as CSV with a header line."""
    arrays = [np.asarray(c, dtype=np.float64) for c in columns]
    if len({a.size for a in arrays}) > 1:
        raise ValueError("CSV columns must have equal length")
    lines = [",".join(header)]
    for row in zip(*arrays):
        lines.append(",".join(CSV_FLOAT_FORMAT % v for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def render_table_csv(
    rows: Sequence[Mapping[str, Any]], columns: Sequence[str] = SUMMARY_COLUMNS
) -> str:
    """Machine-readable CSV twin of a summary table."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_number(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def render_table_text(
    rows: Sequence[Mapping[str, Any]], columns: Sequence[str] = SUMMARY_COLUMNS
) -> str:
    """Aligned plain-text table; numbers right-aligned, text left-aligned."""
    cells = [[format_number(row.get(c)) for c in columns] for row in rows]
    widths = [len(c) for c in columns]
    for line in cells:
        widths = [max(w, len(v)) for w, v in zip(widths, line)]

    def numeric(column: int) -> bool:
        return all(
            isinstance(row.get(columns[column]), (int, float, np.number, type(None)))
            and not isinstance(row.get(columns[column]), bool)
            for row in rows
        )

    aligned = [numeric(i) for i in range(len(columns))] if rows else [False] * len(columns)
    out = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    out.append("  ".join("-" * w for w in widths))
    for line in cells:
        out.append(
            "  ".join(
                v.rjust(w) if right else v.ljust(w)
                for v, w, right in zip(line, widths, aligned)
            ).rstrip()
        )
    return "\n".join(out) + "\n"


def render_table_html(
    rows: Sequence[Mapping[str, Any]],
    title: str,
    columns: Sequence[str] = SUMMARY_COLUMNS,
) -> str:
    """Self-contained HTML page holding one summary table."""
    head = "".join(f"<th>{escape(c)}</th>" for c in columns)
    body = "".join(
        "<tr>"
        + "".join(f"<td>{escape(format_number(row.get(c)))}</td>" for c in columns)
        + "</tr>\n"
        for row in rows
    )
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{escape(title)}</title>
<style>
:root {{ --fg: #1a1a1a; --border: #ddd; --head-bg: #f5f5f5; }}
@media (prefers-color-scheme: dark) {{
  :root {{ --fg: #e0e0e0; --border: #444; --head-bg: #2a2a2a; }}
  body {{ background: #1a1a1a; }}
}}
body {{ font-family: -apple-system, "Segoe UI", Roboto, sans-serif; color: var(--fg); }}
.container {{ max-width: 960px; margin: 0 auto; padding: 2rem 1rem; }}
table {{ width: 100%; border-collapse: collapse; font-size: 0.9rem; }}
th, td {{ text-align: left; padding: 0.4rem 0.6rem; border: 1px solid var(--border); }}
th {{ background: var(--head-bg); }}
</style>
</head>
<body>
<div class="container">
<h1>{escape(title)}</h1>
<table>
<thead><tr>{head}</tr></thead>
<tbody>
{body}</tbody>
</table>
</div>
</body>
</html>
"""
