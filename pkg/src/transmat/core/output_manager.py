# transmat/core/output_manager.py
"""
Output Manager
---------------
Centralizes tabular command output:
 - Table rendering (Rich), floats rounded for display
 - JSON, JSON-lines and CSV exports with full precision
 - Column selection through schema definitions
"""

import csv
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from transmat.core.notifier import warning
from transmat.core.output_prefs import get_precision, get_selected_columns

console = Console()

FORMATS = ("table", "json", "jsonl", "csv")


def _columns(data: List[Dict], schema=None):
    if schema is not None and hasattr(schema, "display_headers"):
        field_keys = list(getattr(schema, "display_fields", schema.display_headers.keys()))
        headers = schema.display_headers
    else:
        field_keys = list(data[0].keys())
        headers = {k: k for k in field_keys}

    selected = get_selected_columns() or []
    if selected:
        key_by_lower = {k.lower(): k for k in field_keys}
        label_by_lower = {str(headers.get(k, k)).lower(): k for k in field_keys}
        chosen, unknown = [], []
        for raw in selected:
            token = raw.strip().lower()
            key = key_by_lower.get(token) or label_by_lower.get(token)
            if key and key not in chosen:
                chosen.append(key)
            elif not key:
                unknown.append(raw)
        if unknown:
            warning(f"Ignoring unknown column(s): {', '.join(unknown)}")
        if chosen:
            field_keys = chosen
    return field_keys, [headers.get(k, k) for k in field_keys]


def _display(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.{get_precision()}g}"
    return str(value)


def write_jsonl(rows: Sequence[Dict[str, Any]], path: Path):
    """One compact JSON object per line, keys in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def export_data(data: List[Dict], schema=None, fmt: str = "table", output: Optional[str] = None, title: Optional[str] = None):
    """Exports rows in table, JSON, JSON-lines or CSV format."""
    if not data:
        console.print("[yellow]⚠️ No data to export.[/yellow]")
        return

    field_keys, columns = _columns(data, schema)
    filtered = [{k: row.get(k) for k in field_keys} for row in data]

    if fmt == "json":
        result = json.dumps(filtered, indent=2, ensure_ascii=False)
        if output:
            Path(output).write_text(result, encoding="utf-8")
            console.print(f"[green]File saved to {output}[/green]")
        else:
            print(result)
        return

    if fmt == "jsonl":
        if output:
            write_jsonl(filtered, Path(output))
            console.print(f"[green]File saved to {output}[/green]")
        else:
            for row in filtered:
                print(json.dumps(row))
        return

    if fmt == "csv":
        handle = open(output, "w", newline="", encoding="utf-8") if output else sys.stdout
        try:
            writer = csv.DictWriter(handle, fieldnames=field_keys)
            writer.writeheader()
            writer.writerows(filtered)
        finally:
            if output:
                handle.close()
                console.print(f"[green]File saved to {output}[/green]")
        return

    def _is_numeric_column(key: str) -> bool:
        return all(isinstance(row.get(key), (int, float)) or row.get(key) is None for row in filtered)

    table = Table(title=title or "Results", show_header=True, header_style="bold cyan", row_styles=["none", "dim"])
    for key, name in zip(field_keys, columns):
        table.add_column(name, overflow="ellipsis", max_width=32, justify="right" if _is_numeric_column(key) else "left")
    for row in filtered:
        table.add_row(*(_display(row.get(k)) for k in field_keys))
    console.print(table)
